from .backends import Backend, BackendResult, HighsBackend, get_backend
from .encoders import (
    encode_abs_limit,
    encode_and_not,
    encode_flow_equation,
    encode_or,
    encode_product,
    encode_zero_when,
)
from .lpformat import parse_lp, serialize_lp
from .model import BINARY, CONTINUOUS, LinConstraint, ModelIR, VarRef

__all__ = [
    "BINARY", "CONTINUOUS", "Backend", "BackendResult", "HighsBackend", "LinConstraint",
    "ModelIR", "VarRef", "encode_abs_limit", "encode_and_not", "encode_flow_equation",
    "encode_or", "encode_product", "encode_zero_when", "get_backend", "parse_lp",
    "serialize_lp",
]

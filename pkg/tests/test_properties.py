"""Property-based checks over random small grids."""

import math
from dataclasses import replace

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from riskots.analysis import security_report
from riskots.connectivity import bridges, energized_set, is_connected, resolve_source
from riskots.grid import SwitchingState, case_from_dict, case_to_dict, incidence
from riskots.milp import BINARY, CONTINUOUS, ModelIR, parse_lp, serialize_lp
from riskots.ots import Infeasible, build_problem, enumerate_states, solve
from riskots.synth import SynthConfig, random_case

from test_ots import fix_state, raw_solve

SLOW = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
POSITIVE = SynthConfig(positive_loads=True)


@st.composite
def grid_and_state(draw, cfg=SynthConfig(), with_limits=False):
    grid = random_case(np.random.default_rng(draw(st.integers(0, 2**32 - 1))), cfg, with_limits)
    opened = draw(st.sets(st.integers(0, grid.n_branch - 1), max_size=grid.n_branch))
    assume(is_connected(grid, opened))
    return grid, SwitchingState.from_open_set(grid.n_branch, opened)


@given(grid_and_state())
@settings(max_examples=60, deadline=None)
def test_conservation_and_open_branches(gs):
    grid, state = gs
    a = incidence(grid)
    for o in (r := security_report(grid, state)).per_contingency + (r.base,):
        inj = np.array(o.injections)
        resid = np.abs(a @ np.array(o.flows) - inj).max()
        assert resid <= 1e-8 * max(1.0, np.abs(inj).max())
        assert abs(inj.sum()) <= 1e-9 * max(1.0, grid.total_load)
        for e in state.open_set | ({o.contingency} - {None}):
            assert o.flows[e] == 0.0


@given(grid_and_state(POSITIVE))
@settings(max_examples=60, deadline=None)
def test_loss_zero_iff_all_energized(gs):
    grid, state = gs
    report = security_report(grid, state)
    cut = bridges(grid, state.open_set)
    for o in report.per_contingency:
        assert o.load_lost >= 0
        assert (o.load_lost == 0) == o.energized.all_energized
        if o.load_lost > 0:
            assert o.contingency in cut
        if o.energized.all_energized:
            assert o.sigma == 1.0


@given(grid_and_state())
@settings(max_examples=40, deadline=None)
def test_vacuous_contingencies(gs):
    grid, state = gs
    report = security_report(grid, state)
    for e in state.open_set:
        o = report.outcome(e)
        assert (o.energized, o.sigma, o.flows) == (report.base.energized, report.base.sigma,
                                                   report.base.flows)


@given(grid_and_state(), st.data())
@settings(max_examples=40, deadline=None)
def test_loss_monotone_in_openings(gs, data):
    # the pruning in enumerate_states relies on this
    grid, state = gs
    extra = data.draw(st.sets(st.integers(0, grid.n_branch - 1), max_size=3))
    bigger = state.open_set | extra
    assume(is_connected(grid, bigger))
    s = resolve_source(grid)
    for c in grid.contingencies:
        small = energized_set(grid, state.open_set | {c}, s).mask()
        big = energized_set(grid, bigger | {c}, s).mask()
        assert not (big & ~small).any()


@given(grid_and_state(with_limits=False))
@SLOW
def test_pi_matches_traversal(gs):
    grid, state = gs
    x = raw_solve(fix_state(build_problem(grid), state.open_set))
    assert x is not None  # limits are loose, so any connected state is feasible
    s = resolve_source(grid)
    for c in grid.contingencies:
        on = energized_set(grid, state.open_set | {c}, s).energized
        assert tuple(int(round(x[f"pi.{c}.{i}"])) for i in range(grid.n_bus)) == on


@given(st.integers(0, 2**32 - 1), st.floats(0.3, 1.0))
@SLOW
def test_solve_matches_enumerate(seed, squeeze):
    rng = np.random.default_rng(seed)
    grid = random_case(rng, SynthConfig(max_bus=6, max_branch=8))
    # tightening all limits also exercises infeasible instances
    grid = replace(grid, branches=tuple(replace(b, limit=b.limit * squeeze) for b in grid.branches))
    try:
        a = solve(build_problem(grid)).objective
    except Infeasible:
        a = None
    try:
        b = enumerate_states(grid, grid.n_branch).objective
    except Infeasible:
        b = None
    assert (a is None) == (b is None)
    if a is not None:
        assert math.isclose(a, b, abs_tol=1e-6)


@given(grid_and_state())
@settings(max_examples=30, deadline=None)
def test_case_dict_round_trip(gs):
    grid, _ = gs
    assert case_from_dict(case_to_dict(grid)) == grid


coef = st.floats(-1e6, 1e6, allow_nan=False).filter(lambda c: c != 0)


@given(st.lists(st.tuples(st.sampled_from([BINARY, CONTINUOUS]), st.floats(-10, 0),
                          st.floats(0, 10)), min_size=1, max_size=6),
       st.lists(st.tuples(st.lists(st.tuples(coef, st.integers(0, 5)), min_size=1, max_size=4),
                          st.sampled_from(["<=", "=", ">="]), st.floats(-1e3, 1e3)), max_size=5),
       st.floats(-100, 100))
@settings(max_examples=80, deadline=None)
def test_lp_round_trip(vars_, rows, offset):
    model = ModelIR(name="prop")
    refs = [model.add_var(f"x.{k}", kind, lo, hi) for k, (kind, lo, hi) in enumerate(vars_)]
    for terms, sense, rhs in rows:
        model.add_constraint([(c, refs[i % len(refs)]) for c, i in terms], sense, rhs, "plumbing")
    model.set_objective([(1.0, refs[0])], offset)
    text = serialize_lp(model)
    again = parse_lp(text)
    assert serialize_lp(again) == text
    assert [(v.name, v.kind, v.lo, v.hi) for v in again.variables] == \
        [(v.name, v.kind, v.lo, v.hi) for v in model.variables]
    for a, b in zip(again.constraints, model.constraints):
        assert (a.sense, a.rhs, a.tag) == (b.sense, b.rhs, b.tag)
        assert [(c, v.name) for c, v in a.terms] == [(c, v.name) for c, v in b.terms]

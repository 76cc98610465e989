import json

import numpy as np
import pytest

from riskots.grid import (
    CaseError,
    SwitchingState,
    case_from_dict,
    case_to_dict,
    incidence,
    load_case,
    validate_case,
    validate_switching,
    write_case,
)

from conftest import make_grid


def test_case14_fixture_shape(case14):
    assert case14.n_bus == 14
    assert case14.n_branch == 20
    assert case14.contingencies == tuple(range(20))
    assert sum(case14.probabilities.values()) == pytest.approx(1.0)
    assert case14.gen.sum() == pytest.approx(case14.total_load)


@pytest.mark.parametrize("name", ["GH", "HG", "DI", "JK"])
def test_branch_by_label_either_orientation(case14, name):
    e = case14.branch_by_label(name)
    assert set(case14.branch_name(e)) == set(name)


def test_branch_by_label_unknown(case14):
    with pytest.raises(KeyError):
        case14.branch_by_label("AN")


def test_json_round_trip(tmp_path, case14):
    path = tmp_path / "c.json"
    write_case(case14, path)
    again = load_case(path)
    assert again == case14
    assert case_to_dict(again) == json.loads(path.read_text())


def test_explicit_source_policy_round_trips():
    grid = make_grid([10, 0], [0, 10], [(0, 1)], source_bus=1)
    data = case_to_dict(grid)
    assert data["source_policy"] == {"bus": 1}
    assert case_from_dict(data).source_bus == 1


def _base():
    return case_to_dict(make_grid([10, 0, 0], [0, 4, 6], [(0, 1), (1, 2), (0, 2)]))


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d["buses"][1].update(load_mw=5), "unbalanced"),
    (lambda d: d["buses"][1].update(load_mw=-4), "non-negative"),
    (lambda d: d["branches"][0].update(to=0), "self-loop"),
    (lambda d: d["branches"][0].update(susceptance_pu=0), "susceptance"),
    (lambda d: d["branches"][0].update(limit_mw=-1), "limit"),
    (lambda d: d["branches"][0].update(to=7), "not a bus"),
    (lambda d: d["probabilities"].update({"0": 1.5}), "outside"),
    (lambda d: d["probabilities"].pop("1"), "no probability"),
    (lambda d: d.update(source_policy={"bus": 9}), "source"),
    (lambda d: d.update(source_policy="nearest"), "source_policy"),
    (lambda d: d.pop("buses"), "malformed"),
])
def test_invalid_cases_rejected(mutate, message):
    data = _base()
    mutate(data)
    with pytest.raises(CaseError, match=message):
        case_from_dict(data)


def test_disconnected_case_rejected():
    grid = make_grid([10, 0, 0, 0], [0, 10, 0, 0], [(0, 1), (2, 3)])
    with pytest.raises(CaseError, match="disconnected"):
        validate_case(grid)


def test_incidence_signs(triangle):
    a = incidence(triangle)
    assert a.shape == (3, 3)
    np.testing.assert_array_equal(a.sum(axis=0), 0)
    assert a[1, 0] == 1 and a[0, 0] == -1


def test_switching_state_helpers():
    s = SwitchingState.from_open_set(4, [2, 0])
    assert s.open == (True, False, True, False)
    assert s.open_set == {0, 2}
    assert SwitchingState.closed(3).open_set == frozenset()
    with pytest.raises(CaseError):
        SwitchingState.from_open_set(3, [3])


def test_validate_switching(path3):
    assert validate_switching(path3, SwitchingState.closed(2)) == []
    assert validate_switching(path3, SwitchingState.from_open_set(2, [1])) == ["base case disconnected"]
    assert "state length" in validate_switching(path3, SwitchingState.closed(3))[0]

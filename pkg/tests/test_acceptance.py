"""Acceptance gate: one test per criterion, summarized at the end of the run."""

import itertools
import math
import time

import numpy as np
import pytest

from riskots import fixture_path
from riskots.analysis import dc_flow, security_report
from riskots.cli import main
from riskots.connectivity import energized_set, is_connected, resolve_source
from riskots.grid import SwitchingState, incidence
from riskots.milp import BINARY, CONTINUOUS, ModelIR
from riskots.milp.encoders import (
    encode_abs_limit,
    encode_and_not,
    encode_or,
    encode_product,
    encode_zero_when,
)
from riskots.ots import Infeasible, build_problem, enumerate_states, solve
from riskots.synth import SynthConfig, random_case

N_RANDOM = 200
OPENINGS_TARGET = 5
DEENERGIZING_TARGET = 8
AVG_LOSS_TARGET, AVG_LOSS_TOL = 0.067, 0.005


@pytest.fixture(scope="module")
def oracle_runs():
    """Solve and enumerate the random cases once; criteria 1 and 2 share the results."""
    rng = np.random.default_rng(20240601)
    runs = []
    start = time.perf_counter()
    for _ in range(N_RANDOM):
        grid = random_case(rng, SynthConfig())
        try:
            sol = solve(build_problem(grid))
        except Infeasible:
            sol = None
        try:
            ref = enumerate_states(grid, grid.n_branch)
        except Infeasible:
            ref = None
        runs.append((grid, sol, ref))
    return runs, time.perf_counter() - start


@pytest.fixture(scope="module")
def fixture_solution(case14):
    start = time.perf_counter()
    sol = solve(build_problem(case14))
    return sol, time.perf_counter() - start


def test_criterion_1_oracle_equivalence(oracle_runs):
    """criterion 1: solve() and enumerate(|E|) agree on 200 random cases in < 10 min"""
    runs, elapsed = oracle_runs
    assert len(runs) == N_RANDOM
    disagree = []
    for k, (grid, sol, ref) in enumerate(runs):
        assert 4 <= grid.n_bus <= 8 and grid.n_bus - 1 <= grid.n_branch <= 12
        if (sol is None) != (ref is None):
            disagree.append((k, "feasibility"))
        elif sol is not None and abs(sol.objective - ref.objective) > 1e-6:
            disagree.append((k, sol.objective, ref.objective))
    assert disagree == []
    assert elapsed < 600


def _pi_mismatches(grid, sol):
    source = resolve_source(grid)
    bad = 0
    for c in grid.contingencies:
        on = energized_set(grid, sol.state.open_set | {c}, source).energized
        got = tuple(int(sol.assignment[f"pi.{c}.{i}"]) for i in range(grid.n_bus))
        bad += got != on
    return bad


def test_criterion_2_pi_faithfulness(oracle_runs, case14, fixture_solution):
    """criterion 2: MILP pi equals the traversal energized sets, zero mismatches"""
    runs, _ = oracle_runs
    solved = [(g, s) for g, s, _ in runs if s is not None]
    assert solved
    mismatches = sum(_pi_mismatches(g, s) for g, s in solved)
    mismatches += _pi_mismatches(case14, fixture_solution[0])
    assert mismatches == 0


def _admits(model, values):
    return not model.violations([values[v.name] for v in model.variables])


SAMPLES = (-12.0, -10.0, -3.5, 0.0, 2.0, 10.0, 12.0)


def test_criterion_3_encoder_truth_tables():
    """criterion 3: every encoder matches its defining equation on all 0/1 assignments"""
    failures = []
    m = 10.0

    # zero-when: a = 0 if u else |a| <= M
    model = ModelIR()
    a, u = model.add_var("a", CONTINUOUS, -50, 50), model.add_var("u", BINARY)
    encode_zero_when(model, a, u, m)
    for uv, av in itertools.product((0, 1), SAMPLES):
        if _admits(model, {"a": av, "u": uv}) != (av == 0 if uv else abs(av) <= m):
            failures.append(("zero_when", uv, av))

    # product: a = x * u with |x| <= M
    model = ModelIR()
    a, x, u = (model.add_var("a", CONTINUOUS, -50, 50), model.add_var("x", CONTINUOUS, -m, m),
               model.add_var("u", BINARY))
    encode_product(model, a, [(1.0, x)], u, m)
    for uv, av, xv in itertools.product((0, 1), SAMPLES, SAMPLES):
        if abs(xv) > m:
            continue
        if _admits(model, {"a": av, "x": xv, "u": uv}) != (av == xv * uv):
            failures.append(("product", uv, av, xv))

    # abs-limit: |f| <= limit
    model = ModelIR()
    f = model.add_var("f", CONTINUOUS, -50, 50)
    encode_abs_limit(model, f, m)
    for fv in SAMPLES:
        if _admits(model, {"f": fv}) != (abs(fv) <= m):
            failures.append(("abs_limit", fv))

    # or over up to three inputs
    for n in (1, 2, 3):
        model = ModelIR()
        xo = model.add_var("x", BINARY)
        ins = [model.add_var(f"i{k}", BINARY) for k in range(n)]
        encode_or(model, xo, ins)
        for bits in itertools.product((0, 1), repeat=n + 1):
            vals = {"x": bits[0], **{f"i{k}": b for k, b in enumerate(bits[1:])}}
            if _admits(model, vals) != (bits[0] == int(any(bits[1:]))):
                failures.append(("or", bits))

    # and-not
    model = ModelIR()
    psi, pi, w = (model.add_var(n, BINARY) for n in ("psi", "pi", "w"))
    encode_and_not(model, psi, pi, w)
    for p, q, r in itertools.product((0, 1), repeat=3):
        if _admits(model, {"psi": p, "pi": q, "w": r}) != (p == int(q and not r)):
            failures.append(("and_not", p, q, r))

    # disjunction aggregation: pi_i = OR over branches of (pi_j AND NOT w)
    model = ModelIR()
    nm = ["pi", "pj0", "pj1", "w0", "w1", "s0", "s1"]
    v = {n: model.add_var(n, BINARY) for n in nm}
    encode_and_not(model, v["s0"], v["pj0"], v["w0"])
    encode_and_not(model, v["s1"], v["pj1"], v["w1"])
    encode_or(model, v["pi"], [v["s0"], v["s1"]])
    for bits in itertools.product((0, 1), repeat=len(nm)):
        d = dict(zip(nm, bits))
        ok = (d["s0"] == int(d["pj0"] and not d["w0"]) and d["s1"] == int(d["pj1"] and not d["w1"])
              and d["pi"] == int(d["s0"] or d["s1"]))
        if _admits(model, d) != ok:
            failures.append(("disjunction", bits))
    assert failures == []


def test_criterion_4_dc_numerics(triangle):
    """criterion 4: conservation and open-branch flows on 1000 random pairs, triangle split"""
    rng = np.random.default_rng(4)
    pairs = 0
    while pairs < 1000:
        grid = random_case(rng, SynthConfig(), with_limits=False)
        k = int(rng.integers(0, grid.n_branch))
        opened = set(rng.choice(grid.n_branch, size=k, replace=False).tolist())
        if not is_connected(grid, opened):
            continue
        pairs += 1
        a = incidence(grid)
        report = security_report(grid, SwitchingState.from_open_set(grid.n_branch, opened))
        for o in (report.base, *report.per_contingency):
            inj = np.array(o.injections)
            flows = np.array(o.flows)
            assert np.abs(a @ flows - inj).max() <= 1e-8 * max(1.0, np.abs(inj).max())
            off = opened | ({o.contingency} if o.contingency is not None else set())
            assert all(flows[e] == 0.0 for e in off)
    flows, _ = dc_flow(triangle, (), np.array([1.0, 0.0, -1.0]), 0)
    assert abs(abs(flows[2]) - 2 / 3) <= 1e-9
    assert abs(abs(flows[0]) - 1 / 3) <= 1e-9 and abs(abs(flows[1]) - 1 / 3) <= 1e-9


def test_criterion_5_pre_ots(case14):
    """criterion 5: all-closed fixture has exactly 4 overloading contingencies, all on DI"""
    report = security_report(case14, SwitchingState.closed(case14.n_branch))
    di = case14.branch_by_label("DI")
    assert not report.base.overloads
    assert len(report.overloading) == 4
    assert {report.outcome(c).overloads for c in report.overloading} == {(di,)}


def test_criterion_6_post_ots(case14, fixture_solution):
    """criterion 6: optimized fixture has 5 openings, 0 overloads, 8 de-energizing, 6.7% loss"""
    sol, _ = fixture_solution
    report = security_report(case14, sol.state)
    assert is_connected(case14, sol.state.open_set)
    assert report.overloading == [] and not report.base.overloads
    assert len(sol.state.open_set) == OPENINGS_TARGET
    assert len(report.deenergizing) == DEENERGIZING_TARGET
    assert abs(report.avg_loss_fraction - AVG_LOSS_TARGET) <= AVG_LOSS_TOL
    # the exhaustive oracle is authoritative and must not find a better state
    ref = enumerate_states(case14, 6)
    assert math.isclose(ref.objective, sol.objective, abs_tol=1e-6)
    assert len(ref.state.open_set) == OPENINGS_TARGET


def test_criterion_7_intermediate_state(case14):
    """criterion 7: under {JK, IN, GI} tripping AE overloads BE"""
    state = SwitchingState.from_open_set(
        case14.n_branch, [case14.branch_by_label(n) for n in ("JK", "IN", "GI")])
    report = security_report(case14, state)
    ae, be = case14.branch_by_label("AE"), case14.branch_by_label("BE")
    assert ae in report.overloading
    assert be in report.outcome(ae).overloads


def _cli_outputs(tmp, tag, capsys):
    case = str(fixture_path())
    out = {}
    for cmd, extra in [("solve", []), ("enumerate", ["--max-open", "6"]),
                       ("security", ["--open", "JK,IN,GI"])]:
        report, dot = tmp / f"{tag}_{cmd}.json", tmp / f"{tag}_{cmd}_dot"
        assert main([cmd, case, *extra, "--report", str(report), "--dot", str(dot)]) == 0
        capsys.readouterr()
        out[cmd] = report.read_bytes()
        for p in sorted(dot.iterdir()):
            out[f"{cmd}/{p.name}"] = p.read_bytes()
    assert main(["verify", case, str(tmp / f"{tag}_solve.json")]) == 0
    out["verify"] = capsys.readouterr().out.encode()
    return out


def test_criterion_8_determinism(tmp_path, capsys):
    """criterion 8: two runs of every CLI command give byte-identical JSON and DOT"""
    first = _cli_outputs(tmp_path, "a", capsys)
    second = _cli_outputs(tmp_path, "b", capsys)
    assert first.keys() == second.keys()
    assert [k for k in first if first[k] != second[k]] == []


def test_criterion_9_runtime(case14, fixture_solution):
    """criterion 9: 14-bus solve() < 60 s and enumerate(6) < 5 min"""
    _, solve_time = fixture_solution
    start = time.perf_counter()
    enumerate_states(case14, 6)
    enum_time = time.perf_counter() - start
    print(f"solve {solve_time:.1f} s, enumerate(6) {enum_time:.1f} s")
    assert solve_time < 60
    assert enum_time < 300

from __future__ import annotations

import itertools

import numpy as np
import pytest
from conftest import make_instance
from hypothesis import given
from hypothesis import strategies as st
from oracles import enumerate_optimum, enumerate_schedules, tableau_simplex

from bpsched.compact import (
    add_usage_row,
    build,
    build_pddt,
    build_pdt,
    fix_start_bounds,
    lp_bound,
    separate_precedence_cuts,
    solve_integral,
    solve_with_cuts,
)
from bpsched.errors import InfeasibleHorizon, InfeasibleWindows
from bpsched.generate import toy_instance
from bpsched.lp import EPS_NUM, OPTIMAL
from bpsched.model import TimeWindows, compute_time_windows, serial_schedule
from bpsched.parser import parse_file


def _families(model):
    out: dict[str, int] = {}
    for tag in model.lp.row_tags:
        out[tag[0]] = out.get(tag[0], 0) + 1
    return out


def _two_chain():
    return make_instance([(2,), (1,)], edges=[(1, 2)], horizon=5, demands=[[(1,)], [(1,)]], capacities=[2])


def test_pddt_row_counts():
    inst = _two_chain()
    fam = _families(build_pddt(inst))
    assert fam == {"assign": 2, "prec": 5, "res": 5}


def test_pdt_row_counts():
    fam = _families(build_pdt(_two_chain()))
    assert fam == {"assign": 2, "agg": 1, "res": 5}


def test_variable_bounds_and_index_bijection():
    inst = toy_instance(5, n_acts=4, n_modes=2, horizon=10)
    m = build_pddt(inst)
    cols = m.x_columns()
    assert sorted(cols) == list(range(m.lp.n_cols))
    assert all(m.lp.lb[c] == 0.0 and m.lp.ub[c] == 1.0 for c in cols)


def test_fixed_capacity_is_substituted():
    inst = _two_chain()
    m = build_pddt(inst)
    assert m.r_index == {}
    assert m.lp.rhs[m.lp.row(("res", 0, 3))] == 2.0


def test_dummy_activity_rows():
    inst = make_instance([(0,), (2,)], edges=[(1, 2)], horizon=4, demands=[[(3,)], [(1,)]], capacities=[3])
    m = build_pddt(inst)
    A = m.lp.matrix().toarray()
    dummy = [c for c, *_ in m.by_act[(1, 1)]]
    # a zero-duration activity never occupies a period
    for t in range(1, 5):
        assert not A[m.lp.row(("res", 0, t))][dummy].any()
    assert A[m.lp.row(("assign", (1, 1)))][dummy].all()
    assert lp_bound(m).status == OPTIMAL


def test_empty_window_raises():
    inst = make_instance([(2,)], horizon=4)
    w = compute_time_windows(inst)
    bad = TimeWindows(w.horizon, w.horizon_completion, w.est, {k: 0 for k in w.lst})
    with pytest.raises(InfeasibleWindows):
        build_pddt(inst, bad)


def test_j30_bounds_and_oracle(j30_path):
    inst = parse_file(j30_path, "heuristic")
    w = compute_time_windows(inst)
    pddt = lp_bound(build(inst, "PDDT", w, dense_rows=False))
    pdt = lp_bound(build(inst, "PDT", w))
    assert pdt.objective <= pddt.objective + EPS_NUM
    ref = tableau_simplex(build(inst, "PDT", w).lp)
    assert ref.objective == pytest.approx(pdt.objective, abs=1e-6)


def test_j30_integral_pdt_above_pddt_lp(j30_path):
    inst = parse_file(j30_path, "heuristic")
    w = compute_time_windows(inst)
    z_pddt = lp_bound(build(inst, "PDDT", w, dense_rows=False)).objective
    sched = serial_schedule(inst)
    sol = solve_integral(build(inst, "PDT", w), budget_nodes=300, start=sched)
    assert sol.objective is not None
    assert sol.objective <= max(s for _, s in sched.values())
    assert sol.objective >= z_pddt - EPS_NUM
    assert abs(sol.objective - round(sol.objective)) <= 1e-6


def test_cut_loop_fixpoint_on_j30(j30_path):
    inst = parse_file(j30_path, "heuristic")
    w = compute_time_windows(inst)
    z_pddt = lp_bound(build(inst, "PDDT", w, dense_rows=False)).objective
    res = solve_with_cuts(inst, "PDT", windows=w)
    assert res.status == OPTIMAL
    assert res.bound == pytest.approx(z_pddt, abs=EPS_NUM)
    assert res.lp_bound < res.bound  # the fixture has a real PDT/PDDT gap, so cuts were needed
    assert res.cuts_added >= 1
    assert all(b >= a - EPS_NUM for a, b in zip(res.trace, res.trace[1:]))


def test_rounds_zero_and_pddt_unchanged(j30_path):
    inst = parse_file(j30_path, "heuristic")
    w = compute_time_windows(inst)
    plain = lp_bound(build(inst, "PDT", w)).objective
    res = solve_with_cuts(inst, "PDT", rounds=0, windows=w)
    assert res.bound == pytest.approx(plain) and res.cuts_added == 0
    res = solve_with_cuts(inst, "PDDT", windows=w)
    assert res.cuts_added == 0 and res.bound == pytest.approx(res.lp_bound)


def test_max_cuts_one_is_most_violated(j30_path):
    inst = parse_file(j30_path, "heuristic")
    m = build(inst, "PDT", compute_time_windows(inst))
    sol = lp_bound(m)
    every = separate_precedence_cuts(m, sol, max_cuts=10**6)
    one = separate_precedence_cuts(m, sol, max_cuts=1)
    assert len(one) == 1 and every
    assert one[0].violation == pytest.approx(max(c.violation for c in every))
    # each row really is violated by the LP point
    for cut in every[:20]:
        lhs = sum(v * sol.x[c] for c, v in cut.entries.items())
        assert lhs - 1.0 == pytest.approx(cut.violation) and cut.violation > 1e-6


def test_integral_point_has_no_cuts():
    inst = toy_instance(2, n_acts=4, horizon=12)
    m = build(inst, "PDT", compute_time_windows(inst))
    sol = solve_integral(m)
    fake = type("S", (), {"x": sol.x})()
    assert separate_precedence_cuts(m, fake) == []


def test_node_helpers():
    inst = toy_instance(3, n_acts=3, horizon=10)
    m = build(inst, "PDDT", compute_time_windows(inst))
    z0 = lp_bound(m).objective
    fix_start_bounds(m, {(1, 1): (4, 4)})
    assert lp_bound(m).objective >= z0 - EPS_NUM
    assert all(m.lp.ub[c] == 0.0 for c, _, s, _ in m.by_act[(1, 1)] if s != 4)
    i = add_usage_row(m, 0, 4, ">=", 0)
    assert m.lp.row_tags[i] == ("usage", 0, 4, ">=")


# ---------------------------------------------------------------- properties


def _row_feasible(lp, x, tol=1e-9):
    act = lp.matrix().toarray() @ x if lp.n_rows else np.zeros(0)
    for i, s in enumerate(lp.sense):
        if (s == "<=" and act[i] > lp.rhs[i] + tol) or (s == ">=" and act[i] < lp.rhs[i] - tol):
            return False
        if s == "=" and abs(act[i] - lp.rhs[i]) > tol:
            return False
    return True


def _point(model, sched):
    x = np.zeros(model.lp.n_cols)
    for a, (m, s) in sched.items():
        x[model.x_index[(a, m, s)]] = 1.0
    return x


toys = st.builds(
    toy_instance,
    seed=st.integers(0, 10_000),
    n_acts=st.integers(1, 3),
    n_modes=st.integers(1, 2),
    horizon=st.integers(5, 7),
    n_resources=st.integers(0, 1),
    cost=st.sampled_from(["makespan", "random"]),
)


@given(toys)
def test_integral_points_agree(inst):
    """Every 0/1 assignment point is feasible for PDDT iff for PDT iff it is a schedule."""
    try:
        w = compute_time_windows(inst)
    except InfeasibleHorizon:
        return
    pddt, pdt = build(inst, "PDDT", w), build(inst, "PDT", w)
    feasible = {tuple(sorted(s.items())) for s in enumerate_schedules(inst)}
    acts = sorted(inst.activities)
    options = [[(m, s) for m in w.modes(a) for s in w.starts(a, m)] for a in acts]
    for combo in itertools.product(*options):
        sched = dict(zip(acts, combo))
        x = _point(pddt, sched)
        a_ok = _row_feasible(pddt.lp, x)
        assert a_ok == _row_feasible(pdt.lp, _point(pdt, sched))
        assert a_ok == (tuple(sorted(sched.items())) in feasible)
        if a_ok:
            assert float(np.dot(pddt.lp.cost, x)) == pytest.approx(float(np.dot(pdt.lp.cost, _point(pdt, sched))))


@given(toys)
def test_bound_chain(inst):
    try:
        w = compute_time_windows(inst)
    except InfeasibleHorizon:
        return
    z_ip = enumerate_optimum(inst)
    a, b = lp_bound(build(inst, "PDT", w)), lp_bound(build(inst, "PDDT", w))
    if z_ip is None:
        return
    assert a.objective <= b.objective + EPS_NUM <= float(z_ip) + 2 * EPS_NUM

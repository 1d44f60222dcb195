from __future__ import annotations

import io
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import kkt_residuals, tableau_simplex, vertex_enumeration

from bpsched.compact import build
from bpsched.errors import DimensionMismatch
from bpsched.generate import toy_instance
from bpsched.lp import (
    BASIC,
    EPS_NUM,
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    LpProblem,
    LpSession,
    add_columns,
    add_rows,
    reduced_cost,
    solve_lp,
    write_lp,
)
from bpsched.model import compute_time_windows
from bpsched.parser import parse_file

ENGINES = ("highs", "simplex")


def _small():
    p = LpProblem()
    x = p.add_column(1.0, tag="x")
    y = p.add_column(2.0, tag="y")
    p.add_row(">=", 2.0, {x: 1.0, y: 1.0}, tag="cover")
    p.add_row("<=", 1.5, {x: 1.0}, tag="cap")
    return p


@pytest.mark.parametrize("engine", ENGINES)
def test_single_bound_row(engine):
    p = LpProblem()
    x = p.add_column(1.0)
    p.add_row(">=", 3.0, {x: 1.0})
    sol = solve_lp(p, engine=engine)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(3.0)
    assert sol.duals[0] == pytest.approx(1.0)


@pytest.mark.parametrize("engine", ENGINES)
def test_degenerate_toy_reports_zero_basics(engine):
    p = LpProblem()
    x = p.add_column(0.0)
    y = p.add_column(0.0)
    p.add_row("<=", 0.0, {x: 1.0, y: 1.0})
    p.add_row("<=", 0.0, {x: 1.0})
    p.add_row("<=", 0.0, {y: 1.0})
    sol = solve_lp(p, engine=engine)
    assert sol.status == OPTIMAL
    assert sol.degenerate_count >= 1


@pytest.mark.parametrize("engine", ENGINES)
def test_statuses(engine):
    p = LpProblem()
    x = p.add_column(-1.0)
    p.add_row(">=", 0.0, {x: 1.0})
    assert solve_lp(p, engine=engine).status == UNBOUNDED
    q = LpProblem()
    x = q.add_column(1.0, 0.0, 1.0)
    q.add_row(">=", 2.0, {x: 1.0})
    assert solve_lp(q, engine=engine).status == INFEASIBLE


def test_iteration_limit_is_a_status(j30_path):
    inst = parse_file(j30_path, "heuristic")
    m = build(inst, "PDDT", compute_time_windows(inst))
    sol = solve_lp(m.lp, engine="simplex", iteration_limit=3)
    assert sol.status == ITERATION_LIMIT


@pytest.mark.parametrize("seed", [1, 2, 3])
@pytest.mark.parametrize("formulation", ["PDT", "PDDT"])
def test_compact_lp_matches_tableau_oracle(seed, formulation):
    inst = toy_instance(seed, n_acts=6, n_modes=2, horizon=14, n_resources=2)
    m = build(inst, formulation, compute_time_windows(inst), dense_rows=False)
    ref = tableau_simplex(m.lp)
    assert ref.status == OPTIMAL
    for engine in ENGINES:
        sol = solve_lp(m.lp, engine=engine)
        assert abs(sol.objective - ref.objective) <= 1e-6 * max(1.0, abs(ref.objective))


def test_tableau_duals_match_on_nondegenerate_toy():
    p = _small()
    ref = tableau_simplex(p)
    sol = solve_lp(p)
    assert np.allclose(ref.duals, sol.duals, atol=1e-9)


@pytest.mark.parametrize("engine", ENGINES)
def test_add_column_never_worsens(engine):
    p = _small()
    s = LpSession(p, engine)
    z0 = s.solve().objective
    add_columns(p, [(0.5, 0.0, math.inf, {0: 1.0}, "cheap")])
    z1 = s.solve().objective
    assert z1 <= z0 + EPS_NUM
    assert z1 == pytest.approx(1.0)


@pytest.mark.parametrize("engine", ENGINES)
def test_add_cut_never_improves(engine):
    p = _small()
    s = LpSession(p, engine)
    z0 = s.solve().objective
    add_rows(p, [("<=", 0.5, {p.col("x"): 1.0}, "cut")])
    z1 = s.solve().objective
    assert z1 >= z0 - EPS_NUM
    assert p.row("cut") == 2 and p.row("cover") == 0


@pytest.mark.parametrize("engine", ENGINES)
def test_duplicate_column_same_reduced_cost(engine):
    p = _small()
    add_columns(p, [(1.0, 0.0, math.inf, {0: 1.0, 1: 1.0})])
    sol = solve_lp(p, engine=engine)
    assert sol.reduced_costs[0] == pytest.approx(sol.reduced_costs[2], abs=1e-9)


def test_duplicate_tags_rejected():
    p = _small()
    with pytest.raises(ValueError):
        p.add_row("<=", 1.0, tag="cap")
    with pytest.raises(IndexError):
        p.add_row("<=", 1.0, {7: 1.0})
    with pytest.raises(ValueError):
        p.add_column(0.0, 2.0, 1.0)


def test_reduced_cost_function():
    p = _small()
    sol = solve_lp(p)
    for j in range(p.n_cols):
        rc = reduced_cost(p, p.cost[j], p.column_entries(j), sol.duals)
        assert rc == pytest.approx(sol.reduced_costs[j], abs=1e-9)
    basic = np.nonzero(sol.basis.col_status == BASIC)[0]
    assert all(abs(sol.reduced_costs[j]) <= EPS_NUM for j in basic)
    assert reduced_cost(p, 4.0, {0: 3.0}, np.zeros(2)) == 4.0
    with pytest.raises(DimensionMismatch):
        reduced_cost(p, 1.0, {0: 1.0}, np.zeros(3))


def test_warm_start_equivalence(j30_path):
    inst = parse_file(j30_path, "heuristic")
    m = build(inst, "PDT", compute_time_windows(inst))
    cold = solve_lp(m.lp)
    s = LpSession(m.lp)
    s.solve()
    m.lp.add_row("<=", 1e6, {0: 1.0}, tag="slack-row")
    warm = s.solve()
    assert warm.objective == pytest.approx(cold.objective, rel=EPS_NUM)
    again = solve_lp(m.lp, warm_basis=cold.basis, engine="simplex")
    assert again.objective == pytest.approx(cold.objective, rel=EPS_NUM)


def test_write_lp_layout():
    text = write_lp(_small(), io.StringIO())
    assert "Minimize" in text and "Subject To" in text and "End" in text


@st.composite
def small_lps(draw):
    p = LpProblem()
    n = draw(st.integers(1, 3))
    m = draw(st.integers(0, 3))
    for _ in range(n):
        lb = draw(st.integers(-2, 0))
        p.add_column(float(draw(st.integers(-5, 5))), float(lb), float(lb + draw(st.integers(0, 4))))
    for _ in range(m):
        coefs = {j: float(draw(st.integers(-3, 3))) for j in range(n)}
        p.add_row(draw(st.sampled_from(["<=", ">=", "="])), float(draw(st.integers(-3, 3))), coefs)
    return p


@given(small_lps())
def test_engines_agree_with_vertex_enumeration(p):
    ref = vertex_enumeration(p)
    for engine in ENGINES:
        sol = solve_lp(p, engine=engine)
        if math.isinf(ref):
            assert sol.status == INFEASIBLE
            continue
        assert sol.status == OPTIMAL
        assert sol.objective == pytest.approx(ref, abs=1e-6)
        res = kkt_residuals(p, sol)
        assert max(res.values()) <= 1e-6, res


@given(small_lps())
def test_tableau_agrees_with_engines(p):
    ref = tableau_simplex(p)
    sol = solve_lp(p)
    if sol.status == OPTIMAL:
        assert ref.objective == pytest.approx(sol.objective, abs=1e-6)
        # the oracle's own primal-dual pair is an optimality certificate
        rc = np.asarray(p.cost) - p.matrix().toarray().T @ ref.duals if p.n_rows else np.asarray(p.cost)
        cert = SimpleNamespace(x=ref.x, duals=ref.duals, reduced_costs=rc, objective=ref.objective)
        assert max(kkt_residuals(p, cert).values()) <= 1e-6
    else:
        assert ref.status == INFEASIBLE

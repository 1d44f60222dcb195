"""Compact time-indexed formulations and the precedence cut loop.

Both formulations use pulse variables ``x[a, m, t] = 1`` iff activity ``a``
starts in mode ``m`` at period ``t``. PDDT links every precedence pair per
period; PDT aggregates each pair into one start-time inequality.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import InfeasibleHorizon, InfeasibleWindows
from .lp import OPTIMAL, LpProblem, LpSession, LpSolution
from .mip import MipSolution, solve_mip
from .model import Act, Edge, Instance, TimeWindows, compute_time_windows

EPS_CUT = 1e-6
MAX_CUTS_PER_ROUND = 200


@dataclass
class CompactModel:
    inst: Instance
    windows: TimeWindows
    formulation: str  # "PDDT" | "PDT"
    lp: LpProblem
    x_index: dict[tuple[Act, int, int], int]
    r_index: dict[int, int]
    # per activity: list of (column, mode, start, duration)
    by_act: dict[Act, list[tuple[int, int, int, int]]] = field(default_factory=dict)

    def x_columns(self) -> list[int]:
        return list(self.x_index.values())

    def integer_columns(self) -> list[int]:
        return self.x_columns() + list(self.r_index.values())

    def start_values(self, x) -> dict[Act, float]:
        """Fractional start ``sum t * x[a, m, t]`` per activity."""
        return {a: float(sum(x[c] * s for c, _, s, _ in cols)) for a, cols in self.by_act.items()}


def _add_variables(inst: Instance, windows: TimeWindows, lp: LpProblem):
    x_index = {}
    by_act: dict[Act, list] = {}
    for a in inst.topological_order():
        cols = []
        for m in windows.modes(a):
            d = inst.mode(a, m).duration
            for t in windows.starts(a, m):
                c = lp.add_column(float(inst.cost(a, m, t)), 0.0, 1.0, tag=("x", a, m, t))
                x_index[(a, m, t)] = c
                cols.append((c, m, t, d))
        if not cols:
            raise InfeasibleWindows(f"activity {a} has no admissible start")
        by_act[a] = cols
    r_index = {}
    for k, res in enumerate(inst.resources):
        if res.fixed:
            lp.offset += float(res.unit_cost * res.r_max)
        else:
            hi = float("inf") if res.r_max is None else float(res.r_max)
            r_index[k] = lp.add_column(float(res.unit_cost), float(res.r_min), hi, tag=("R", k))
    return x_index, by_act, r_index


def _assignment_rows(lp: LpProblem, by_act):
    for a, cols in by_act.items():
        lp.add_row("=", 1.0, {c: 1.0 for c, *_ in cols}, tag=("assign", a))


def _resource_rows(inst: Instance, lp: LpProblem, by_act, r_index):
    T = inst.horizon
    rows: dict[tuple[int, int], dict[int, float]] = defaultdict(dict)
    for a, cols in by_act.items():
        for c, m, s, d in cols:
            for k, r in enumerate(inst.mode(a, m).demands):
                if r:
                    for t in range(s, min(s + d, T + 1)):
                        rows[(k, t)][c] = float(r)
    for k, res in enumerate(inst.resources):
        for t in range(1, T + 1):
            ent = rows.get((k, t), {})
            if k in r_index:
                ent = dict(ent)
                ent[r_index[k]] = -1.0
                lp.add_row("<=", 0.0, ent, tag=("res", k, t))
            else:
                lp.add_row("<=", float(res.r_max), ent, tag=("res", k, t))


def disaggregated_row(by_act, edge: Edge, t: int) -> dict[int, float]:
    """Entries of the per-period precedence row for ``edge`` at period ``t``."""
    j, jj = edge
    ent = {}
    for c, m, s, d in by_act[j]:
        if s + d - 1 >= t:
            ent[c] = 1.0
    for c, m, s, d in by_act[jj]:
        if s <= t:
            ent[c] = ent.get(c, 0.0) + 1.0
    return ent


def _binding_periods(by_act, edge: Edge, T: int, dense: bool) -> range:
    if dense:
        return range(1, T + 1)
    j, jj = edge
    lo = min(s for _, _, s, _ in by_act[jj])
    hi = max(s + d - 1 for _, _, s, d in by_act[j])
    return range(max(1, lo), min(T, hi) + 1)


def build_pddt(
    inst: Instance, windows: TimeWindows | None = None, dense_rows: bool = True
) -> CompactModel:
    """PDDT model: assignment, per-period precedence and per-period resource rows.

    With ``dense_rows`` every ``(edge, t)`` precedence row for ``t = 1..T`` is
    emitted; otherwise only rows where both sums are nonempty (the others
    cannot bind).
    """
    w = windows or compute_time_windows(inst)
    lp = LpProblem(f"PDDT {inst.name}")
    x_index, by_act, r_index = _add_variables(inst, w, lp)
    _assignment_rows(lp, by_act)
    T = inst.horizon
    for e in inst.edges:
        for t in _binding_periods(by_act, e, T, dense_rows):
            lp.add_row("<=", 1.0, disaggregated_row(by_act, e, t), tag=("prec", e[0], e[1], t))
    _resource_rows(inst, lp, by_act, r_index)
    return CompactModel(inst, w, "PDDT", lp, x_index, r_index, by_act)


def aggregated_row(inst: Instance, by_act, edge: Edge) -> dict[int, float]:
    j, jj = edge
    ent = {}
    for c, m, s, d in by_act[j]:
        ent[c] = float(s + d)
    for c, m, s, d in by_act[jj]:
        ent[c] = ent.get(c, 0.0) - float(s)
    return ent


def build_pdt(inst: Instance, windows: TimeWindows | None = None) -> CompactModel:
    """PDT model: one aggregated row ``sum (t + d) x_j <= sum t x_j'`` per edge."""
    w = windows or compute_time_windows(inst)
    lp = LpProblem(f"PDT {inst.name}")
    x_index, by_act, r_index = _add_variables(inst, w, lp)
    _assignment_rows(lp, by_act)
    for e in inst.edges:
        lp.add_row("<=", 0.0, aggregated_row(inst, by_act, e), tag=("agg", e[0], e[1]))
    _resource_rows(inst, lp, by_act, r_index)
    return CompactModel(inst, w, "PDT", lp, x_index, r_index, by_act)


def build(inst: Instance, formulation: str, windows: TimeWindows | None = None, dense_rows: bool = True) -> CompactModel:
    if formulation.upper() == "PDDT":
        return build_pddt(inst, windows, dense_rows)
    if formulation.upper() == "PDT":
        return build_pdt(inst, windows)
    raise ValueError(f"unknown formulation {formulation!r}")


# ---------------------------------------------------------------- cut separation


@dataclass(frozen=True)
class CutRow:
    edge: Edge
    t: int
    entries: dict
    violation: float

    @property
    def tag(self):
        return ("prec", self.edge[0], self.edge[1], self.t)


def separate_precedence_cuts(
    model: CompactModel, sol: LpSolution, max_cuts: int = MAX_CUTS_PER_ROUND, eps: float = EPS_CUT
) -> list[CutRow]:
    """Per-period precedence rows violated by more than ``eps``, most violated first.

    Rows already in the model are skipped.
    """
    x = sol.x
    T = model.inst.horizon
    found = []
    for e in model.inst.edges:
        j, jj = e
        # a[t]: mass of j still running at t or later; b[t]: mass of j' started by t
        a = np.zeros(T + 2)
        for c, m, s, d in model.by_act[j]:
            last = min(s + d - 1, T)
            if last >= 1:
                a[last] += x[c]
        a = np.cumsum(a[::-1])[::-1]
        b = np.zeros(T + 2)
        for c, m, s, d in model.by_act[jj]:
            b[s] += x[c]
        b = np.cumsum(b)
        lhs = a[1 : T + 1] + b[1 : T + 1]
        for t in np.nonzero(lhs > 1.0 + eps)[0] + 1:
            t = int(t)
            if model.lp.has_row(("prec", j, jj, t)):
                continue
            found.append((float(lhs[t - 1] - 1.0), e, t))
    found.sort(key=lambda f: (-f[0], f[1], f[2]))
    return [CutRow(e, t, disaggregated_row(model.by_act, e, t), v) for v, e, t in found[:max_cuts]]


@dataclass
class CutLoopResult:
    bound: float
    lp_bound: float
    cuts_added: int
    rounds: int
    trace: list[float]
    status: str
    solution: LpSolution | None = None


def solve_with_cuts(
    inst: Instance,
    formulation: str = "PDT",
    rounds: int | None = None,
    max_cuts_per_round: int = MAX_CUTS_PER_ROUND,
    windows: TimeWindows | None = None,
    engine: str = "highs",
    model: CompactModel | None = None,
) -> CutLoopResult:
    """LP relaxation strengthened by per-period precedence separation.

    ``rounds=None`` separates until no violated row remains.
    """
    model = model or build(inst, formulation, windows, dense_rows=False)
    sess = LpSession(model.lp, engine)
    sol = sess.solve()
    if sol.status != OPTIMAL:
        return CutLoopResult(float("nan"), float("nan"), 0, 0, [], sol.status, sol)
    lp_bound = sol.objective
    trace = [sol.objective]
    added = 0
    r = 0
    while rounds is None or r < rounds:
        cuts = separate_precedence_cuts(model, sol, max_cuts_per_round)
        if not cuts:
            break
        for cut in cuts:
            model.lp.add_row("<=", 1.0, cut.entries, tag=cut.tag)
        added += len(cuts)
        r += 1
        sol = sess.solve()
        if sol.status != OPTIMAL:
            return CutLoopResult(float("nan"), lp_bound, added, r, trace, sol.status, sol)
        trace.append(max(sol.objective, trace[-1]))
    return CutLoopResult(trace[-1], lp_bound, added, r, trace, OPTIMAL, sol)


# ---------------------------------------------------------------- node helpers


def lp_bound(model: CompactModel, engine: str = "highs") -> LpSolution:
    return LpSession(model.lp, engine).solve()


def fix_start_bounds(model: CompactModel, bounds: Mapping[Act, tuple[int, int]]) -> None:
    """Set ``x[a, m, t]`` to zero for starts outside ``bounds[a] = (lo, hi)``."""
    for a, (lo, hi) in bounds.items():
        for c, m, s, d in model.by_act[a]:
            if s < lo or s > hi:
                model.lp.ub[c] = 0.0


def add_usage_row(model: CompactModel, k: int, t: int, sense: str, rhs: int) -> int:
    """Bound the usage of resource ``k`` in period ``t`` (the compact face of a usage branch)."""
    ent = {}
    for a, cols in model.by_act.items():
        for c, m, s, d in cols:
            r = model.inst.mode(a, m).demands[k]
            if r and s <= t <= s + d - 1:
                ent[c] = float(r)
    return model.lp.add_row(sense, float(rhs), ent, tag=("usage", k, t, sense))


def schedule_point(model: CompactModel, schedule: Mapping[Act, tuple[int, int]]) -> np.ndarray | None:
    """Column vector of a schedule ``{act: (mode, start)}``; ``None`` if a start lies outside the windows."""
    x = np.zeros(model.lp.n_cols)
    for a, ms in schedule.items():
        c = model.x_index.get((a, *ms))
        if c is None:
            return None
        x[c] = 1.0
    if model.r_index:
        peak = [0] * model.inst.n_resources
        usage: dict[tuple[int, int], int] = defaultdict(int)
        for a, (m, s) in schedule.items():
            mode = model.inst.mode(a, m)
            for k, r in enumerate(mode.demands):
                for t in range(s, s + mode.duration):
                    usage[(k, t)] += r
                    peak[k] = max(peak[k], usage[(k, t)])
        for k, c in model.r_index.items():
            x[c] = max(peak[k], model.lp.lb[c])
    return x


def solve_integral(
    model: CompactModel,
    budget_nodes: int = 10_000,
    time_limit: float | None = None,
    start: Mapping[Act, tuple[int, int]] | None = None,
) -> MipSolution:
    """Integral solve of a compact model; ``start`` is an optional schedule seeding the incumbent."""
    initial = schedule_point(model, start) if start is not None else None
    return solve_mip(model.lp, model.integer_columns(), budget_nodes=budget_nodes, time_limit=time_limit, initial=initial)


def compact_bound(inst: Instance, formulation: str, horizon_completion: bool = True, engine: str = "highs") -> float:
    """LP bound of a compact formulation, ``nan`` when the windows are infeasible."""
    try:
        w = compute_time_windows(inst, horizon_completion)
    except InfeasibleHorizon:
        return float("nan")
    sol = lp_bound(build(inst, formulation, w, dense_rows=False), engine)
    return sol.objective if sol.status == OPTIMAL else float("nan")

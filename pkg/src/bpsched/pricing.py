"""Block pricing problems.

A pricing model is a time-indexed program over the activities of one block.
Its objective, plus the carried constant ``-pi_n``, equals the reduced cost of
the column the solution induces in the current restricted master.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyDomain, FlagMismatch, MipBudget, NonIntegralLpVertex
from .lp import OPTIMAL, LpProblem, LpSession
from .mip import EPS_INT, solve_mip
from .model import Act, Column, Instance, Partition, TimeWindows, schedule_to_column

EPS_RC = 1e-6
MIP_BUDGET = 10_000

UNCONSTRAINED = "unconstrained"
RESOURCE_CONSTRAINED = "resource_constrained"
DISAGGREGATED = "disaggregated"
AGGREGATED = "aggregated"

# branching decision kinds
START = "start"  # start-time bound
AGG_ALL = "agg_all"  # total usage of the block
AGG_T = "agg_t"  # usage summed over resources in one period
KT = "kt"  # usage of one resource in one period
XFIX = "x"  # single pulse variable fixed to 0 or 1
RESOURCE_KINDS = (AGG_ALL, AGG_T, KT)


@dataclass(frozen=True)
class BranchDecision:
    """One branching constraint on block ``block``.

    ``target`` is an activity key for START, ``(k, t)`` for KT, ``t`` for AGG_T,
    ``()`` for AGG_ALL and ``(act, m, t)`` for XFIX. Down branches impose
    ``value <= bound``, up branches ``value >= bound``; for XFIX the bound is
    the fixed value.
    """

    kind: str
    block: int
    target: object
    direction: str
    bound: int

    def describe(self) -> str:
        op = "<=" if self.direction == "down" else ">="
        if self.kind == XFIX:
            return f"x{self.target}={self.bound}"
        return f"{self.kind}[{self.block}]{self.target}{op}{self.bound}"


def column_value(col: Column, d: BranchDecision, inst: Instance) -> int:
    """Value of the branched quantity for a column of the decision's block."""
    if d.kind == START:
        return col.start(d.target)
    if d.kind == KT:
        return col.usage_at(*d.target)
    if d.kind == AGG_T:
        return sum(v for (k, t), v in col.usage.items() if t == d.target)
    if d.kind == AGG_ALL:
        return sum(col.usage.values())
    if d.kind == XFIX:
        a, m, t = d.target
        return int(col.mode(a) == m and col.start(a) == t)
    raise ValueError(d.kind)


def violates(col: Column, d: BranchDecision, inst: Instance) -> bool:
    if col.block != d.block:
        return False
    v = column_value(col, d, inst)
    if d.kind == XFIX:
        return v != d.bound
    return v > d.bound if d.direction == "down" else v < d.bound


@dataclass
class DualPrices:
    convexity: dict[int, float]
    precedence: dict[tuple, float] = field(default_factory=dict)
    resource: dict[tuple[int, int], float] = field(default_factory=dict)
    peak: dict[int, float] = field(default_factory=dict)

    def shape(self):
        return (
            tuple(sorted(self.convexity)),
            tuple(sorted(self.precedence)),
            tuple(sorted(self.resource)),
            tuple(sorted(self.peak)),
        )


class PricingModel:
    """Pricing program of one block.

    ``kind`` is ``unconstrained`` or ``resource_constrained`` (adds usage rows
    with peak variables ``P_k``); ``style`` selects disaggregated or aggregated
    internal precedence rows.
    """

    def __init__(
        self,
        inst: Instance,
        partition: Partition,
        n: int,
        windows: TimeWindows,
        kind: str = UNCONSTRAINED,
        style: str = DISAGGREGATED,
        decisions: Sequence[BranchDecision] = (),
        horizon_completion: bool = True,
    ):
        if kind not in (UNCONSTRAINED, RESOURCE_CONSTRAINED):
            raise FlagMismatch(f"unknown pricing kind {kind!r}")
        if style not in (DISAGGREGATED, AGGREGATED):
            raise FlagMismatch(f"unknown precedence style {style!r}")
        self.inst = inst
        self.partition = partition
        self.n = n
        self.block = partition.block(n)
        self.windows = windows
        self.kind = kind
        self.style = style
        self.horizon_completion = horizon_completion
        self.decisions = tuple(d for d in decisions if d.block == n)
        self.constant = 0.0
        self.lp = LpProblem(f"pricing {n}")
        self._build()
        self._session: LpSession | None = None

    # -- structure
    def _build(self):
        inst, lp = self.inst, self.lp
        T = inst.horizon
        start_lo: dict[Act, int] = {}
        start_hi: dict[Act, int] = {}
        fixed: dict[Act, tuple[int, int]] = {}
        banned: set[tuple[Act, int, int]] = set()
        for d in self.decisions:
            if d.kind == START:
                if d.direction == "down":
                    start_hi[d.target] = min(start_hi.get(d.target, T), d.bound)
                else:
                    start_lo[d.target] = max(start_lo.get(d.target, 1), d.bound)
            elif d.kind == XFIX:
                a, m, t = d.target
                if d.bound == 1:
                    fixed[a] = (m, t)
                else:
                    banned.add((a, m, t))
        self.x_info: list[tuple[Act, int, int, int]] = []
        self.by_act: dict[Act, list[int]] = {}
        for a in self.block.activities:
            cols = []
            lo, hi = start_lo.get(a, 1), start_hi.get(a, T)
            for m in self.windows.modes(a):
                dur = inst.mode(a, m).duration
                for t in self.windows.starts(a, m):
                    if t < lo or t > hi or (a, m, t) in banned:
                        continue
                    if a in fixed and fixed[a] != (m, t):
                        continue
                    c = lp.add_column(0.0, 0.0, 1.0)
                    self.x_info.append((a, m, t, dur))
                    cols.append(c)
            if not cols:
                raise EmptyDomain(f"activity {a}: every start excluded in block {self.n}")
            self.by_act[a] = cols
        nx = len(self.x_info)
        self.n_x = nx
        info = self.x_info
        self._s = np.array([x[2] for x in info], dtype=float)
        self._d = np.array([x[3] for x in info], dtype=float)
        self._raw = np.array([float(inst.cost(a, m, t)) for a, m, t, _ in info])
        self._dem = np.array([inst.mode(a, m).demands for a, m, _, _ in info], dtype=float).reshape(nx, inst.n_resources)
        acts = list(self.block.activities)
        self._act_idx = np.array([acts.index(x[0]) for x in info], dtype=np.int64)
        for a in acts:
            lp.add_row("=", 1.0, {c: 1.0 for c in self.by_act[a]}, tag=("assign", a))
        for e in self.block.edges:
            if self.style == DISAGGREGATED:
                self._add_disaggregated(e)
            else:
                j, jj = e
                ent = {c: float(self.x_info[c][2] + self.x_info[c][3]) for c in self.by_act[j]}
                for c in self.by_act[jj]:
                    ent[c] = ent.get(c, 0.0) - float(self.x_info[c][2])
                lp.add_row("<=", 0.0, ent, tag=("agg", j, jj))
        self.peak_cols: dict[int, int] = {}
        if self.kind == RESOURCE_CONSTRAINED:
            for k, res in enumerate(inst.resources):
                cap = res.r_max
                if cap is None:
                    cap = sum(max(m.demands[k] for m in inst.activities[a].modes) for a in acts)
                self.peak_cols[k] = lp.add_column(0.0, 0.0, float(cap), tag=("P", k))
            for k in range(inst.n_resources):
                for t in range(1, T + 1):
                    ent = self.usage_entries(k, t)
                    if ent:
                        ent[self.peak_cols[k]] = -1.0
                        lp.add_row("<=", 0.0, ent, tag=("use", k, t))
        for d in self.decisions:
            if d.kind in RESOURCE_KINDS:
                if d.kind == KT:
                    ent = self.usage_entries(*d.target)
                elif d.kind == AGG_T:
                    ent = {}
                    for k in range(inst.n_resources):
                        for c, v in self.usage_entries(k, d.target).items():
                            ent[c] = ent.get(c, 0.0) + v
                else:
                    ent = {c: float(self._dem[c].sum() * self._d[c]) for c in range(nx) if self._dem[c].sum() * self._d[c]}
                sense = "<=" if d.direction == "down" else ">="
                lp.add_row(sense, float(d.bound), ent, tag=("branch", d.kind, d.target, d.direction, d.bound))
        self.integer_columns = list(range(nx)) + list(self.peak_cols.values())

    def _add_disaggregated(self, e):
        j, jj = e
        T = self.inst.horizon
        pred = [(c, self.x_info[c][2] + self.x_info[c][3] - 1) for c in self.by_act[j]]
        succ = [(c, self.x_info[c][2]) for c in self.by_act[jj]]
        if not pred or not succ:
            return
        lo = min(s for _, s in succ)
        hi = min(T, max(last for _, last in pred))
        for t in range(max(1, lo), hi + 1):
            ent = {c: 1.0 for c, last in pred if last >= t}
            for c, s in succ:
                if s <= t:
                    ent[c] = ent.get(c, 0.0) + 1.0
            self.lp.add_row("<=", 1.0, ent, tag=("prec", j, jj, t))

    def usage_entries(self, k: int, t: int) -> dict[int, float]:
        ent = {}
        for c, (a, m, s, d) in enumerate(self.x_info):
            r = self._dem[c, k]
            if r and s <= t <= s + d - 1:
                ent[c] = float(r)
        return ent

    @property
    def has_resource_rows(self) -> bool:
        return self.kind == RESOURCE_CONSTRAINED or any(d.kind in RESOURCE_KINDS for d in self.decisions)

    @property
    def single_mode(self) -> bool:
        return all(len(self.windows.modes(a)) <= 1 and len(self.inst.activities[a].modes) == 1 for a in self.block.activities)

    # -- objective
    def set_duals(self, duals: DualPrices, cross_edges: Iterable[tuple] = ()) -> None:
        """Load reduced-cost coefficients for ``duals``."""
        inst = self.inst
        T = inst.horizon
        cost = self._raw.copy()
        if duals.resource:
            K = inst.n_resources
            cum = np.zeros((K, T + 2))
            for (k, t), v in duals.resource.items():
                if 1 <= t <= T:
                    cum[k, t] = v
            cum = np.cumsum(cum, axis=1)
            last = np.minimum(self._s + self._d - 1, T).astype(np.int64)
            first = (self._s - 1).astype(np.int64)
            occ = np.where((self._d > 0)[:, None], (cum[:, last] - cum[:, first]).T, 0.0)  # nx x K
            cost -= (self._dem * occ).sum(axis=1)
        if duals.precedence:
            acts = list(self.block.activities)
            alpha = np.zeros(len(acts))
            beta = np.zeros(len(acts))
            pos = {a: i for i, a in enumerate(acts)}
            for (j, jj), v in duals.precedence.items():
                if j in pos:
                    alpha[pos[j]] += v
                if jj in pos:
                    beta[pos[jj]] += v
            cost -= alpha[self._act_idx] * (self._s + self._d)
            cost += beta[self._act_idx] * self._s
        self.lp.cost[: self.n_x] = cost.tolist()
        for k, c in self.peak_cols.items():
            self.lp.cost[c] = -duals.peak.get(k, 0.0)
        self.constant = -duals.convexity.get(self.n, 0.0)

    def set_costs(self, coefficients: dict[tuple[Act, int, int], float], constant: float = 0.0) -> None:
        """Direct objective override, used by the oracles."""
        for c, (a, m, t, _) in enumerate(self.x_info):
            self.lp.cost[c] = float(coefficients.get((a, m, t), 0.0))
        self.constant = constant

    def x_cost(self) -> dict[tuple[Act, int, int], float]:
        return {(a, m, t): self.lp.cost[c] for c, (a, m, t, _) in enumerate(self.x_info)}

    # -- solutions
    def column_from_x(self, x) -> Column:
        assign = {}
        for a, cols in self.by_act.items():
            c = max(cols, key=lambda c: x[c])
            _, m, t, _ = self.x_info[c]
            assign[a] = (m, t)
        return schedule_to_column(self.inst, self.partition, self.n, assign, self.horizon_completion)

    def objective_of(self, col: Column) -> float:
        """Pricing objective plus constant for the integral point of ``col`` (peaks tight)."""
        lookup = {(a, m, t): i for i, (a, m, t, _) in enumerate(self.x_info)}
        total = self.constant
        for a, m, s in col.assignment:
            total += self.lp.cost[lookup[(a, m, s)]]
        for k, c in self.peak_cols.items():
            total += self.lp.cost[c] * col.peak[k]
        return total

    def session(self) -> LpSession:
        if self._session is None:
            self._session = LpSession(self.lp)
        return self._session


def build_pricing(
    inst: Instance,
    partition: Partition,
    n: int,
    duals: DualPrices | None,
    windows: TimeWindows,
    kind: str = UNCONSTRAINED,
    style: str = DISAGGREGATED,
    decisions: Sequence[BranchDecision] = (),
    horizon_completion: bool = True,
) -> PricingModel:
    model = PricingModel(inst, partition, n, windows, kind, style, decisions, horizon_completion)
    if duals is not None:
        model.set_duals(duals)
    return model


def inject_branching(model: PricingModel, decisions: Sequence[BranchDecision]) -> PricingModel:
    """New pricing model with ``decisions`` added; the objective is carried over."""
    new = PricingModel(
        model.inst,
        model.partition,
        model.n,
        model.windows,
        model.kind,
        model.style,
        tuple(model.decisions) + tuple(decisions),
        model.horizon_completion,
    )
    costs = model.x_cost()
    new.set_costs(costs, model.constant)
    for k, c in model.peak_cols.items():
        new.lp.cost[new.peak_cols[k]] = model.lp.cost[c]
    return new


def lp_mode_allowed(model: PricingModel) -> bool:
    return model.single_mode and model.kind == UNCONSTRAINED and model.style == DISAGGREGATED and not model.has_resource_rows


@dataclass
class PricingResult:
    columns: list[tuple[Column, float]]  # reduced cost < -eps, ascending
    best_value: float  # optimal pricing objective + constant
    exact: bool  # best_value is a proven minimum
    lp_value: float | None = None
    nodes: int = 0


def solve_pricing(
    model: PricingModel,
    mode: str = "auto",
    collect: str = "all_negative",
    eps_rc: float = EPS_RC,
    budget_nodes: int = MIP_BUDGET,
    strict_budget: bool = False,
) -> PricingResult:
    """Minimize the block reduced cost.

    ``mode="lp"`` solves the LP relaxation and insists on an integral vertex;
    it is only accepted for single-mode unconstrained disaggregated models
    without resource branching rows. ``mode="mip"`` runs branch-and-bound and
    collects every improving incumbent. ``"auto"`` picks ``lp`` when allowed.
    """
    if mode == "auto":
        mode = "lp" if lp_mode_allowed(model) else "mip"
    if mode == "lp":
        if not lp_mode_allowed(model):
            raise FlagMismatch("LP pricing needs a single-mode unconstrained disaggregated model without resource rows")
        sol = model.session().solve()
        if sol.status != OPTIMAL:
            return PricingResult([], math.inf, True, None)
        xs = sol.x[: model.n_x]
        frac = np.abs(xs - np.round(xs))
        if frac.max(initial=0.0) > EPS_INT:
            raise NonIntegralLpVertex(f"pricing LP vertex has fractional value {frac.max():.3g}")
        col = model.column_from_x(sol.x)
        value = model.objective_of(col)
        cols = [(col, value)] if value < -eps_rc else []
        return PricingResult(cols, value, True, sol.objective + model.constant)
    if mode != "mip":
        raise ValueError(f"unknown pricing mode {mode!r}")
    res = solve_mip(model.lp, model.integer_columns, budget_nodes=budget_nodes)
    if res.status == "BudgetExhausted" and strict_budget:
        raise MipBudget(f"pricing block {model.n}: node budget {budget_nodes} exhausted")
    if res.objective is None:
        return PricingResult([], math.inf, res.status == "Infeasible", None, res.nodes)
    found: dict[tuple, tuple[Column, float]] = {}
    pool = res.incumbents if collect == "all_negative" else [(res.objective, res.x)]
    for _, x in pool:
        col = model.column_from_x(x)
        val = model.objective_of(col)
        if val < -eps_rc and col.key not in found:
            found[col.key] = (col, val)
    cols = sorted(found.values(), key=lambda cv: cv[1])
    if collect == "most_negative":
        cols = cols[:1]
    best = res.objective + model.constant
    return PricingResult(cols, best, res.status == OPTIMAL, None, res.nodes)

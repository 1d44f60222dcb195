"""Dantzig-Wolfe master problem and column generation.

Master rows, in tag form:

* ``("conv", n)``: one column per block, ``= 1``;
* ``("xprec", j, jj)``: cross-block precedence ``sum f_j lam - sum s_jj lam <= 0``;
* ``("res", k, t)``: per-period usage, ``sum r lam - R_k <= 0`` (``<= R_k`` when fixed);
* ``("peak", k)``: summed block peaks ``sum rbar lam - R_k <= 0``.

Duals follow the ``d obj / d rhs`` convention, so ``<=`` rows carry
nonpositive prices in a minimization.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import FlagMismatch, HorizonViolated, InternalPrecedenceViolated, MasterInfeasible, ShapeMismatch
from .lp import EPS_DEG, EPS_FEAS, EPS_NUM, ITERATION_LIMIT, OPTIMAL, LpProblem, LpSession, LpSolution
from .model import Column, Instance, Partition, TimeWindows, compute_time_windows, schedule_to_column, serial_schedule
from .pricing import (
    AGGREGATED,
    DISAGGREGATED,
    EPS_RC,
    MIP_BUDGET,
    RESOURCE_CONSTRAINED,
    UNCONSTRAINED,
    BranchDecision,
    DualPrices,
    PricingModel,
    solve_pricing,
    violates,
)

ITERATION_LIMIT_DEFAULT = 50_000


@dataclass(frozen=True)
class MasterFlags:
    """Simplifications of the master.

    ``fixed_capacity`` drops the peak rows and the ``R_k`` columns;
    ``dedicated`` drops the per-period resource rows and keeps the peak rows
    (needs a by-resource partition). ``pricing`` is the pricing kind the
    master is built for; peak rows only make sense with resource-constrained
    pricing.
    """

    fixed_capacity: bool | None = None  # None: infer from the instance
    dedicated: bool = False
    pricing: str = UNCONSTRAINED


def resolve_flags(inst: Instance, partition: Partition, flags: MasterFlags) -> MasterFlags:
    all_fixed = all(r.fixed for r in inst.resources)
    fixed = all_fixed if flags.fixed_capacity is None else flags.fixed_capacity
    if fixed and not all_fixed:
        raise FlagMismatch("fixed-capacity master needs R_min = R_max for every resource")
    if flags.dedicated and partition.strategy != "by-resource":
        raise FlagMismatch("dedicated-resource master needs a by-resource partition")
    if flags.dedicated and flags.pricing != RESOURCE_CONSTRAINED:
        raise FlagMismatch("dedicated-resource master needs resource-constrained pricing")
    if flags.pricing == RESOURCE_CONSTRAINED and not flags.dedicated:
        raise FlagMismatch("resource-constrained pricing is only paired with the dedicated-resource master")
    return MasterFlags(fixed, flags.dedicated, flags.pricing)


class MasterModel:
    """Restricted master LP with the Column records behind its lambda columns."""

    def __init__(self, inst: Instance, partition: Partition, flags: MasterFlags, windows: TimeWindows):
        self.inst = inst
        self.partition = partition
        self.flags = flags
        self.windows = windows
        self.lp = LpProblem(f"master {inst.name}")
        self.columns: dict[int, Column] = {}  # lp column -> Column
        self.pool: dict[tuple, int] = {}  # Column.key -> lp column
        self.artificial: dict[int, int] = {}  # block -> lp column
        self.r_cols: dict[int, int] = {}
        self.conv_rows: dict[int, int] = {}
        self.prec_rows: dict[tuple, int] = {}
        self.res_rows: dict[tuple[int, int], int] = {}
        self.peak_rows: dict[int, int] = {}
        self.big_m = 0.0
        self.decisions: tuple[BranchDecision, ...] = ()

    # -- columns
    def column_entries(self, col: Column) -> dict[int, float]:
        ent = {self.conv_rows[col.block]: 1.0}
        block_of = self.partition.block_of
        for (j, jj), r in self.prec_rows.items():
            v = 0.0
            if block_of[j] == col.block:
                v += col.finish(j)
            if block_of[jj] == col.block:
                v -= col.start(jj)
            if v:
                ent[r] = float(v)
        if self.res_rows:
            for (k, t), u in col.usage.items():
                r = self.res_rows.get((k, t))
                if r is not None and u:
                    ent[r] = float(u)
        for k, r in self.peak_rows.items():
            if col.peak[k]:
                ent[r] = float(col.peak[k])
        return ent

    def add_column(self, col: Column) -> tuple[int, bool]:
        """Add ``col`` unless an equal column is pooled; returns ``(index, added)``."""
        if col.key in self.pool:
            return self.pool[col.key], False
        j = self.lp.add_column(float(col.cost), 0.0, 1.0, self.column_entries(col), tag=("lam",) + col.key)
        self.columns[j] = col
        self.pool[col.key] = j
        if any(violates(col, d, self.inst) for d in self.decisions):
            self.lp.ub[j] = 0.0
        return j, True

    def set_decisions(self, decisions: Sequence[BranchDecision]) -> None:
        """Deactivate (bound 0) the columns that violate ``decisions``."""
        self.decisions = tuple(decisions)
        for j, col in self.columns.items():
            bad = any(violates(col, d, self.inst) for d in self.decisions)
            self.lp.ub[j] = 0.0 if bad else 1.0

    def reduced_cost(self, col: Column, duals: np.ndarray) -> float:
        ent = self.column_entries(col)
        return float(col.cost) - sum(duals[i] * v for i, v in ent.items())

    # -- duals
    def dual_prices(self, sol: LpSolution) -> DualPrices:
        y = sol.duals
        return DualPrices(
            {n: float(y[r]) for n, r in self.conv_rows.items()},
            {e: float(y[r]) for e, r in self.prec_rows.items()},
            {kt: float(y[r]) for kt, r in self.res_rows.items()},
            {k: float(y[r]) for k, r in self.peak_rows.items()},
        )

    def dual_vector(self, d: DualPrices) -> np.ndarray:
        y = np.zeros(self.lp.n_rows)
        for n, r in self.conv_rows.items():
            y[r] = d.convexity[n]
        for e, r in self.prec_rows.items():
            y[r] = d.precedence[e]
        for kt, r in self.res_rows.items():
            y[r] = d.resource[kt]
        for k, r in self.peak_rows.items():
            y[r] = d.peak[k]
        return y

    def active_lambdas(self, x, eps: float = EPS_DEG) -> list[tuple[Column, float]]:
        return [(col, float(x[j])) for j, col in self.columns.items() if x[j] > eps]

    def artificial_mass(self, x) -> float:
        return float(sum(x[j] for j in self.artificial.values()))

    @property
    def row_families(self) -> dict[str, int]:
        return {
            "convexity": len(self.conv_rows),
            "precedence": len(self.prec_rows),
            "resource": len(self.res_rows),
            "peak": len(self.peak_rows),
        }


def build_master(
    inst: Instance,
    partition: Partition,
    flags: MasterFlags = MasterFlags(),
    windows: TimeWindows | None = None,
    horizon_completion: bool = True,
) -> MasterModel:
    flags = resolve_flags(inst, partition, flags)
    w = windows or compute_time_windows(inst, horizon_completion)
    mm = MasterModel(inst, partition, flags, w)
    lp = mm.lp
    for b in partition.blocks:
        mm.conv_rows[b.n] = lp.add_row("=", 1.0, {}, tag=("conv", b.n))
    for j, jj in partition.cross_edges:
        mm.prec_rows[(j, jj)] = lp.add_row("<=", 0.0, {}, tag=("xprec", j, jj))
    if not flags.fixed_capacity:
        for k, res in enumerate(inst.resources):
            hi = math.inf if res.r_max is None else float(res.r_max)
            mm.r_cols[k] = lp.add_column(float(res.unit_cost), float(res.r_min), hi, tag=("R", k))
    else:
        lp.offset += float(sum(r.unit_cost * r.r_max for r in inst.resources))
    T = inst.horizon
    if not flags.dedicated:
        for k, res in enumerate(inst.resources):
            for t in range(1, T + 1):
                if k in mm.r_cols:
                    mm.res_rows[(k, t)] = lp.add_row("<=", 0.0, {mm.r_cols[k]: -1.0}, tag=("res", k, t))
                else:
                    mm.res_rows[(k, t)] = lp.add_row("<=", float(res.r_max), {}, tag=("res", k, t))
    if flags.pricing == RESOURCE_CONSTRAINED:
        for k, res in enumerate(inst.resources):
            if k in mm.r_cols:
                mm.peak_rows[k] = lp.add_row("<=", 0.0, {mm.r_cols[k]: -1.0}, tag=("peak", k))
            else:
                mm.peak_rows[k] = lp.add_row("<=", float(res.r_max), {}, tag=("peak", k))
    return mm


def big_m(inst: Instance, windows: TimeWindows) -> float:
    total = Fraction(1)
    for a in inst.activities:
        total += max(abs(inst.cost(a, m, t)) for m in windows.modes(a) for t in windows.starts(a, m))
    for res in inst.resources:
        cap = res.r_max if res.r_max is not None else res.r_min
        total += abs(res.unit_cost) * cap
    return float(10 * total)


def initial_columns(mm: MasterModel) -> list[Column]:
    """Seed one heuristic column per block and a Big-M artificial per convexity row.

    The heuristic column is the block restriction of one serial
    schedule-generation pass; blocks whose restriction leaves the time windows
    get only the artificial.
    """
    inst, part, w = mm.inst, mm.partition, mm.windows
    mm.big_m = big_m(inst, w)
    for b in part.blocks:
        if b.n not in mm.artificial:
            mm.artificial[b.n] = mm.lp.add_column(mm.big_m, 0.0, 1.0, {mm.conv_rows[b.n]: 1.0}, tag=("art", b.n))
    sched = serial_schedule(inst)
    out = []
    for b in part.blocks:
        assign = {a: sched[a] for a in b.activities}
        if any(m not in w.modes(a) or s not in w.starts(a, m) for a, (m, s) in assign.items()):
            continue
        try:
            col = schedule_to_column(inst, part, b.n, assign, w.horizon_completion)
        except (HorizonViolated, InternalPrecedenceViolated):
            continue
        mm.add_column(col)
        out.append(col)
    return out


def smooth_duals(current: DualPrices, center: DualPrices, alpha: float) -> DualPrices:
    """Convex combination ``alpha * center + (1 - alpha) * current``."""
    if current.shape() != center.shape():
        raise ShapeMismatch("dual vectors have different row sets")
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")

    def mix(a, b):
        return {k: alpha * b[k] + (1.0 - alpha) * a[k] for k in a}

    return DualPrices(
        mix(current.convexity, center.convexity),
        mix(current.precedence, center.precedence),
        mix(current.resource, center.resource),
        mix(current.peak, center.peak),
    )


def lagrangian_bound(rmp_objective: float, block_minima: Sequence[float]) -> float:
    """``z_RMP + sum_n min(0, min reduced cost of block n)`` for RMP-optimal duals."""
    return rmp_objective + sum(min(0.0, v) for v in block_minima)


def lagrangian_value(mm: MasterModel, duals: DualPrices, block_minima: dict[int, float]) -> float:
    """Lagrangian function for arbitrary duals.

    ``pi b + sum_n min_omega rc_n(pi) + sum over R_k and artificial columns of
    min over bounds``; equals :func:`lagrangian_bound` at RMP-optimal duals.
    """
    y = mm.dual_vector(duals)
    val = float(np.dot(y, mm.lp.rhs)) + mm.lp.offset
    val += sum(block_minima.values())
    for j in list(mm.r_cols.values()) + list(mm.artificial.values()):
        d = mm.lp.cost[j] - sum(y[i] * v for i, v in mm.lp.column_entries(j).items())
        lo, hi = mm.lp.lb[j], mm.lp.ub[j]
        if d >= 0:
            val += d * lo
        elif math.isinf(hi):
            return -math.inf
        else:
            val += d * hi
    return val


# ---------------------------------------------------------------- column generation


@dataclass
class TraceRecord:
    iteration: int
    primal_bound: float
    dual_bound: float
    cols_added: int
    min_redcost: float
    degenerate_count: int
    rows: int = 0
    positive_lambdas: int = 0


@dataclass
class ColGenTrace:
    records: list[TraceRecord] = field(default_factory=list)

    FIELDS = ("iteration", "primal_bound", "dual_bound", "cols_added", "min_redcost", "degenerate_count")

    def append(self, rec: TraceRecord) -> None:
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def to_csv(self, path: str | Path | None = None) -> str:
        import io

        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.FIELDS)
        for r in self.records:
            wr.writerow(
                [r.iteration, repr(r.primal_bound), repr(r.dual_bound), r.cols_added, repr(r.min_redcost), r.degenerate_count]
            )
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def primal_monotone(self, eps: float = EPS_NUM) -> bool:
        p = [r.primal_bound for r in self.records]
        return all(b <= a + eps * max(1.0, abs(a)) for a, b in zip(p, p[1:]))

    def dual_monotone(self) -> bool:
        d = [r.dual_bound for r in self.records]
        return all(b >= a for a, b in zip(d, d[1:]))

    def longest_plateau(self, rel: float = 1e-4) -> int:
        """Longest run of consecutive iterations with relative primal improvement below ``rel``."""
        best = run = 0
        p = [r.primal_bound for r in self.records]
        for a, b in zip(p, p[1:]):
            if (a - b) / max(1.0, abs(a)) < rel:
                run += 1
                best = max(best, run)
            else:
                run = 0
        return best


@dataclass
class PricingOptions:
    kind: str = UNCONSTRAINED
    style: str | None = None  # None: disaggregated for single-mode, aggregated otherwise
    mode: str = "auto"
    collect: str = "all_negative"  # or "most_negative" (one column per iteration overall)
    budget_nodes: int = MIP_BUDGET
    stabilize_alpha: float = 0.0


@dataclass
class ColGenResult:
    status: str
    z_lmp: float
    dual_bound: float
    trace: ColGenTrace
    master: MasterModel
    solution: LpSolution | None
    iterations: int
    columns_added: int
    runtime: float = 0.0
    pricing_exact: bool = True

    @property
    def lambdas(self) -> list[tuple[Column, float]]:
        return self.master.active_lambdas(self.solution.x) if self.solution is not None else []


class ColumnGeneration:
    """Column generation over a master and per-block pricing models.

    Kept as an object so branch-and-price can re-run it at every node on the
    same column pool with different decisions.
    """

    def __init__(
        self,
        inst: Instance,
        partition: Partition,
        flags: MasterFlags = MasterFlags(),
        pricing: PricingOptions = PricingOptions(),
        windows: TimeWindows | None = None,
        horizon_completion: bool = True,
        engine: str = "highs",
    ):
        self.inst = inst
        self.partition = partition
        self.options = pricing
        self.horizon_completion = horizon_completion
        self.master = build_master(inst, partition, MasterFlags(flags.fixed_capacity, flags.dedicated, pricing.kind), windows, horizon_completion)
        self.windows = self.master.windows
        initial_columns(self.master)
        self.session = LpSession(self.master.lp, engine)
        self._pricers: dict[tuple[int, tuple], PricingModel] = {}

    def style_for(self, n: int) -> str:
        if self.options.style is not None:
            return self.options.style
        acts = self.partition.block(n).activities
        single = all(len(self.inst.activities[a].modes) == 1 for a in acts)
        return DISAGGREGATED if single else AGGREGATED

    def pricer(self, n: int, decisions: Sequence[BranchDecision]) -> PricingModel:
        mine = tuple(d for d in decisions if d.block == n)
        key = (n, mine)
        if key not in self._pricers:
            if len(self._pricers) > 64:
                self._pricers.clear()
            self._pricers[key] = PricingModel(
                self.inst, self.partition, n, self.windows, self.options.kind, self.style_for(n), mine, self.horizon_completion
            )
        return self._pricers[key]

    def run(
        self,
        decisions: Sequence[BranchDecision] = (),
        iteration_limit: int = ITERATION_LIMIT_DEFAULT,
        raise_infeasible: bool = True,
        cutoff: float | None = None,
    ) -> ColGenResult:
        """Solve the LMP (at a node when ``decisions`` are given).

        ``cutoff`` stops early once the Lagrangian bound reaches it.
        """
        t0 = time.monotonic()
        mm = self.master
        mm.set_decisions(decisions)
        opts = self.options
        pricers = [self.pricer(b.n, decisions) for b in self.partition.blocks]
        trace = ColGenTrace()
        best_dual = -math.inf
        center: DualPrices | None = None
        added_total = 0
        status = ITERATION_LIMIT
        sol = None
        exact = True
        it = 0
        while it < iteration_limit:
            it += 1
            sol = self.session.solve()
            if sol.status != OPTIMAL:
                status = sol.status
                break
            current = mm.dual_prices(sol)
            y = sol.duals
            use = current
            if opts.stabilize_alpha > 0 and center is not None:
                use = smooth_duals(current, center, opts.stabilize_alpha)
            minima, found, exact_it = self._price(pricers, use)
            if use is not current:
                # evaluate the smoothed point; on a mis-price fall back to the true duals
                lag = lagrangian_value(mm, use, minima) if exact_it else -math.inf
                improving = [(c, mm.reduced_cost(c, y)) for c, _ in found]
                improving = [(c, v) for c, v in improving if v < -EPS_RC]
                if not improving:
                    minima, found, exact_it = self._price(pricers, current)
                    use = current
                else:
                    found = improving
            if use is current:
                lag = lagrangian_bound(sol.objective, list(minima.values())) if exact_it else -math.inf
            exact = exact and exact_it
            if lag > best_dual:
                best_dual = lag
                center = use
            elif center is None:
                center = current
            min_rc = min(minima.values()) if minima else 0.0
            if use is not current:
                min_rc = min((v for _, v in found), default=0.0)
            if opts.collect == "most_negative" and found:
                found = [min(found, key=lambda cv: cv[1])]
            positive = int(sum(1 for j in mm.columns if sol.x[j] > EPS_DEG))
            n_added = 0
            for col, _ in found:
                _, new = mm.add_column(col)
                n_added += new
            added_total += n_added
            trace.append(
                TraceRecord(
                    it,
                    sol.objective,
                    best_dual,
                    n_added,
                    min_rc,
                    sol.degenerate_count,
                    mm.lp.n_rows,
                    positive,
                )
            )
            if n_added == 0:
                status = OPTIMAL
                break
            if cutoff is not None and best_dual >= cutoff - EPS_NUM * max(1.0, abs(cutoff)):
                status = "Cutoff"
                break
        z = sol.objective if sol is not None and sol.status == OPTIMAL else math.nan
        res = ColGenResult(status, z, best_dual, trace, mm, sol, it, added_total, time.monotonic() - t0, exact)
        if status == OPTIMAL and mm.artificial_mass(sol.x) > EPS_FEAS:
            res.status = "MasterInfeasible"
            if raise_infeasible:
                raise MasterInfeasible(f"artificial columns carry {mm.artificial_mass(sol.x):.3g} at termination")
        return res

    def _price(self, pricers: list[PricingModel], duals: DualPrices):
        opts = self.options
        minima: dict[int, float] = {}
        found: list[tuple[Column, float]] = []
        exact = True
        for pm in pricers:
            pm.set_duals(duals)
            res = solve_pricing(pm, opts.mode, "all_negative", budget_nodes=opts.budget_nodes)
            minima[pm.n] = res.best_value
            exact = exact and res.exact
            found.extend(res.columns)
        found.sort(key=lambda cv: cv[1])
        return minima, found, exact


def column_generation(
    inst: Instance,
    partition: Partition,
    flags: MasterFlags = MasterFlags(),
    pricing: PricingOptions = PricingOptions(),
    iteration_limit: int = ITERATION_LIMIT_DEFAULT,
    windows: TimeWindows | None = None,
    horizon_completion: bool = True,
    engine: str = "highs",
    raise_infeasible: bool = True,
) -> ColGenResult:
    cg = ColumnGeneration(inst, partition, flags, pricing, windows, horizon_completion, engine)
    return cg.run(iteration_limit=iteration_limit, raise_infeasible=raise_infeasible)

"""Branch-and-price on original variables.

Decisions never remove master columns; violating columns get upper bound 0
and the pricing models receive the matching bounds or rows.
"""
from __future__ import annotations

import csv
import heapq
import io
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .dw import ColumnGeneration, MasterFlags, PricingOptions
from .errors import EmptyDomain, FlagMismatch, NoFractionalTarget
from .lp import EPS_NUM, LpSolution
from .mip import EPS_INT
from .model import Act, Column, Instance, Partition, build_partition
from .pricing import AGG_ALL, AGG_T, KT, START, XFIX, BranchDecision

# extra decision families used when the main rules find no fractional target
START_SPLIT = "start_split"

RULE_ORDERS = {
    "hierarchical": (KT, START, START_SPLIT, XFIX),
    "start": (START, START_SPLIT, XFIX),
    "resource": (AGG_ALL, AGG_T, KT, START, START_SPLIT, XFIX),
}

__all__ = [
    "BranchDecision",
    "BnPNode",
    "BnPResult",
    "Fractionals",
    "RULE_ORDERS",
    "branch_and_price",
    "make_branches",
    "recover_fractionals",
]


@dataclass
class Fractionals:
    """Original-variable values implied by a master solution."""

    x: dict[tuple[Act, int, int], float]  # (act, mode, start) -> mass
    s: dict[Act, float]
    r: dict[tuple[int, int, int], float]  # (block, k, t) -> usage
    starts: dict[Act, dict[int, float]]  # act -> start -> mass
    block_of: dict[Act, int]
    multi_mode: bool

    @property
    def integral(self) -> bool:
        return all(abs(v - round(v)) <= EPS_INT for v in self.x.values())


def recover_fractionals(sol: LpSolution, columns: Sequence[tuple[int, Column]] | dict, inst: Instance) -> Fractionals:
    """Aggregate ``lambda`` values into ``x*``, ``s*`` and ``r*``.

    ``columns`` maps master column indices to Column records. ``s*`` is the
    convexity-weighted mean start regardless of the mode.
    """
    items = columns.items() if isinstance(columns, dict) else columns
    x: dict[tuple[Act, int, int], float] = defaultdict(float)
    s: dict[Act, float] = defaultdict(float)
    r: dict[tuple[int, int, int], float] = defaultdict(float)
    starts: dict[Act, dict[int, float]] = defaultdict(lambda: defaultdict(float))
    block_of = {}
    for j, col in items:
        lam = float(sol.x[j])
        if lam <= EPS_INT * 1e-3:
            continue
        for a, m, st in col.assignment:
            x[(a, m, st)] += lam
            s[a] += lam * st
            starts[a][st] += lam
            block_of[a] = col.block
        for (k, t), u in col.usage.items():
            r[(col.block, k, t)] += lam * u
    return Fractionals(dict(x), dict(s), dict(r), {a: dict(v) for a, v in starts.items()}, block_of, inst.max_modes > 1)


def _frac(v: float) -> float:
    return min(v - math.floor(v), math.ceil(v) - v)


def _pick(cands):
    """Most fractional candidate; ties go to the smallest key."""
    best = None
    for key, v in sorted(cands, key=lambda kv: kv[0]):
        f = _frac(v)
        if f > EPS_INT and (best is None or f > best[0] + 1e-12):
            best = (f, key, v)
    return best


def make_branches(fr: Fractionals, rule: str, policy: str = "most_fractional") -> tuple[BranchDecision, BranchDecision]:
    """Down and up decisions for ``rule``; raises NoFractionalTarget when none applies."""
    if policy != "most_fractional":
        raise ValueError(f"unknown policy {policy!r}")
    if rule in (AGG_ALL, AGG_T) and not fr.multi_mode:
        raise FlagMismatch(f"rule {rule} only applies to multi-mode instances")
    if rule == START:
        best = _pick(fr.s.items())
        if best:
            _, a, v = best
            n = fr.block_of[a]
            return (BranchDecision(START, n, a, "down", math.floor(v)), BranchDecision(START, n, a, "up", math.ceil(v)))
    elif rule == KT:
        best = _pick(fr.r.items())
        if best:
            _, (n, k, t), v = best
            return (BranchDecision(KT, n, (k, t), "down", math.floor(v)), BranchDecision(KT, n, (k, t), "up", math.ceil(v)))
    elif rule == AGG_T:
        agg: dict[tuple[int, int], float] = defaultdict(float)
        for (n, k, t), v in fr.r.items():
            agg[(n, t)] += v
        best = _pick(agg.items())
        if best:
            _, (n, t), v = best
            return (BranchDecision(AGG_T, n, t, "down", math.floor(v)), BranchDecision(AGG_T, n, t, "up", math.ceil(v)))
    elif rule == AGG_ALL:
        agg2: dict[int, float] = defaultdict(float)
        for (n, k, t), v in fr.r.items():
            agg2[n] += v
        best = _pick(agg2.items())
        if best:
            _, n, v = best
            return (BranchDecision(AGG_ALL, n, (), "down", math.floor(v)), BranchDecision(AGG_ALL, n, (), "up", math.ceil(v)))
    elif rule == START_SPLIT:
        # mean start integral but the columns disagree on the start
        for a in sorted(fr.starts):
            used = [t for t, w in fr.starts[a].items() if w > EPS_INT]
            if len(used) > 1:
                cut = math.floor(fr.s[a] + EPS_INT)
                if cut >= max(used):
                    cut = max(used) - 1
                n = fr.block_of[a]
                return (BranchDecision(START, n, a, "down", cut), BranchDecision(START, n, a, "up", cut + 1))
    elif rule == XFIX:
        best = _pick(fr.x.items())
        if best:
            _, (a, m, t), v = best
            n = fr.block_of[a]
            return (BranchDecision(XFIX, n, (a, m, t), "down", 0), BranchDecision(XFIX, n, (a, m, t), "up", 1))
    else:
        raise ValueError(f"unknown branching rule {rule!r}")
    raise NoFractionalTarget(f"no fractional target for rule {rule}")


@dataclass
class BnPNode:
    node_id: int
    parent: int | None
    decisions: tuple[BranchDecision, ...]
    bound: float
    status: str = "Open"  # Fractional | Integral | Infeasible | Pruned
    depth: int = 0

    @property
    def decision(self) -> str:
        return self.decisions[-1].describe() if self.decisions else ""


@dataclass
class BnPResult:
    status: str
    objective: float | None
    bound: float
    columns: list[Column]
    nodes: int
    tree: list[BnPNode] = field(default_factory=list)
    root_bound: float = math.nan

    @property
    def assignment(self) -> dict[Act, tuple[int, int]]:
        return {a: (m, s) for col in self.columns for a, m, s in col.assignment}

    @property
    def max_depth(self) -> int:
        return max((n.depth for n in self.tree), default=0)

    def tree_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["node_id", "parent", "decision", "bound", "status"])
        for n in self.tree:
            wr.writerow([n.node_id, "" if n.parent is None else n.parent, n.decision, repr(n.bound), n.status])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def _integral_costs(inst: Instance, cg: ColumnGeneration) -> bool:
    w = cg.windows
    for a in inst.activities:
        for m in w.modes(a):
            for t in w.starts(a, m):
                if inst.cost(a, m, t).denominator != 1:
                    return False
    return all(r.unit_cost.denominator == 1 for r in inst.resources)


def branch_and_price(
    inst: Instance,
    partition: Partition | None = None,
    flags: MasterFlags = MasterFlags(),
    rule_order: str | Sequence[str] = "hierarchical",
    budget_nodes: int = 10_000,
    pricing: PricingOptions = PricingOptions(),
    horizon_completion: bool = True,
    engine: str = "highs",
    iteration_limit: int = 50_000,
) -> BnPResult:
    """Best-bound branch-and-price.

    ``rule_order`` is a preset name from ``RULE_ORDERS`` or a sequence of
    decision kinds tried in order at every fractional node.
    """
    partition = partition or build_partition(inst)
    order = RULE_ORDERS[rule_order] if isinstance(rule_order, str) else tuple(rule_order)
    if not inst.max_modes > 1:
        order = tuple(r for r in order if r not in (AGG_ALL, AGG_T))
    cg = ColumnGeneration(inst, partition, flags, pricing, None, horizon_completion, engine)
    integral_costs = _integral_costs(inst, cg)
    incumbent = math.inf
    best_cols: list[Column] = []
    counter = itertools.count()
    tree: list[BnPNode] = []
    root = BnPNode(0, None, (), -math.inf)
    heap: list = [(-math.inf, next(counter), root)]
    ids = itertools.count(1)
    processed = 0
    root_bound = math.nan
    exhausted = False

    def prune_level(b: float) -> bool:
        if not math.isfinite(incumbent):
            return False
        if integral_costs:
            return math.ceil(b - 1e-6) >= incumbent - 1e-9
        return b >= incumbent - EPS_NUM * max(1.0, abs(incumbent))

    while heap:
        b, _, node = heapq.heappop(heap)
        if prune_level(b):
            node.status = "Pruned"
            tree.append(node)
            continue
        if processed >= budget_nodes:
            heapq.heappush(heap, (b, next(counter), node))
            exhausted = True
            break
        processed += 1
        tree.append(node)
        try:
            res = cg.run(node.decisions, iteration_limit=iteration_limit, raise_infeasible=False)
        except EmptyDomain:
            node.status = "Infeasible"
            continue
        if res.status == "MasterInfeasible" or res.solution is None or not res.solution.optimal:
            node.status = "Infeasible"
            continue
        if res.status == "Optimal":
            z = res.z_lmp
        else:
            z = res.dual_bound
        node.bound = max(node.bound, z)
        if node.node_id == 0:
            root_bound = node.bound
        if prune_level(node.bound):
            node.status = "Pruned"
            continue
        fr = recover_fractionals(res.solution, cg.master.columns, inst)
        if fr.integral and res.status == "Optimal":
            node.status = "Integral"
            z = float(round(res.z_lmp)) if integral_costs else res.z_lmp
            if z < incumbent:
                incumbent = z
                best_cols = [col for col, v in cg.master.active_lambdas(res.solution.x, 0.5)]
            continue
        node.status = "Fractional"
        pair = None
        for rule in order:
            try:
                pair = make_branches(fr, rule)
                break
            except NoFractionalTarget:
                continue
        if pair is None:
            # every x* integral but the master stopped early: nothing to branch on
            node.status = "Pruned"
            continue
        for d in pair:
            child = BnPNode(next(ids), node.node_id, node.decisions + (d,), node.bound, depth=node.depth + 1)
            heapq.heappush(heap, (child.bound, next(counter), child))
    open_bounds = [h[0] for h in heap if not prune_level(h[0])]
    if exhausted:
        bound = min(open_bounds + [incumbent])
        status = "BudgetExhausted" if not math.isfinite(incumbent) else "Feasible"
    else:
        bound = incumbent
        status = "Optimal" if math.isfinite(incumbent) else "Infeasible"
    obj = incumbent if math.isfinite(incumbent) else None
    return BnPResult(status, obj, bound, best_cols, processed, tree, root_bound)

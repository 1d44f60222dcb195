"""LP-based branch-and-bound and exhaustive schedule enumeration."""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import TooLarge
from .lp import EPS_NUM, INFEASIBLE, OPTIMAL, UNBOUNDED, LpProblem, LpSession
from .model import Act, Edge, Instance, TimeWindows, compute_time_windows

EPS_INT = 1e-6
GAP_TOL = 1e-6


@dataclass
class MipSolution:
    status: str  # Optimal | Feasible | Infeasible | BudgetExhausted | Unbounded
    objective: float | None
    bound: float
    x: np.ndarray | None
    nodes: int
    incumbents: list[tuple[float, np.ndarray]] = field(default_factory=list)
    bound_trace: list[float] = field(default_factory=list)

    @property
    def gap(self) -> float:
        if self.objective is None:
            return math.inf
        return max(0.0, (self.objective - self.bound) / max(1.0, abs(self.objective)))


def _most_fractional(x: np.ndarray, cols: np.ndarray) -> int | None:
    vals = x[cols]
    frac = np.abs(vals - np.round(vals))
    mask = frac > EPS_INT
    if not mask.any():
        return None
    score = np.where(mask, np.abs(vals - np.floor(vals) - 0.5), np.inf)
    return int(cols[int(np.argmin(score))])  # argmin returns the first, i.e. smallest index


def _is_feasible(p: LpProblem, x: np.ndarray, cols: np.ndarray, lb: np.ndarray, ub: np.ndarray, tol: float = 1e-7) -> bool:
    if x.shape != (p.n_cols,) or np.any(x < lb - tol) or np.any(x > ub + tol):
        return False
    if cols.size and np.any(np.abs(x[cols] - np.round(x[cols])) > EPS_INT):
        return False
    act = p.matrix() @ x if p.n_rows else np.zeros(0)
    for i, sense in enumerate(p.sense):
        r = p.rhs[i]
        if (sense == "<=" and act[i] > r + tol) or (sense == ">=" and act[i] < r - tol) or (sense == "=" and abs(act[i] - r) > tol):
            return False
    return True


def solve_mip(
    p: LpProblem,
    integer_columns: Iterable[int],
    budget_nodes: int = 10_000,
    gap_tol: float = GAP_TOL,
    engine: str = "highs",
    time_limit: float | None = None,
    cutoff: float | None = None,
    initial: np.ndarray | None = None,
) -> MipSolution:
    """Best-bound branch-and-bound with depth-first plunging.

    Branches on the most fractional integer column (ties: smallest index).
    ``cutoff`` discards solutions that are not strictly better than it; every
    improving incumbent is kept in ``incumbents`` in discovery order.
    Deterministic for a node budget; ``time_limit`` is advisory. ``initial``
    is an optional feasible point that seeds the incumbent; it is ignored when
    it violates a bound, a row or integrality.
    """
    q = p.copy()
    cols = np.asarray(sorted(set(integer_columns)), dtype=np.int64)
    lb0 = np.asarray(q.lb, dtype=float)
    ub0 = np.asarray(q.ub, dtype=float)
    # integer bounds can be rounded inward up front
    if cols.size:
        lb0[cols] = np.ceil(lb0[cols] - EPS_INT)
        ub0[cols] = np.floor(ub0[cols] + EPS_INT)
    sess = LpSession(q, engine)
    start = time.monotonic()
    inc_val = math.inf if cutoff is None else cutoff
    inc_x = None
    incumbents: list[tuple[float, np.ndarray]] = []
    if initial is not None and _is_feasible(q, np.asarray(initial, dtype=float), cols, lb0, ub0):
        val = float(np.dot(q.cost, initial) + q.offset)
        if val < inc_val - 1e-9:
            inc_val, inc_x = val, np.asarray(initial, dtype=float).copy()
            incumbents.append((val, inc_x))
    counter = itertools.count()
    heap: list = []
    nodes = 0
    bound_trace: list[float] = []
    root_bound = -math.inf

    def pruned(b: float) -> bool:
        return b >= inc_val - gap_tol * max(1.0, abs(inc_val)) if math.isfinite(inc_val) else False

    def solve_node(changes: Mapping[int, tuple[float, float]]):
        lb = lb0.copy()
        ub = ub0.copy()
        for j, (lo, hi) in changes.items():
            lb[j], ub[j] = lo, hi
        q.lb = lb.tolist()
        q.ub = ub.tolist()
        return sess.solve()

    dive = (-math.inf, {})
    status_unbounded = False
    exhausted = False
    while dive is not None or heap:
        if dive is not None:
            parent_bound, changes = dive
            dive = None
        else:
            parent_bound, _, changes = heapq.heappop(heap)
        if pruned(parent_bound):
            continue
        if nodes >= budget_nodes or (time_limit is not None and time.monotonic() - start > time_limit):
            heapq.heappush(heap, (parent_bound, -next(counter), changes))
            exhausted = True
            break
        nodes += 1
        sol = solve_node(changes)
        open_min = min([parent_bound] + [h[0] for h in heap[:1]])
        bound_trace.append(min(open_min, inc_val))
        if sol.status == UNBOUNDED:
            status_unbounded = True
            break
        if sol.status != OPTIMAL:
            continue
        b = max(sol.objective, parent_bound)
        if nodes == 1:
            root_bound = b
        if pruned(b):
            continue
        j = _most_fractional(sol.x, cols)
        if j is None:
            x = sol.x.copy()
            if cols.size:
                x[cols] = np.round(x[cols])
            val = float(np.dot(q.cost, x) + q.offset)
            if val < inc_val - 1e-9:
                inc_val, inc_x = val, x
                incumbents.append((val, x))
            continue
        v = sol.x[j]
        lo, hi = changes.get(j, (lb0[j], ub0[j]))
        down = dict(changes)
        down[j] = (lo, math.floor(v))
        up = dict(changes)
        up[j] = (math.ceil(v), hi)
        # plunge into the up branch: fixing a start variable to one reaches integral points fast
        first, second = up, down
        heapq.heappush(heap, (b, -next(counter), second))
        dive = (b, first)

    if status_unbounded:
        return MipSolution(UNBOUNDED, None, -math.inf, None, nodes, incumbents, bound_trace)
    open_bounds = [h[0] for h in heap if not pruned(h[0])]
    if dive is not None and not pruned(dive[0]):
        open_bounds.append(dive[0])
    if inc_x is None:
        if exhausted:
            bound = min(open_bounds) if open_bounds else root_bound
            return MipSolution("BudgetExhausted", None, bound, None, nodes, incumbents, bound_trace)
        return MipSolution(INFEASIBLE, None, math.inf, None, nodes, incumbents, bound_trace)
    bound = min(open_bounds + [inc_val]) if exhausted else inc_val
    if not exhausted:
        # the search closed; the bound is the incumbent up to gap_tol pruning
        bound = min([inc_val] + [h[0] for h in heap])
    status = OPTIMAL if not exhausted else "Feasible"
    sol = MipSolution(status, inc_val, min(bound, inc_val), inc_x, nodes, incumbents, bound_trace)
    if status == "Feasible" and sol.gap <= gap_tol:
        sol.status = OPTIMAL
    return sol


# ---------------------------------------------------------------- enumeration


@dataclass
class BruteForceResult:
    status: str  # Optimal | Infeasible
    objective: Fraction | float | None
    assignment: dict[Act, tuple[int, int]] | None
    explored: int = 0


def brute_force_min(
    inst: Instance,
    activities: Sequence[Act],
    edges: Iterable[Edge],
    cost: Callable[[Act, int, int], float],
    windows: TimeWindows,
    capacities: Sequence[int | None] | None = None,
    peak_weights: Sequence[float] | None = None,
    peak_floors: Sequence[int] | None = None,
    accept: Callable[[dict[Act, tuple[int, int]], dict[tuple[int, int], int]], bool] | None = None,
    limit: int = 10**7,
) -> tuple[float | None, dict[Act, tuple[int, int]] | None, int]:
    """Exhaustive minimum over (mode, start) tuples of ``activities``.

    Schedules respect ``edges`` (finish <= start), the windows, and
    ``capacities`` per resource when given. The objective is
    ``sum cost(a, m, s) + sum_k peak_weights[k] * max(peak_floors[k], peak_k)``. ``accept`` can veto
    complete schedules, given the assignment and the usage map. Pruning uses a
    valid lower bound, so the minimum is exact.
    """
    acts = [a for a in inst.topological_order() if a in set(activities)]
    preds = {a: [] for a in acts}
    for j, jj in edges:
        if j in preds and jj in preds:
            preds[jj].append(j)
    choices = {}
    size = 1
    for a in acts:
        ch = []
        for m in windows.modes(a):
            mode = inst.mode(a, m)
            for s in windows.starts(a, m):
                ch.append((cost(a, m, s), m, s, mode.duration, mode.demands))
        ch.sort(key=lambda c: c[0])
        choices[a] = ch
        size *= max(1, len(ch))
        if size > limit:
            raise TooLarge(f"enumeration space exceeds {limit}")
        if not ch:
            return None, None, 0
    K = inst.n_resources
    weights = list(peak_weights) if peak_weights is not None else [0.0] * K
    caps = list(capacities) if capacities is not None else [None] * K
    track = any(w for w in weights) or any(c is not None for c in caps) or accept is not None
    rest_min = [0.0] * (len(acts) + 1)
    for i in range(len(acts) - 1, -1, -1):
        rest_min[i] = rest_min[i + 1] + choices[acts[i]][0][0]
    can_prune = all(w >= 0 for w in weights)
    T = inst.horizon + max((a.modes[0].duration for a in inst.activities.values()), default=0) + 2
    load = [[0] * (T + max(m.duration for a in inst.activities.values() for m in a.modes) + 2) for _ in range(K)]
    best = [math.inf, None]
    assign: dict[Act, tuple[int, int]] = {}
    finish: dict[Act, int] = {}
    explored = [0]

    floors = list(peak_floors) if peak_floors is not None else [0] * K

    def peak_cost():
        return sum(w * max(f, max(row)) for w, f, row in zip(weights, floors, load) if w)

    def rec(i: int, acc: float):
        if i == len(acts):
            explored[0] += 1
            total = acc + (peak_cost() if track else 0.0)
            if total < best[0] - 1e-12:
                if accept is not None:
                    usage = {(k, t): v for k in range(K) for t, v in enumerate(load[k]) if v}
                    if not accept(dict(assign), usage):
                        return
                best[0] = total
                best[1] = dict(assign)
            return
        a = acts[i]
        ready = max((finish[p] for p in preds[a]), default=1)
        floor_here = acc + rest_min[i + 1] + (peak_cost() if track and can_prune else 0.0)
        for c, m, s, d, dem in choices[a]:
            if can_prune and floor_here + c >= best[0] - 1e-12:
                break  # choices are sorted by cost
            if s < ready:
                continue
            ok = True
            if track:
                for k in range(K):
                    r = dem[k]
                    if r and caps[k] is not None:
                        row = load[k]
                        cap = caps[k]
                        for t in range(s, s + d):
                            if row[t] + r > cap:
                                ok = False
                                break
                        if not ok:
                            break
            if not ok:
                continue
            if track:
                for k in range(K):
                    if dem[k]:
                        row = load[k]
                        for t in range(s, s + d):
                            row[t] += dem[k]
            assign[a] = (m, s)
            finish[a] = s + d
            rec(i + 1, acc + c)
            del assign[a]
            del finish[a]
            if track:
                for k in range(K):
                    if dem[k]:
                        row = load[k]
                        for t in range(s, s + d):
                            row[t] -= dem[k]

    rec(0, 0.0)
    if best[1] is None:
        return None, None, explored[0]
    return best[0], best[1], explored[0]


def brute_force_schedule(
    inst: Instance,
    limit: int = 10**7,
    horizon_completion: bool = True,
    windows: TimeWindows | None = None,
    accept=None,
) -> BruteForceResult:
    """Exact optimum of the full problem by enumeration.

    Capacities ``R_max`` are enforced; a resource with unit cost adds
    ``c_k * max(R_min, peak)``.
    """
    from .errors import InfeasibleHorizon

    try:
        w = windows or compute_time_windows(inst, horizon_completion)
    except InfeasibleHorizon:
        return BruteForceResult(INFEASIBLE, None, None, 0)
    caps = [r.r_max for r in inst.resources]
    weights = [float(r.unit_cost) for r in inst.resources]
    floors = [r.r_min for r in inst.resources]
    costf = {}

    def cost(a, m, t):
        key = (a, m, t)
        if key not in costf:
            costf[key] = float(inst.cost(a, m, t))
        return costf[key]

    val, best, n = brute_force_min(
        inst, list(inst.activities), inst.edges, cost, w, caps, weights if any(weights) else None, floors, accept, limit
    )
    if best is None:
        return BruteForceResult(INFEASIBLE, None, None, n)
    return BruteForceResult(OPTIMAL, exact_objective(inst, best), best, n)


def exact_objective(inst: Instance, assignment: Mapping[Act, tuple[int, int]]) -> Fraction:
    total = sum((inst.cost(a, m, s) for a, (m, s) in assignment.items()), Fraction(0))
    if any(r.unit_cost for r in inst.resources):
        peak = [0] * inst.n_resources
        usage: dict[tuple[int, int], int] = {}
        for a, (m, s) in assignment.items():
            mode = inst.mode(a, m)
            for k, r in enumerate(mode.demands):
                for t in range(s, s + mode.duration):
                    usage[(k, t)] = usage.get((k, t), 0) + r
        for (k, _), v in usage.items():
            peak[k] = max(peak[k], v)
        total += sum((r.unit_cost * max(r.r_min, peak[k]) for k, r in enumerate(inst.resources)), Fraction(0))
    return total

"""Problem data model: instances, partitions, time windows and schedule columns.

Periods are 1-based, ``1..T``. An activity started in period ``s`` with
duration ``d`` occupies periods ``s..s+d-1`` and finishes at ``f = s + d``,
the first period in which a successor may start.
"""
from __future__ import annotations

import graphlib
import heapq
from collections import defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

from .errors import (
    HorizonViolated,
    InfeasibleHorizon,
    InternalPrecedenceViolated,
    NotDedicated,
)

Act = tuple[int, int]
Edge = tuple[Act, Act]


@dataclass(frozen=True)
class Mode:
    duration: int
    demands: tuple[int, ...]


@dataclass(frozen=True)
class Activity:
    key: Act
    modes: tuple[Mode, ...]

    @property
    def min_duration(self) -> int:
        return min(m.duration for m in self.modes)


@dataclass(frozen=True)
class Project:
    id: int
    activities: tuple[Activity, ...]
    # pairs of activity keys, both inside this project
    edges: tuple[Edge, ...] = ()


@dataclass(frozen=True)
class Resource:
    name: str
    r_min: int
    r_max: int | None  # None = unbounded (resource investment style)
    unit_cost: Fraction = Fraction(0)

    @property
    def fixed(self) -> bool:
        return self.r_max is not None and self.r_min == self.r_max


@dataclass(frozen=True)
class ObjectiveSpec:
    """Start-cost generator ``c(act, mode, t)``.

    ``makespan``: cost ``t`` on the sink activity, 0 elsewhere.
    ``table``: explicit mapping ``(act, mode, t) -> cost``; missing entries cost 0.
    ``uniform``: every start costs ``value``.
    """

    kind: str = "makespan"
    sink: Act | None = None
    table: Mapping[tuple[Act, int, int], Fraction] = field(default_factory=dict, compare=False)
    value: Fraction = Fraction(0)

    def cost(self, act: Act, mode: int, t: int) -> Fraction:
        if self.kind == "makespan":
            return Fraction(t) if act == self.sink else Fraction(0)
        if self.kind == "table":
            return Fraction(self.table.get((act, mode, t), 0))
        if self.kind == "uniform":
            return Fraction(self.value)
        raise ValueError(f"unknown objective kind {self.kind!r}")


@dataclass(frozen=True)
class Instance:
    projects: tuple[Project, ...]
    resources: tuple[Resource, ...]
    horizon: int
    objective: ObjectiveSpec = ObjectiveSpec()
    name: str = ""

    @cached_property
    def activities(self) -> dict[Act, Activity]:
        return {a.key: a for p in self.projects for a in p.activities}

    @cached_property
    def edges(self) -> tuple[Edge, ...]:
        return tuple(e for p in self.projects for e in p.edges)

    @cached_property
    def successors(self) -> dict[Act, list[Act]]:
        out: dict[Act, list[Act]] = {a: [] for a in self.activities}
        for j, jj in self.edges:
            out.setdefault(j, []).append(jj)
        return out

    @cached_property
    def predecessors(self) -> dict[Act, list[Act]]:
        out: dict[Act, list[Act]] = {a: [] for a in self.activities}
        for j, jj in self.edges:
            out.setdefault(jj, []).append(j)
        return out

    @property
    def n_resources(self) -> int:
        return len(self.resources)

    @property
    def max_modes(self) -> int:
        return max(len(a.modes) for a in self.activities.values())

    @property
    def single_mode(self) -> bool:
        return self.max_modes == 1

    def mode(self, act: Act, m: int) -> Mode:
        return self.activities[act].modes[m - 1]

    def cost(self, act: Act, m: int, t: int) -> Fraction:
        return self.objective.cost(act, m, t)

    def topological_order(self) -> list[Act]:
        ts = graphlib.TopologicalSorter({a: self.predecessors.get(a, []) for a in self.activities})
        order = list(ts.static_order())
        rank = {a: i for i, a in enumerate(self.activities)}
        # static_order is deterministic but not sorted; re-sort layer by layer
        depth: dict[Act, int] = {}
        for a in order:
            depth[a] = max((depth[p] + 1 for p in self.predecessors[a]), default=0)
        return sorted(order, key=lambda a: (depth[a], rank[a]))

    def with_horizon(self, horizon: int) -> "Instance":
        return replace(self, horizon=horizon)

    def with_objective(self, objective: ObjectiveSpec) -> "Instance":
        return replace(self, objective=objective)


# ---------------------------------------------------------------- validation


@dataclass
class ValidationReport:
    findings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def __contains__(self, text: str) -> bool:
        return any(text in f for f in self.findings)


def validate_instance(inst: Instance) -> ValidationReport:
    report = ValidationReport()
    add = report.findings.append
    keys = [a.key for p in inst.projects for a in p.activities]
    if len(keys) != len(set(keys)):
        add("duplicate activity keys")
    if inst.horizon < 1:
        add(f"horizon {inst.horizon} < 1")
    for r in inst.resources:
        if r.r_min < 0 or (r.r_max is not None and r.r_max < r.r_min):
            add(f"resource {r.name}: capacity bounds [{r.r_min}, {r.r_max}] invalid")
    for act in inst.activities.values():
        if not act.modes:
            add(f"activity {act.key}: empty mode set")
        for m, mode in enumerate(act.modes, 1):
            if mode.duration < 0:
                add(f"activity {act.key} mode {m}: negative duration")
            if len(mode.demands) != inst.n_resources:
                add(f"activity {act.key} mode {m}: demand references undeclared resources")
            if any(r < 0 for r in mode.demands):
                add(f"activity {act.key} mode {m}: negative demand")
    for p in inst.projects:
        own = {a.key for a in p.activities}
        for j, jj in p.edges:
            if j not in own or jj not in own:
                add(f"project {p.id}: edge {(j, jj)} references unknown activity")
    if report.findings:
        return report
    try:
        graphlib.TopologicalSorter({a: inst.predecessors[a] for a in inst.activities}).prepare()
    except graphlib.CycleError as exc:
        add(f"precedence cycle through {exc.args[1]}")
        return report
    cp = critical_path_length(inst)
    if inst.horizon < cp:
        add(f"horizon {inst.horizon} shorter than critical path {cp}")
    return report


def critical_path_length(inst: Instance) -> int:
    """Length of the longest path under shortest modes, in periods."""
    finish: dict[Act, int] = {}
    for a in inst.topological_order():
        start = max((finish[p] for p in inst.predecessors[a]), default=0)
        finish[a] = start + inst.activities[a].min_duration
    return max(finish.values(), default=0)


# ---------------------------------------------------------------- time windows


@dataclass(frozen=True)
class TimeWindows:
    horizon: int
    horizon_completion: bool
    est: Mapping[Act, int]
    # only (act, mode) pairs with a nonempty window are present
    lst: Mapping[tuple[Act, int], int]

    def starts(self, act: Act, m: int) -> range:
        last = self.lst.get((act, m))
        if last is None:
            return range(0)
        return range(self.est[act], last + 1)

    def modes(self, act: Act) -> list[int]:
        return sorted(m for (a, m) in self.lst if a == act)

    def restrict(self, bounds: Mapping[Act, tuple[int, int]]) -> "TimeWindows":
        """Intersect windows with per-activity ``(lo, hi)`` start bounds."""
        est = dict(self.est)
        lst = {}
        for (a, m), hi in self.lst.items():
            lo_b, hi_b = bounds.get(a, (1, self.horizon))
            lo = max(est[a], lo_b)
            hi = min(hi, hi_b)
            if lo <= hi:
                lst[(a, m)] = hi
        for a, (lo_b, _) in bounds.items():
            est[a] = max(est[a], lo_b)
        # drop pairs emptied by the raised est
        lst = {(a, m): hi for (a, m), hi in lst.items() if hi >= est[a]}
        return replace(self, est=est, lst=lst)


def compute_time_windows(inst: Instance, horizon_completion: bool = True) -> TimeWindows:
    """Forward/backward critical-path pass over the precedence graph.

    With ``horizon_completion`` every activity must finish by the end of period
    ``T``, so ``LST(act, m) <= T - d(act, m) + 1``.
    """
    T = inst.horizon
    order = inst.topological_order()
    est: dict[Act, int] = {}
    for a in order:
        est[a] = max(
            (est[p] + inst.activities[p].min_duration for p in inst.predecessors[a]),
            default=1,
        )
    lst: dict[tuple[Act, int], int] = {}
    latest_any: dict[Act, int] = {}
    for a in reversed(order):
        succ = inst.successors[a]
        if succ:
            lf = min(latest_any[s] for s in succ)
        else:
            lf = T + 1 if horizon_completion else T + 10**9
        best = None
        for m, mode in enumerate(inst.activities[a].modes, 1):
            last = min(T, lf - mode.duration)
            if last >= est[a]:
                lst[(a, m)] = last
                best = last if best is None else max(best, last)
        if best is None:
            raise InfeasibleHorizon(
                f"activity {a}: earliest start {est[a]} exceeds every latest start (T={T})"
            )
        latest_any[a] = best
    return TimeWindows(T, horizon_completion, est, lst)


# ---------------------------------------------------------------- partitions


@dataclass(frozen=True)
class Block:
    n: int
    activities: tuple[Act, ...]
    edges: tuple[Edge, ...]


@dataclass(frozen=True)
class Partition:
    blocks: tuple[Block, ...]
    cross_edges: tuple[Edge, ...]
    strategy: str

    @cached_property
    def block_of(self) -> dict[Act, int]:
        return {a: b.n for b in self.blocks for a in b.activities}

    def block(self, n: int) -> Block:
        return self.blocks[n - 1]

    @property
    def N(self) -> int:
        return len(self.blocks)


def dedicated_resource(inst: Instance) -> dict[Act, int] | None:
    """Map each activity to its single demanded resource, or None if not dedicated."""
    out = {}
    for a, act in inst.activities.items():
        used = {k for mode in act.modes for k, r in enumerate(mode.demands) if r > 0}
        if len(used) != 1:
            return None
        out[a] = used.pop()
    return out


def build_partition(
    inst: Instance, strategy: str = "single-block", groups: Iterable[Iterable[Act]] | None = None
) -> Partition:
    """Partition the activities into blocks.

    Strategies: ``single-block``, ``by-project``, ``by-resource`` (dedicated
    resources only) and ``custom`` (``groups`` gives the blocks).
    """
    if strategy == "single-block":
        groups_ = [list(inst.activities)]
    elif strategy == "by-project":
        groups_ = [[a.key for a in p.activities] for p in inst.projects]
    elif strategy == "by-resource":
        owner = dedicated_resource(inst)
        if owner is None:
            raise NotDedicated("by-resource partition needs every activity to use exactly one resource")
        by_k: dict[int, list[Act]] = defaultdict(list)
        for a in inst.activities:
            by_k[owner[a]].append(a)
        groups_ = [by_k[k] for k in sorted(by_k)]
    elif strategy == "custom":
        if groups is None:
            raise ValueError("custom partition needs groups")
        groups_ = [list(g) for g in groups]
        seen = [a for g in groups_ for a in g]
        if sorted(seen) != sorted(inst.activities) or len(seen) != len(set(seen)):
            raise ValueError("custom groups must partition the activity set")
    else:
        raise ValueError(f"unknown partition strategy {strategy!r}")
    owner_n = {a: n for n, g in enumerate(groups_, 1) for a in g}
    internal: dict[int, list[Edge]] = defaultdict(list)
    cross = []
    for e in inst.edges:
        nj, njj = owner_n[e[0]], owner_n[e[1]]
        if nj == njj:
            internal[nj].append(e)
        else:
            cross.append(e)
    blocks = tuple(
        Block(n, tuple(g), tuple(internal[n])) for n, g in enumerate(groups_, 1)
    )
    return Partition(blocks, tuple(cross), strategy)


# ---------------------------------------------------------------- columns


@dataclass(frozen=True)
class Column:
    """A partial schedule for one block, i.e. the data behind one master variable."""

    block: int
    assignment: tuple[tuple[Act, int, int], ...]  # (act, mode, start), sorted by act
    finishes: tuple[int, ...]
    cost: Fraction
    usage: Mapping[tuple[int, int], int]  # (resource index, period) -> units, nonzero only
    peak: tuple[int, ...]

    @cached_property
    def _pos(self) -> dict[Act, int]:
        return {a: i for i, (a, _, _) in enumerate(self.assignment)}

    def start(self, act: Act) -> int:
        return self.assignment[self._pos[act]][2]

    def mode(self, act: Act) -> int:
        return self.assignment[self._pos[act]][1]

    def finish(self, act: Act) -> int:
        return self.finishes[self._pos[act]]

    @property
    def key(self) -> tuple:
        return (self.block, self.assignment)

    def usage_at(self, k: int, t: int) -> int:
        return self.usage.get((k, t), 0)


def schedule_to_column(
    inst: Instance,
    partition: Partition,
    n: int,
    assignment: Mapping[Act, tuple[int, int]],
    horizon_completion: bool = True,
) -> Column:
    """Turn a per-activity ``(mode, start)`` assignment of block ``n`` into a Column."""
    block = partition.block(n)
    if set(assignment) != set(block.activities):
        raise ValueError(f"assignment must cover exactly the activities of block {n}")
    T = inst.horizon
    rows = []
    finishes = []
    usage: dict[tuple[int, int], int] = defaultdict(int)
    cost = Fraction(0)
    for a in sorted(assignment):
        m, s = assignment[a]
        mode = inst.mode(a, m)
        f = s + mode.duration
        if s < 1 or s > T or (horizon_completion and f - 1 > T):
            raise HorizonViolated(f"activity {a} mode {m} start {s} does not fit horizon {T}")
        rows.append((a, m, s))
        finishes.append(f)
        cost += inst.cost(a, m, s)
        for k, r in enumerate(mode.demands):
            if r:
                for t in range(s, f):
                    usage[(k, t)] += r
    for j, jj in block.edges:
        fj = assignment[j][1] + inst.mode(j, assignment[j][0]).duration
        if fj > assignment[jj][1]:
            raise InternalPrecedenceViolated(f"edge {(j, jj)}: finish {fj} > start {assignment[jj][1]}")
    peak = [0] * inst.n_resources
    for (k, _), r in usage.items():
        peak[k] = max(peak[k], r)
    return Column(n, tuple(rows), tuple(finishes), cost, dict(usage), tuple(peak))


# ---------------------------------------------------------------- heuristics


def earliest_schedule(inst: Instance, windows: TimeWindows) -> dict[Act, tuple[int, int]]:
    """Precedence-feasible earliest-start schedule using each activity's shortest feasible mode."""
    out: dict[Act, tuple[int, int]] = {}
    for a in inst.topological_order():
        ready = max((out[p][1] + inst.mode(p, out[p][0]).duration for p in inst.predecessors[a]), default=1)
        best = None
        for m in windows.modes(a):
            d = inst.mode(a, m).duration
            s = max(ready, windows.est[a])
            if s <= windows.lst[(a, m)] and (best is None or d < best[0]):
                best = (d, m, s)
        if best is None:
            raise InfeasibleHorizon(f"activity {a} cannot start by its latest start")
        out[a] = (best[1], best[2])
    return out


def serial_schedule(inst: Instance, capacities: Iterable[int] | None = None) -> dict[Act, tuple[int, int]]:
    """Serial schedule-generation scheme with latest-finish priority.

    Respects precedence and the given capacities (default ``R_max``; an
    unbounded resource is ignored). Uses each activity's shortest mode and is
    not limited by the horizon, so the result may finish after ``T``.
    """
    caps = list(capacities) if capacities is not None else [r.r_max for r in inst.resources]
    tail: dict[Act, int] = {}
    for a in reversed(inst.topological_order()):
        tail[a] = inst.activities[a].min_duration + max((tail[s] for s in inst.successors[a]), default=0)
    modes = {
        a: min(range(1, len(act.modes) + 1), key=lambda m, act=act: (act.modes[m - 1].duration, m))
        for a, act in inst.activities.items()
    }
    load: dict[tuple[int, int], int] = defaultdict(int)
    out: dict[Act, tuple[int, int]] = {}
    n_pred = {a: len(inst.predecessors[a]) for a in inst.activities}
    rank = {a: i for i, a in enumerate(inst.activities)}
    eligible = [(-tail[a], rank[a], a) for a in inst.activities if n_pred[a] == 0]
    heapq.heapify(eligible)
    while eligible:
        _, _, a = heapq.heappop(eligible)
        mode = inst.mode(a, modes[a])
        s = max((out[p][1] + inst.mode(p, out[p][0]).duration for p in inst.predecessors[a]), default=1)
        while True:
            ok = all(
                caps[k] is None or load[(k, t)] + r <= caps[k]
                for k, r in enumerate(mode.demands)
                if r
                for t in range(s, s + mode.duration)
            )
            if ok:
                break
            s += 1
        for k, r in enumerate(mode.demands):
            if r:
                for t in range(s, s + mode.duration):
                    load[(k, t)] += r
        out[a] = (modes[a], s)
        for b in inst.successors[a]:
            n_pred[b] -= 1
            if n_pred[b] == 0:
                heapq.heappush(eligible, (-tail[b], rank[b], b))
    return out


def schedule_span(inst: Instance, schedule: Mapping[Act, tuple[int, int]]) -> int:
    """Last period the schedule uses, counting the start period of zero-duration activities."""
    return max((s + max(inst.mode(a, m).duration, 1) - 1 for a, (m, s) in schedule.items()), default=0)

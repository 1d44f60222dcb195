"""Verification fixtures and exact oracles.

Everything here is checked by enumeration: brute-force schedules, exhaustive
multiple-choice knapsack search and small witness searches.
"""
from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .compact import add_usage_row, build_pddt, lp_bound
from .dw import ColumnGeneration, MasterFlags, PricingOptions
from .errors import InfeasibleHorizon, ShapeMismatch
from .generate import toy_instance
from .lp import EPS_NUM, OPTIMAL
from .mip import EPS_INT, brute_force_min
from .model import (
    Activity,
    Instance,
    Mode,
    ObjectiveSpec,
    Project,
    TimeWindows,
    build_partition,
    compute_time_windows,
)
from .pricing import DISAGGREGATED, KT, RESOURCE_CONSTRAINED, UNCONSTRAINED, BranchDecision, DualPrices, PricingModel, solve_pricing

GAP_EXAMPLE_DURATIONS = {1: (1, 2), 2: (1, 5), 3: (1, 3), 4: (1, 2), 5: (1, 2)}
GAP_EXAMPLE_EDGES = ((1, 2), (1, 3), (2, 5), (3, 4), (4, 5))
GAP_EXAMPLE_HORIZON = 8
# the half-integral point printed with the counterexample, as (j, m, t)
GAP_EXAMPLE_LISTED = ((1, 1, 1), (1, 2, 1), (2, 1, 3), (2, 2, 2), (3, 2, 2), (4, 1, 5), (4, 1, 6), (5, 1, 7), (5, 2, 6))
# first seeds returned by search_fractional_witness over range(3000) and range(1000)
MODE_GAP_WITNESS_SEED = 659
USAGE_BRANCH_WITNESS_SEED = 21


def gap_example_cost(j: int, m: int, t: int) -> int:
    if m == 1:
        return 1
    if j == 4 and m == 2 and t in (3, 4):
        return 1
    return 0


def build_gap_example(durations: dict[int, tuple[int, int]] | None = None) -> Instance:
    """Five activities, two modes, no resources, eight periods."""
    durations = durations or GAP_EXAMPLE_DURATIONS
    acts = tuple(Activity((1, j), tuple(Mode(d, ()) for d in durations[j])) for j in sorted(durations))
    edges = tuple(((1, a), (1, b)) for a, b in GAP_EXAMPLE_EDGES)
    T = GAP_EXAMPLE_HORIZON
    table = {((1, j), m, t): Fraction(gap_example_cost(j, m, t)) for j in durations for m in (1, 2) for t in range(1, T + 1)}
    return Instance((Project(1, acts, edges),), (), T, ObjectiveSpec("table", table=table), "gap-example")


# ---------------------------------------------------------------- integrality gaps


@dataclass
class GapReport:
    instance: str
    z_lp: float
    z_ip: float | None
    fractional: bool
    z_lmp: float | None = None
    horizon_completion: bool = True
    witness: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def chain_ok(self, eps: float = EPS_NUM) -> bool:
        vals = [v for v in (self.z_lp, self.z_lmp, self.z_ip) if v is not None]
        return all(a <= b + eps for a, b in zip(vals, vals[1:]))

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def pricing_model(
    inst: Instance,
    horizon_completion: bool = True,
    decisions: Sequence[BranchDecision] = (),
    kind: str = UNCONSTRAINED,
    style: str = DISAGGREGATED,
    duals: DualPrices | None = None,
) -> PricingModel:
    """Single-block pricing model of ``inst``; zero duals unless given."""
    part = build_partition(inst)
    w = compute_time_windows(inst, horizon_completion)
    pm = PricingModel(inst, part, 1, w, kind, style, decisions, horizon_completion)
    pm.set_duals(duals or DualPrices({1: 0.0}))
    return pm


def enumerate_pricing(pm: PricingModel, limit: int = 10**7):
    """Exact pricing optimum by enumeration of block schedules.

    Feasibility comes from the instance (precedence, windows, start bounds,
    capacities for resource-constrained models) and from re-evaluating the
    branching decisions on each complete schedule, not from the LP rows.
    """
    inst = pm.inst
    w = pm.windows
    costs = pm.x_cost()
    allowed = set(costs)

    def cost(a, m, t):
        return costs[(a, m, t)] if (a, m, t) in allowed else math.inf

    res_decisions = [d for d in pm.decisions if d.kind == KT]

    def accept(assign, usage):
        if any((a, m, s) not in allowed for a, (m, s) in assign.items()):
            return False
        for d in res_decisions:
            v = usage.get(d.target, 0)
            if (d.direction == "down" and v > d.bound) or (d.direction == "up" and v < d.bound):
                return False
        return True

    weights = None
    caps = None
    if pm.kind == RESOURCE_CONSTRAINED:
        weights = [pm.lp.cost[pm.peak_cols[k]] for k in range(inst.n_resources)]
        caps = [r.r_max for r in inst.resources]
    val, best, n = brute_force_min(
        inst, list(pm.block.activities), pm.block.edges, cost, w, caps, weights, None, accept, limit
    )
    if best is None:
        return None, None
    return val + pm.constant, best


def verify_integrality_gap(
    inst: Instance,
    builder: Callable[[Instance], PricingModel] | None = None,
    horizon_completion: bool = True,
    limit: int = 10**7,
) -> GapReport:
    """LP value of a pricing-style model against its enumerated integer optimum."""
    pm = builder(inst) if builder is not None else pricing_model(inst, horizon_completion)
    sol = pm.session().solve()
    z_lp = sol.objective + pm.constant if sol.status == OPTIMAL else math.inf
    z_ip, _ = enumerate_pricing(pm, limit)
    xs = sol.x[: pm.n_x] if sol.status == OPTIMAL else np.zeros(0)
    frac_vertex = bool(xs.size and np.max(np.abs(xs - np.round(xs))) > EPS_INT)
    fractional = frac_vertex or (z_ip is not None and z_lp < z_ip - EPS_NUM)
    witness = {}
    for c, v in enumerate(xs):
        if v > EPS_INT:
            a, m, t, _ = pm.x_info[c]
            witness[f"x[{a[1]},{m},{t}]"] = round(float(v), 9)
    return GapReport(inst.name, float(z_lp), None if z_ip is None else float(z_ip), fractional, None, horizon_completion, witness)


def evaluate_listed_solution(inst: Instance | None = None, horizon_completion: bool = True) -> dict:
    """Objective and row residuals of the printed half-integral point.

    Rows are the assignment and per-period precedence rows of the pricing
    model; a residual is reported for every violated row.
    """
    inst = inst or build_gap_example()
    pm = pricing_model(inst, horizon_completion)
    lookup = {(a[1], m, t): c for c, (a, m, t, _) in enumerate(pm.x_info)}
    x = np.zeros(pm.lp.n_cols)
    missing = []
    for key in GAP_EXAMPLE_LISTED:
        if key in lookup:
            x[lookup[key]] = 0.5
        else:
            missing.append(key)
    objective = sum(0.5 * gap_example_cost(*key) for key in GAP_EXAMPLE_LISTED)
    A = pm.lp.matrix()
    act = A.T @ x if A.shape[0] == pm.lp.n_cols else A @ x
    act = np.asarray(act).ravel()
    violated = []
    for i, (sense, rhs) in enumerate(zip(pm.lp.sense, pm.lp.rhs)):
        v = act[i]
        bad = (sense == "=" and abs(v - rhs) > 1e-9) or (sense == "<=" and v > rhs + 1e-9) or (sense == ">=" and v < rhs - 1e-9)
        if bad:
            violated.append({"row": repr(pm.lp.row_tags[i]), "activity": float(v), "sense": sense, "rhs": float(rhs)})
    return {"objective": objective, "violated_rows": violated, "outside_windows": missing}


# ---------------------------------------------------------------- multiple-choice knapsack


@dataclass
class MckpInstance:
    """Classes are activities; each picks one period. Only period ``t_prime`` weighs."""

    classes: list[list[tuple[int, float, int]]]  # per class: (period, profit, weight)
    capacity: int
    constant: float
    activities: list
    t_prime: int


def build_mckp_reduction(inst: Instance, k: int, t_prime: int, capacity: int, duals: DualPrices, n: int = 1) -> MckpInstance:
    """Knapsack form of single-mode, edge-free, unit-duration pricing with one usage row.

    Profit of choosing period ``t`` for activity ``j`` is
    ``pi_kt * r_j - c_jt`` (the negated pricing coefficient); the constant
    is ``pi_n``.
    """
    if not inst.single_mode or inst.edges or inst.n_resources != 1 or len(inst.projects) != 1:
        raise ShapeMismatch("reduction needs one project, one resource, single mode and no edges")
    if any(a.modes[0].duration != 1 for a in inst.activities.values()):
        raise ShapeMismatch("reduction needs unit durations")
    T = inst.horizon
    classes = []
    acts = sorted(inst.activities)
    for a in acts:
        r = inst.activities[a].modes[0].demands[k]
        items = []
        for t in range(1, T + 1):
            profit = duals.resource.get((k, t), 0.0) * r - float(inst.cost(a, 1, t))
            items.append((t, profit, r if t == t_prime else 0))
        classes.append(items)
    return MckpInstance(classes, capacity, duals.convexity.get(n, 0.0), acts, t_prime)


def solve_mckp(m: MckpInstance) -> tuple[float, tuple[int, ...]]:
    """Exhaustive maximum including the constant; returns (value, chosen periods)."""
    best = (-math.inf, ())
    for pick in itertools.product(*m.classes):
        if sum(w for _, _, w in pick) <= m.capacity:
            val = sum(p for _, p, _ in pick) + m.constant
            if val > best[0]:
                best = (val, tuple(t for t, _, _ in pick))
    return best


def mckp_fixture(seed: int, n_acts: int = 3, horizon: int = 3, capacity: int = 2, max_demand: int = 2):
    """Random reduction-shaped instance, duals and usage row."""
    rng = random.Random(seed)
    acts = tuple(Activity((1, j), (Mode(1, (rng.randint(1, max_demand),)),)) for j in range(1, n_acts + 1))
    table = {((1, j), 1, t): Fraction(rng.randint(0, 4)) for j in range(1, n_acts + 1) for t in range(1, horizon + 1)}
    from .model import Resource

    cap_r = sum(a.modes[0].demands[0] for a in acts)
    inst = Instance((Project(1, acts, ()),), (Resource("R1", cap_r, cap_r),), horizon, ObjectiveSpec("table", table=table), f"mckp{seed}")
    duals = DualPrices(
        {1: float(rng.randint(-3, 3))},
        {},
        {(0, t): -float(rng.randint(0, 6)) / 2 for t in range(1, horizon + 1)},
        {},
    )
    t_prime = rng.randint(1, horizon)
    return inst, duals, t_prime, capacity


def check_mckp_identity(inst: Instance, duals: DualPrices, t_prime: int, capacity: int) -> dict:
    """Compare the pricing optimum with the negated knapsack optimum."""
    pm = pricing_model(inst, True, (BranchDecision(KT, 1, (0, t_prime), "down", capacity),), duals=duals)
    pr = solve_pricing(pm, "mip")
    mk = build_mckp_reduction(inst, 0, t_prime, capacity, duals)
    val, pick = solve_mckp(mk)
    pi_n = duals.convexity.get(1, 0.0)
    # pricing value carries -pi_n; the knapsack value carries +pi_n
    return {
        "pricing": pr.best_value,
        "pricing_x_part": pr.best_value + pi_n,
        "mckp": val,
        "pi_n": pi_n,
        "identity_gap": abs((pr.best_value + pi_n) - (-val + pi_n)),
        "pick": pick,
    }


# ---------------------------------------------------------------- witness search


@dataclass
class Witness:
    mode: str
    seed: int
    instance: Instance
    z_lp: float
    z_ip: float
    decision: BranchDecision | None = None
    draw: int | None = None

    def describe(self) -> str:
        extra = f" row {self.decision.describe()}" if self.decision else ""
        return f"{self.mode} seed {self.seed}: z_lp={self.z_lp:.6g} z_ip={self.z_ip:.6g}{extra}"


def two_mode_instance(seed: int, draw: int = 0, max_acts: int = 6, max_horizon: int = 10) -> Instance | None:
    """Random two-mode network (no resources) with a signed cost table.

    The network depends on ``seed`` only; ``draw`` selects the cost table.
    """
    rng = random.Random(seed)
    na = rng.randint(min(4, max_acts), max_acts)
    T = rng.randint(min(6, max_horizon), max_horizon)
    acts = []
    for j in range(1, na + 1):
        d1 = rng.randint(1, 2)
        acts.append(Activity((1, j), (Mode(d1, ()), Mode(d1 + rng.randint(1, 4), ()))))
    edges = tuple(((1, a), (1, b)) for a in range(1, na + 1) for b in range(a + 1, na + 1) if rng.random() < 0.45)
    crng = random.Random(seed * 1000 + draw)
    table = {((1, j), m, t): Fraction(crng.randint(-5, 5)) for j in range(1, na + 1) for m in (1, 2) for t in range(1, T + 1)}
    return Instance((Project(1, tuple(acts), edges),), (), T, ObjectiveSpec("table", table=table), f"two-mode-{seed}-{draw}")


def _node_bounds(inst: Instance, d: BranchDecision):
    """Node LMP and node PDDT-LP under one per-period usage decision."""
    w = compute_time_windows(inst)
    model = build_pddt(inst, w, dense_rows=False)
    add_usage_row(model, d.target[0], d.target[1], "<=" if d.direction == "down" else ">=", d.bound)
    lp = lp_bound(model)
    if lp.status != OPTIMAL:
        return None, None
    cg = ColumnGeneration(inst, build_partition(inst), MasterFlags(), PricingOptions(mode="mip"), w)
    res = cg.run((d,), raise_infeasible=False)
    if res.status != OPTIMAL:
        return lp.objective, None
    return lp.objective, res.z_lmp


def search_fractional_witness(
    mode: str = "mode-gap",
    seeds: Sequence[int] = range(1000),
    max_acts: int = 6,
    max_horizon: int = 10,
    n_acts: int | None = None,
    cost_draws: int = 10,
) -> Witness | None:
    """First seed whose small instance shows a strict relaxation gap.

    ``mode-gap``: two-mode unconstrained pricing with disaggregated precedence
    and ``cost_draws`` signed cost tables per seed, ``z_lp < z_ip``.
    ``usage-branch``: single-mode instance, one usage decision taken at the
    most fractional ``(k, t)`` of the compact LP; the witness requires
    the node LMP to exceed the node compact LP (``z_lp`` holds the compact
    value, ``z_ip`` the LMP).
    """
    for seed in seeds:
        rng = random.Random(seed)
        na = n_acts or rng.randint(min(2, max_acts), max_acts)
        T = rng.randint(4, max_horizon)
        if mode == "mode-gap":
            for draw in range(cost_draws):
                inst = two_mode_instance(seed, draw, max_acts, max_horizon)
                if inst is None:
                    break
                try:
                    pm = pricing_model(inst)
                except InfeasibleHorizon:
                    break
                sol = pm.session().solve()
                xs = sol.x[: pm.n_x]
                if sol.status != OPTIMAL or np.max(np.abs(xs - np.round(xs))) <= EPS_INT:
                    continue
                z_ip, _ = enumerate_pricing(pm, 10**9)
                if z_ip is not None and sol.objective < z_ip - 1e-6:
                    return Witness(mode, seed, inst, sol.objective, z_ip, draw=draw)
        elif mode == "usage-branch":
            inst = toy_instance(seed, na, 1, T, 1, cost="random", edge_prob=0.3, max_demand=3)
            try:
                w = compute_time_windows(inst)
            except InfeasibleHorizon:
                continue
            model = build_pddt(inst, w, dense_rows=False)
            sol = lp_bound(model)
            if sol.status != OPTIMAL:
                continue
            best = None
            for t in range(1, T + 1):
                v = 0.0
                for a, cols in model.by_act.items():
                    for c, m, s, dur in cols:
                        r = inst.mode(a, m).demands[0]
                        if r and s <= t <= s + dur - 1:
                            v += r * sol.x[c]
                f = min(v - math.floor(v), math.ceil(v) - v)
                if f > 1e-6 and (best is None or f > best[0] + 1e-12):
                    best = (f, t, v)
            if best is None:
                continue
            _, t, v = best
            for d in (BranchDecision(KT, 1, (0, t), "down", math.floor(v)), BranchDecision(KT, 1, (0, t), "up", math.ceil(v))):
                z_lp, z_lmp = _node_bounds(inst, d)
                if z_lp is not None and z_lmp is not None and z_lmp > z_lp + 1e-6:
                    return Witness(mode, seed, inst, z_lp, z_lmp, d)
        else:
            raise ValueError(f"unknown witness mode {mode!r}")
    return None


# ---------------------------------------------------------------- node-level comparisons


def start_fixing_bounds(inst: Instance, fixings: dict, horizon_completion: bool = True) -> tuple[float, float]:
    """Node LMP and node PDDT-LP under start-time bounds ``{act: (lo, hi)}``.

    The master side receives the bounds as start-time branching decisions,
    the compact side as zero upper bounds on the excluded pulses.
    """
    from .compact import fix_start_bounds
    from .pricing import START

    w = compute_time_windows(inst, horizon_completion)
    model = build_pddt(inst, w, dense_rows=False)
    fix_start_bounds(model, fixings)
    lp = lp_bound(model)
    decisions = []
    for a, (lo, hi) in sorted(fixings.items()):
        decisions.append(BranchDecision("start", 1, a, "up", lo))
        decisions.append(BranchDecision("start", 1, a, "down", hi))
    cg = ColumnGeneration(inst, build_partition(inst), MasterFlags(), PricingOptions(), w, horizon_completion)
    res = cg.run(tuple(decisions), raise_infeasible=False)
    z_lp = lp.objective if lp.status == OPTIMAL else math.inf
    z_lmp = res.z_lmp if res.status == OPTIMAL else math.inf
    return z_lp, z_lmp


def random_start_fixings(inst: Instance, seed: int, count: int = 2, horizon_completion: bool = True) -> dict:
    """Random start-time intervals inside the windows for ``count`` activities."""
    rng = random.Random(seed)
    w = compute_time_windows(inst, horizon_completion)
    out = {}
    acts = sorted(inst.activities)
    for a in rng.sample(acts, min(count, len(acts))):
        lo = min(w.est[a], *(w.lst[(a, m)] for m in w.modes(a)))
        hi = max(w.lst[(a, m)] for m in w.modes(a))
        x = rng.randint(lo, hi)
        out[a] = (lo, x) if rng.random() < 0.5 else (x, hi)
    return out

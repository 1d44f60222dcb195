"""Synthetic PSPLIB-style instance generator and text writers.

Networks follow the usual ProGen recipe: a fixed number of start and finish
jobs, every job reachable from the source and reaching the sink, at most
three successors and predecessors per job, and extra non-redundant arcs until
the network complexity (arcs per node) is met. Capacities follow the resource
strength rule ``R = r_min + round(RS * (r_peak - r_min))``, where ``r_min`` is
the largest single demand and ``r_peak`` the peak of the earliest-start
schedule.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from pathlib import Path

J30_NC = (1.5, 1.8, 2.1)
J30_RF = (0.25, 0.5, 0.75, 1.0)
J30_RS = (0.2, 0.5, 0.7, 1.0)


@dataclass(frozen=True)
class GenConfig:
    n_jobs: int = 30  # non-dummy
    n_modes: int = 1
    n_renewable: int = 4
    n_nonrenewable: int = 0
    nc: float = 1.5
    rf: float = 0.5
    rs: float = 0.5
    max_duration: int = 10
    max_demand: int = 10
    n_start: int = 3
    n_finish: int = 3
    max_degree: int = 3
    fan_window: int = 4


@dataclass
class RawJobData:
    """Plain job table: 1-based jobs, source = 1, sink = n + 2."""

    succ: dict[int, list[int]]
    modes: dict[int, list[tuple[int, list[int]]]]  # job -> [(duration, demands over all resources)]
    capacities: list[int]
    n_renewable: int
    n_nonrenewable: int

    @property
    def n_jobs(self) -> int:
        return len(self.modes)


def j30_parameters(param_set: int) -> tuple[float, float, float]:
    """(NC, RF, RS) of a 1-based j30 parameter-set index; RS varies fastest."""
    nc, rf, rs = list(itertools.product(J30_NC, J30_RF, J30_RS))[param_set - 1]
    return nc, rf, rs


def _reachability(n: int, succ: dict[int, set[int]]) -> list[set[int]]:
    reach = [set() for _ in range(n + 1)]
    for j in range(n, 0, -1):
        for s in succ[j]:
            reach[j].add(s)
            reach[j] |= reach[s]
    return reach


def _network(cfg: GenConfig, rng: random.Random) -> dict[int, list[int]]:
    n = cfg.n_jobs
    src, sink = 1, n + 2
    jobs = list(range(2, n + 2))
    starts = set(jobs[: cfg.n_start])
    finishes = set(jobs[-cfg.n_finish :])
    succ: dict[int, set[int]] = {j: set() for j in range(1, n + 3)}
    pred: dict[int, set[int]] = {j: set() for j in range(1, n + 3)}

    def link(a, b):
        succ[a].add(b)
        pred[b].add(a)

    for j in jobs:
        if j in starts:
            continue
        cands = [i for i in jobs if i < j and i not in finishes and len(succ[i]) < cfg.max_degree]
        if not cands:
            cands = [i for i in jobs if i < j and i not in finishes]
        # prefer the lowest-numbered open jobs, which keeps the network layered
        link(rng.choice(cands[: cfg.fan_window]), j)
    for j in jobs:
        if j in finishes or succ[j]:
            continue
        cands = [i for i in jobs if i > j and i not in starts and len(pred[i]) < cfg.max_degree]
        if not cands:
            cands = [i for i in jobs if i > j and i not in starts]
        link(j, rng.choice(cands))
    target = round(cfg.nc * (n + 2)) - cfg.n_start - cfg.n_finish
    arcs = sum(len(succ[j]) for j in jobs)
    tries = 0
    while arcs < target and tries < 20_000:
        tries += 1
        a, b = sorted(rng.sample(jobs, 2))
        if a in finishes or b in starts or b in succ[a]:
            continue
        if len(succ[a]) >= cfg.max_degree or len(pred[b]) >= cfg.max_degree:
            continue
        reach = _reachability(n + 2, succ)
        # skip arcs that are implied by a path or make an existing arc redundant
        if b in reach[a]:
            continue
        if any(b in reach[s] or s == b for s in succ[a]):
            continue
        if any(a in reach[p] for p in pred[b]):
            continue
        link(a, b)
        arcs += 1
    for j in starts:
        link(src, j)
    for j in finishes:
        link(j, sink)
    return {j: sorted(succ[j]) for j in range(1, n + 3)}


def _earliest_peak(succ, durations, demand) -> int:
    """Peak usage of one resource in the earliest-start schedule."""
    est: dict[int, int] = {}
    for j in sorted(succ):
        est.setdefault(j, 0)
        for s in succ[j]:
            est[s] = max(est.get(s, 0), est[j] + durations[j])
    horizon = max(est[j] + durations[j] for j in succ) + 1
    load = [0] * (horizon + 1)
    for j in succ:
        for t in range(est[j], est[j] + durations[j]):
            load[t] += demand[j]
    return max(load)


def generate(cfg: GenConfig, seed: int) -> RawJobData:
    rng = random.Random(seed)
    n = cfg.n_jobs
    succ = _network(cfg, rng)
    K = cfg.n_renewable + cfg.n_nonrenewable
    modes: dict[int, list[tuple[int, list[int]]]] = {}
    n_used = max(1, round(cfg.rf * cfg.n_renewable))
    for j in range(1, n + 3):
        if j in (1, n + 2):
            modes[j] = [(0, [0] * K)]
            continue
        used = set(rng.sample(range(cfg.n_renewable), n_used))
        non = rng.randrange(cfg.n_renewable, K) if cfg.n_nonrenewable else None
        durs = sorted(rng.sample(range(1, cfg.max_duration + 1), cfg.n_modes))
        base = {k: rng.randint(1, cfg.max_demand) for k in used}
        ms = []
        for i, d in enumerate(durs):
            dem = [0] * K
            for k in used:
                # longer modes use no more of the resource than shorter ones
                dem[k] = max(1, base[k] - rng.randint(0, 2) * i) if cfg.n_modes > 1 else base[k]
            if non is not None:
                dem[non] = rng.randint(1, cfg.max_demand)
            ms.append((d, dem))
        modes[j] = ms
    caps = []
    short = {j: modes[j][0][0] for j in modes}
    for k in range(K):
        if k < cfg.n_renewable:
            r_min = max(max(d[k] for _, d in modes[j]) for j in modes)
            peak = _earliest_peak(succ, short, {j: modes[j][0][1][k] for j in modes})
            caps.append(r_min + round(cfg.rs * (max(peak, r_min) - r_min)))
        else:
            lo = sum(min(d[k] for _, d in modes[j]) for j in modes)
            hi = sum(max(d[k] for _, d in modes[j]) for j in modes)
            caps.append(lo + round(cfg.rs * (hi - lo)))
    return RawJobData(succ, modes, caps, cfg.n_renewable, cfg.n_nonrenewable)


# ---------------------------------------------------------------- writers


def _resource_labels(raw: RawJobData, sep: str = "  ") -> str:
    labels = [f"R {k + 1}" for k in range(raw.n_renewable)]
    labels += [f"N {k + 1}" for k in range(raw.n_nonrenewable)]
    return sep.join(labels)


def write_sm(raw: RawJobData, basename: str = "", horizon: int | None = None) -> str:
    """PSPLIB layout; used for both .sm and PSPLIB-style .mm output."""
    n = raw.n_jobs
    if horizon is None:
        horizon = sum(max(d for d, _ in ms) for ms in raw.modes.values())
    star = "*" * 72
    out = [
        star,
        f"file with basedata            : {basename}",
        "initial value random generator: 0",
        star,
        "projects                      :  1",
        f"jobs (incl. supersource/sink ):  {n}",
        f"horizon                       :  {horizon}",
        "RESOURCES",
        f"  - renewable                 :  {raw.n_renewable}   R",
        f"  - nonrenewable              :  {raw.n_nonrenewable}   N",
        "  - doubly constrained        :  0   D",
        star,
        "PRECEDENCE RELATIONS:",
        "jobnr.    #modes  #successors   successors",
    ]
    for j in sorted(raw.succ):
        s = raw.succ[j]
        out.append(f"{j:>4}{len(raw.modes[j]):>9}{len(s):>11}   " + "".join(f"{x:>4}" for x in s))
    out += [star, "REQUESTS/DURATIONS:", f"jobnr. mode duration  {_resource_labels(raw)}", "-" * 72]
    for j in sorted(raw.modes):
        for i, (d, dem) in enumerate(raw.modes[j], 1):
            head = f"{j:>3}" if i == 1 else "   "
            out.append(f"{head}{i:>7}{d:>6}   " + "".join(f"{r:>5}" for r in dem))
    out += [star, "RESOURCEAVAILABILITIES:", "  " + _resource_labels(raw), "".join(f"{c:>5}" for c in raw.capacities), star]
    return "\n".join(out) + "\n"


def write_mmlib(raw: RawJobData) -> str:
    """MMLIB layout: tab separated, no horizon line, multi-line mode blocks."""
    star = "*" * 72
    n = raw.n_jobs
    out = [
        f"jobs  (incl. supersource/sink ):\t{n}",
        "RESOURCES",
        f"- renewable                 : {raw.n_renewable} R",
        f"- nonrenewable              : {raw.n_nonrenewable} N",
        "- doubly constrained        : 0 D",
        star,
        "PRECEDENCE RELATIONS:",
        "jobnr.    #modes  #successors   successors",
    ]
    for j in sorted(raw.succ):
        s = raw.succ[j]
        out.append(f"{j}\t{len(raw.modes[j])}\t{len(s)}\t\t" + " ".join(map(str, s)) + " ")
    labels = "\t".join([f"R{k + 1}" for k in range(raw.n_renewable)] + [f"N{k + 1}" for k in range(raw.n_nonrenewable)])
    out += [star, "REQUESTS/DURATIONS", f"jobnr.\tmode\tdur\t{labels}\t", "-" * 72, ""]
    for j in sorted(raw.modes):
        for i, (d, dem) in enumerate(raw.modes[j], 1):
            head = str(j) if i == 1 else ""
            out.append(f"{head}\t{i}\t{d}\t" + "\t".join(map(str, dem)) + "\t")
    labels_sp = "\t".join([f"R {k + 1}" for k in range(raw.n_renewable)] + [f"N {k + 1}" for k in range(raw.n_nonrenewable)])
    out += [star, "", " RESOURCE AVAILABILITIES ", "\t" + labels_sp, "\t" + "\t".join(map(str, raw.capacities)), "", star]
    return "\n".join(out) + "\n"


def j30_config(param_set: int) -> GenConfig:
    nc, rf, rs = j30_parameters(param_set)
    return GenConfig(n_jobs=30, nc=nc, rf=rf, rs=rs)


def mmlib50_config(variant: int) -> GenConfig:
    nc = (1.5, 1.8, 2.1)[variant % 3]
    rs = (0.25, 0.5, 0.75)[(variant // 3) % 3]
    return GenConfig(n_jobs=50, n_modes=3, n_renewable=2, n_nonrenewable=2, nc=nc, rf=1.0, rs=rs)


def write_j30_set(directory: str | Path, instances_per_set: int = 10, base_seed: int = 30) -> list[Path]:
    """Write ``j30<set>_<k>.sm`` files for all 48 parameter sets."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for ps in range(1, 49):
        for k in range(1, instances_per_set + 1):
            raw = generate(j30_config(ps), seed=base_seed * 100_000 + ps * 100 + k)
            path = directory / f"j30{ps}_{k}.sm"
            path.write_text(write_sm(raw, f"j30{ps}_{k}"))
            paths.append(path)
    return paths


def write_mmlib50_set(directory: str | Path, count: int = 10, base_seed: int = 50) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for v in range(count):
        raw = generate(mmlib50_config(v), seed=base_seed * 100_000 + v)
        path = directory / f"J50{v // 3 + 1}_{v % 3 + 1}.mm"
        path.write_text(write_mmlib(raw))
        paths.append(path)
    return paths


# ---------------------------------------------------------------- toy instances


def toy_instance(
    seed: int,
    n_acts: int = 4,
    n_modes: int = 1,
    horizon: int = 8,
    n_resources: int = 1,
    cost: str = "makespan",
    edge_prob: float = 0.35,
    max_duration: int = 3,
    max_demand: int = 3,
    capacity: int | None = None,
):
    """Small random instance in the model's own types.

    ``cost="makespan"`` adds a zero-duration sink after every activity and
    charges its start; ``cost="random"`` draws integer start costs 0..5 from
    ``seed`` for every (activity, mode, period).
    """
    from fractions import Fraction

    from .model import Activity, Instance, Mode, ObjectiveSpec, Project, Resource

    rng = random.Random(seed)
    acts = []
    for j in range(1, n_acts + 1):
        durs = sorted(rng.sample(range(1, max_duration + 2), n_modes)) if n_modes > 1 else [rng.randint(1, max_duration)]
        modes = tuple(Mode(d, tuple(rng.randint(0, max_demand) for _ in range(n_resources))) for d in durs)
        acts.append(Activity((1, j), modes))
    edges = [((1, a), (1, b)) for a in range(1, n_acts + 1) for b in range(a + 1, n_acts + 1) if rng.random() < edge_prob]
    if cost == "makespan":
        sink = (1, n_acts + 1)
        acts.append(Activity(sink, (Mode(0, (0,) * n_resources),)))
        edges += [((1, a), sink) for a in range(1, n_acts + 1)]
        objective = ObjectiveSpec("makespan", sink=sink)
    elif cost == "random":
        table = {
            ((1, j), m, t): Fraction(rng.randint(0, 5))
            for j in range(1, n_acts + 1)
            for m in range(1, n_modes + 1)
            for t in range(1, horizon + 1)
        }
        objective = ObjectiveSpec("table", table=table)
    else:
        raise ValueError(f"unknown cost kind {cost!r}")
    caps = []
    for k in range(n_resources):
        top = max(max(m.demands[k] for m in a.modes) for a in acts)
        caps.append(capacity if capacity is not None else max(top, rng.randint(top, 2 * top)))
    resources = tuple(Resource(f"R{k + 1}", c, c) for k, c in enumerate(caps))
    return Instance((Project(1, tuple(acts), tuple(edges)),), resources, horizon, objective, f"toy{seed}")

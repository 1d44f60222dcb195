"""Experiment pipeline: bound comparison, PDT MIP gaps and convergence traces."""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .compact import build, lp_bound, solve_integral, solve_with_cuts
from .dw import ColumnGeneration, MasterFlags, PricingOptions
from .errors import BpschedError, InfeasibleHorizon
from .lp import OPTIMAL
from .model import Instance, build_partition, compute_time_windows
from .parser import load_manifest

FORMULATIONS = ("LMP", "PDDT-LP", "PDDT-LP-PrecCut", "PDT-LP", "PDT-LP-PrecCut")
GAP_THRESHOLDS = (0, 5, 10, 15, 20)


@dataclass
class BenchConfig:
    directory: str = "data/j30"
    sample: str = "random:20:0"
    horizon: str = "file"
    formulations: tuple[str, ...] = FORMULATIONS
    partition: str = "single-block"
    pricing_style: str | None = None
    horizon_completion: bool = True
    stabilize_alpha: float = 0.0
    single_column: bool = False
    iteration_limit: int = 50_000
    budget_nodes: int = 10_000
    workers: int = 1


@dataclass
class BenchRow:
    instance: str
    formulation: str
    bound: float
    improvement_pct: float = math.nan  # vs LMP
    improvement_pct_pddt: float = math.nan  # vs PDDT-LP
    runtime: float = 0.0
    iterations: int = 0
    columns: int = 0
    status: str = OPTIMAL
    horizon: int = 0

    FIELDS = (
        "instance",
        "formulation",
        "bound",
        "improvement_pct",
        "improvement_pct_pddt",
        "runtime",
        "iterations",
        "columns",
        "status",
        "horizon",
    )


def improvement(bound: float, base: float) -> float:
    """``100 * (bound - base) / |base|``; zero when both are zero."""
    if math.isnan(bound) or math.isnan(base):
        return math.nan
    if base == 0:
        return 0.0 if abs(bound) < 1e-12 else math.copysign(math.inf, bound)
    return 100.0 * (bound - base) / abs(base)


def lmp_run(inst: Instance, cfg: BenchConfig):
    part = build_partition(inst, cfg.partition)
    opts = PricingOptions(
        style=cfg.pricing_style,
        collect="most_negative" if cfg.single_column else "all_negative",
        budget_nodes=cfg.budget_nodes,
        stabilize_alpha=cfg.stabilize_alpha,
    )
    w = compute_time_windows(inst, cfg.horizon_completion)
    cg = ColumnGeneration(inst, part, MasterFlags(), opts, w, cfg.horizon_completion)
    return cg.run(iteration_limit=cfg.iteration_limit, raise_infeasible=False)


def bound_rows(name: str, inst: Instance, cfg: BenchConfig) -> list[BenchRow]:
    """All requested bounds for one instance, with both improvement baselines."""
    rows: dict[str, BenchRow] = {}
    T = inst.horizon
    try:
        w = compute_time_windows(inst, cfg.horizon_completion)
    except InfeasibleHorizon as exc:
        return [BenchRow(name, f, math.nan, status=f"InfeasibleHorizon: {exc}", horizon=T) for f in cfg.formulations]
    for f in cfg.formulations:
        t0 = time.monotonic()
        try:
            if f == "LMP":
                res = lmp_run(inst, cfg)
                rows[f] = BenchRow(name, f, res.z_lmp, runtime=time.monotonic() - t0, iterations=res.iterations,
                                   columns=len(res.master.columns), status=res.status, horizon=T)
            elif f in ("PDDT-LP", "PDT-LP"):
                sol = lp_bound(build(inst, f[:-3], w, dense_rows=False))
                rows[f] = BenchRow(name, f, sol.objective, runtime=time.monotonic() - t0, iterations=sol.iterations,
                                   status=sol.status, horizon=T)
            elif f in ("PDDT-LP-PrecCut", "PDT-LP-PrecCut"):
                res = solve_with_cuts(inst, f.split("-")[0], windows=w)
                rows[f] = BenchRow(name, f, res.bound, runtime=time.monotonic() - t0, iterations=res.rounds,
                                   columns=res.cuts_added, status=res.status, horizon=T)
            else:
                raise ValueError(f"unknown formulation {f!r}")
        except BpschedError as exc:
            rows[f] = BenchRow(name, f, math.nan, runtime=time.monotonic() - t0, status=f"{type(exc).__name__}: {exc}", horizon=T)
    lmp = rows["LMP"].bound if "LMP" in rows else math.nan
    pddt = rows["PDDT-LP"].bound if "PDDT-LP" in rows else math.nan
    for r in rows.values():
        r.improvement_pct = improvement(r.bound, lmp)
        r.improvement_pct_pddt = improvement(r.bound, pddt)
    return [rows[f] for f in cfg.formulations]


def _bound_job(args):
    name, inst, cfg = args
    return bound_rows(name, inst, cfg)


def rows_to_csv(rows: Sequence, fields: Sequence[str], path: str | Path | None = None) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(fields)
    for r in rows:
        d = asdict(r) if hasattr(r, "__dataclass_fields__") else dict(r)
        wr.writerow([repr(d[f]) if isinstance(d[f], float) else d[f] for f in fields])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


@dataclass
class Summary:
    formulation: str
    baseline: str
    n: int
    min: float
    avg: float
    std: float
    max: float


def summarize(rows: Sequence[BenchRow]) -> list[Summary]:
    """min / avg / sample std / max of the improvement per formulation and baseline."""
    out = []
    forms = sorted({r.formulation for r in rows}, key=lambda f: FORMULATIONS.index(f) if f in FORMULATIONS else 99)
    for base, attr in (("LMP", "improvement_pct"), ("PDDT-LP", "improvement_pct_pddt")):
        for f in forms:
            vals = [getattr(r, attr) for r in rows if r.formulation == f and math.isfinite(getattr(r, attr))]
            if not vals:
                out.append(Summary(f, base, 0, math.nan, math.nan, math.nan, math.nan))
                continue
            std = statistics.stdev(vals) if len(vals) > 1 else 0.0
            out.append(Summary(f, base, len(vals), min(vals), statistics.fmean(vals), std, max(vals)))
    return out


def cmd_bounds(cfg: BenchConfig, out: str | Path | None = None) -> tuple[list[BenchRow], list[Summary]]:
    """Bound table over a sampled directory; rows sorted by instance then formulation."""
    man = load_manifest(cfg.directory, cfg.sample, cfg.horizon)
    if not man.instances:
        warnings.warn(f"no instances found in {cfg.directory}", RuntimeWarning, stacklevel=2)
    jobs = [(name, inst, cfg) for name, inst in man.instances]
    rows: list[BenchRow] = []
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            for rs in pool.map(_bound_job, jobs):
                rows.extend(rs)
    else:
        for job in jobs:
            rows.extend(_bound_job(job))
    for name, err in man.errors:
        rows.append(BenchRow(name, "parse", math.nan, status=err))
    order = {f: i for i, f in enumerate(cfg.formulations)}
    rows.sort(key=lambda r: (r.instance, order.get(r.formulation, 99)))
    summ = summarize(rows)
    if out is not None:
        out = Path(out)
        rows_to_csv(rows, BenchRow.FIELDS, out)
        rows_to_csv(summ, ("formulation", "baseline", "n", "min", "avg", "std", "max"), out.with_name(out.stem + "_summary.csv"))
    return rows, summ


# ---------------------------------------------------------------- MIP gaps


@dataclass
class GapRow:
    instance: str
    lower: float
    upper: float
    gap_pct: float
    nodes: int
    time_budget: float
    runtime: float
    status: str

    FIELDS = ("instance", "lower", "upper", "gap_pct", "nodes", "time_budget", "runtime", "status")


def gap_distribution(rows: Sequence[GapRow], thresholds: Sequence[int] = GAP_THRESHOLDS) -> dict[int, float]:
    """Share (percent) of instances with gap at most each threshold."""
    n = len(rows)
    if n == 0:
        return {t: math.nan for t in thresholds}
    return {t: 100.0 * sum(1 for r in rows if r.gap_pct <= t + 1e-9) / n for t in thresholds}


def cmd_gap(cfg: BenchConfig, time_budget_rule: str | float = "lmp", out: str | Path | None = None) -> tuple[list[GapRow], dict]:
    """Integral PDT under a per-instance budget.

    ``time_budget_rule="lmp"`` gives each instance the runtime of its LMP
    solve; a number is a fixed budget in seconds. The node budget always
    applies and is what makes runs repeatable.
    """
    man = load_manifest(cfg.directory, cfg.sample, cfg.horizon)
    if not man.instances:
        warnings.warn(f"no instances found in {cfg.directory}", RuntimeWarning, stacklevel=2)
    rows = []
    for name, inst in man.instances:
        if time_budget_rule == "lmp":
            t0 = time.monotonic()
            lmp_run(inst, cfg)
            budget = time.monotonic() - t0
        elif time_budget_rule in (None, "none"):
            budget = None
        else:
            budget = float(time_budget_rule)
        t0 = time.monotonic()
        try:
            model = build(inst, "PDT", compute_time_windows(inst, cfg.horizon_completion), dense_rows=False)
            res = solve_integral(model, cfg.budget_nodes, budget)
        except BpschedError as exc:
            rows.append(GapRow(name, math.nan, math.nan, math.inf, 0, budget or math.nan, 0.0, type(exc).__name__))
            continue
        ub = res.objective if res.objective is not None else math.inf
        lb = res.bound
        gap = 0.0 if ub - lb <= 1e-9 * max(1.0, abs(ub)) else (100.0 * (ub - lb) / abs(ub) if math.isfinite(ub) and ub else math.inf)
        rows.append(GapRow(name, lb, ub, gap, res.nodes, budget if budget is not None else math.nan, time.monotonic() - t0, res.status))
    rows.sort(key=lambda r: r.instance)
    dist = gap_distribution(rows)
    if out is not None:
        out = Path(out)
        rows_to_csv(rows, GapRow.FIELDS, out)
        text = "threshold_pct,share_pct\n" + "".join(f"{t},{v!r}\n" for t, v in dist.items())
        out.with_name(out.stem + "_distribution.csv").write_text(text, encoding="utf-8")
    return rows, dist


# ---------------------------------------------------------------- traces


def cmd_trace(inst: Instance, cfg: BenchConfig, out: str | Path | None = None):
    """Convergence trace of the LMP solve; returns the column-generation result."""
    res = lmp_run(inst, cfg)
    if out is not None:
        res.trace.to_csv(out)
    return res


def summary_json(summ: Sequence[Summary]) -> str:
    return "\n".join(json.dumps(asdict(s)) for s in summ)


# ---------------------------------------------------------------- oracle suite


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    asserted: bool = True

    def to_json(self) -> str:
        return json.dumps({"check": self.name, "passed": self.passed, "asserted": self.asserted, **self.detail}, default=str)


def cmd_verify(quick: bool = False) -> list[Check]:
    """Run the oracle fixtures; ``asserted=False`` checks are reported only."""
    from .branching import branch_and_price
    from .generate import toy_instance
    from .mip import brute_force_schedule
    from .oracle import (
        MODE_GAP_WITNESS_SEED,
        USAGE_BRANCH_WITNESS_SEED,
        build_gap_example,
        check_mckp_identity,
        evaluate_listed_solution,
        mckp_fixture,
        random_start_fixings,
        search_fractional_witness,
        start_fixing_bounds,
        verify_integrality_gap,
    )

    checks: list[Check] = []
    app = build_gap_example()
    for hc in (True, False):
        rep = verify_integrality_gap(app, horizon_completion=hc)
        checks.append(Check(f"gap-example gap (horizon completion {'on' if hc else 'off'})", rep.chain_ok(),
                            {"z_lp": rep.z_lp, "z_ip": rep.z_ip, "fractional": rep.fractional}, asserted=False))
    listed = evaluate_listed_solution(app)
    checks.append(Check("gap-example listed point", True, listed, asserted=False))
    w2 = search_fractional_witness("mode-gap", [MODE_GAP_WITNESS_SEED])
    checks.append(Check("multi-mode pricing witness", w2 is not None and w2.z_lp < w2.z_ip - 1e-6,
                        {"witness": w2.describe() if w2 else None}))
    for s in range(3):
        inst = toy_instance(s, 4, 1, 8, 1)
        rep = verify_integrality_gap(inst)
        checks.append(Check(f"single-mode pricing integral toy{s}", not rep.fractional, {"z_lp": rep.z_lp, "z_ip": rep.z_ip}))
    for s in range(3):
        d = check_mckp_identity(*mckp_fixture(s))
        checks.append(Check(f"knapsack identity {s}", d["identity_gap"] <= 1e-6, d))
    n_toys = 2 if quick else 5
    for s in range(n_toys):
        inst = toy_instance(s, 4, 1, 9, 2)
        for f in range(3):
            fx = random_start_fixings(inst, 100 * s + f)
            z_lp, z_lmp = start_fixing_bounds(inst, fx)
            ok = (math.isinf(z_lp) and math.isinf(z_lmp)) or abs(z_lp - z_lmp) <= 1e-6 * max(1.0, abs(z_lp))
            checks.append(Check(f"start fixing equality toy{s}/{f}", ok, {"z_pddt": z_lp, "z_lmp": z_lmp}))
    w6 = search_fractional_witness("usage-branch", [USAGE_BRANCH_WITNESS_SEED])
    checks.append(Check("usage-branch master witness", w6 is not None and w6.z_ip > w6.z_lp + 1e-6,
                        {"witness": w6.describe() if w6 else None}))
    for s in range(2 if quick else 4):
        inst = toy_instance(s, 4, 1 + s % 2, 9, 1)
        bf = brute_force_schedule(inst)
        for rule in ("start", "hierarchical"):
            res = branch_and_price(inst, rule_order=rule)
            ok = (bf.objective is None and res.objective is None) or (
                bf.objective is not None and res.objective is not None and abs(res.objective - float(bf.objective)) <= 1e-6
            )
            checks.append(Check(f"branch-and-price toy{s} {rule}", ok, {"bnp": res.objective, "brute_force": bf.objective, "nodes": res.nodes}))
    return checks

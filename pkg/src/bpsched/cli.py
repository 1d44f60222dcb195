"""Command line entry point: ``bpsched <command> [flags]``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .bench import FORMULATIONS, BenchConfig, BenchRow, cmd_bounds, cmd_gap, cmd_trace, cmd_verify, rows_to_csv, summary_json
from .branching import RULE_ORDERS, branch_and_price
from .dw import MasterFlags, PricingOptions, column_generation
from .errors import BpschedError
from .model import build_partition, critical_path_length, validate_instance
from .parser import parse_file
from .pricing import AGGREGATED, DISAGGREGATED, RESOURCE_CONSTRAINED, UNCONSTRAINED

PRICING_CHOICES = ("auto", DISAGGREGATED, AGGREGATED, "resource-constrained")


def _horizon(text: str):
    return int(text) if text.isdigit() else text


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--horizon", default="file", help="file | sum-max | heuristic | <int>")
    p.add_argument("--horizon-completion", choices=("on", "off"), default="on")
    p.add_argument("--partition", default="single-block", help="single-block | by-project | by-resource")
    p.add_argument("--pricing", choices=PRICING_CHOICES, default="auto")
    p.add_argument("--stabilize-alpha", type=float, default=0.0)
    p.add_argument("--budget-nodes", type=int, default=10_000)
    p.add_argument("--iteration-limit", type=int, default=50_000)
    p.add_argument("--single-column", action="store_true", help="add only the most negative column per iteration")
    p.add_argument("--out", default=None)


def _sampled(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dir", default="data/j30")
    p.add_argument("--sample", default=None, help="all | first:k | random:k[:seed]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)


def _config(args) -> BenchConfig:
    sample = args.sample or f"random:20:{args.seed}"
    if sample.startswith("random:") and sample.count(":") == 1:
        sample = f"{sample}:{args.seed}"
    forms = tuple(f.strip() for f in args.formulations.split(",")) if getattr(args, "formulations", None) else FORMULATIONS
    return BenchConfig(
        directory=args.dir,
        sample=sample,
        horizon=_horizon(args.horizon),
        formulations=forms,
        partition=args.partition,
        pricing_style=None if args.pricing in ("auto", "resource-constrained") else args.pricing,
        horizon_completion=args.horizon_completion == "on",
        stabilize_alpha=args.stabilize_alpha,
        single_column=args.single_column,
        iteration_limit=args.iteration_limit,
        budget_nodes=args.budget_nodes,
        workers=getattr(args, "workers", 1),
    )


def _pricing(args) -> tuple[PricingOptions, MasterFlags]:
    rc = args.pricing == "resource-constrained"
    opts = PricingOptions(
        kind=RESOURCE_CONSTRAINED if rc else UNCONSTRAINED,
        style=None if args.pricing in ("auto", "resource-constrained") else args.pricing,
        collect="most_negative" if args.single_column else "all_negative",
        budget_nodes=args.budget_nodes,
        stabilize_alpha=args.stabilize_alpha,
    )
    flags = MasterFlags(dedicated=rc, pricing=opts.kind)
    return opts, flags


def _num(v):
    return None if isinstance(v, float) and not math.isfinite(v) else v


def run_parse(args) -> int:
    bad = 0
    for path in args.files:
        try:
            inst = parse_file(path, _horizon(args.horizon))
        except (OSError, BpschedError) as exc:
            print(json.dumps({"file": path, "error": f"{type(exc).__name__}: {exc}"}))
            bad += 1
            continue
        rep = validate_instance(inst)
        print(json.dumps({
            "file": path,
            "name": inst.name,
            "activities": len(inst.activities),
            "resources": len(inst.resources),
            "max_modes": inst.max_modes,
            "horizon": inst.horizon,
            "critical_path": critical_path_length(inst),
            "valid": rep.ok,
            "findings": rep.findings,
        }))
        bad += not rep.ok
    return 1 if bad else 0


def run_colgen(args) -> int:
    inst = parse_file(args.instance, _horizon(args.horizon))
    opts, flags = _pricing(args)
    res = column_generation(inst, build_partition(inst, args.partition), flags, opts, args.iteration_limit,
                            horizon_completion=args.horizon_completion == "on", raise_infeasible=False)
    if args.out:
        res.trace.to_csv(args.out)
    print(json.dumps({"instance": inst.name, "horizon": inst.horizon, "status": res.status, "z_lmp": _num(res.z_lmp),
                      "dual_bound": _num(res.dual_bound), "iterations": res.iterations, "columns": res.columns_added,
                      "runtime": res.runtime}))
    return 0


def run_bnp(args) -> int:
    inst = parse_file(args.instance, _horizon(args.horizon))
    opts, flags = _pricing(args)
    res = branch_and_price(inst, build_partition(inst, args.partition), flags, args.branch_rule, args.budget_nodes, opts,
                           args.horizon_completion == "on", iteration_limit=args.iteration_limit)
    if args.out:
        res.tree_csv(args.out)
    print(json.dumps({"instance": inst.name, "status": res.status, "objective": _num(res.objective),
                      "bound": _num(res.bound), "root_bound": _num(res.root_bound), "nodes": res.nodes,
                      "schedule": {f"{a[0]}.{a[1]}": list(ms) for a, ms in sorted(res.assignment.items())}}))
    return 0


def run_bounds(args) -> int:
    cfg = _config(args)
    rows, summ = cmd_bounds(cfg, args.out)
    if not args.out:
        sys.stdout.write(rows_to_csv(rows, BenchRow.FIELDS))
    print(summary_json(summ), file=sys.stderr)
    return 0


def run_gap(args) -> int:
    cfg = _config(args)
    rule = args.time_budget if args.time_budget in ("lmp", "none") else float(args.time_budget)
    rows, dist = cmd_gap(cfg, rule, args.out)
    for r in rows:
        print(json.dumps({"instance": r.instance, "gap_pct": _num(r.gap_pct), "status": r.status}))
    print(json.dumps({"distribution": dist}))
    return 0


def run_trace(args) -> int:
    cfg = _config(args)
    inst = parse_file(args.instance, cfg.horizon)
    res = cmd_trace(inst, cfg, args.out)
    print(json.dumps({"instance": inst.name, "status": res.status, "z_lmp": _num(res.z_lmp), "iterations": res.iterations,
                      "columns": res.columns_added, "longest_plateau": res.trace.longest_plateau()}))
    return 0


def run_verify(args) -> int:
    checks = cmd_verify(quick=args.quick)
    for c in checks:
        print(c.to_json())
    failed = [c for c in checks if c.asserted and not c.passed]
    return 1 if failed else 0


def run_counterexample(args) -> int:
    from .oracle import search_fractional_witness

    seeds = range(args.seed, args.seed + args.count)
    w = search_fractional_witness(args.kind, seeds)
    if w is None:
        print(json.dumps({"kind": args.kind, "found": False, "seeds": [seeds.start, seeds.stop]}))
        return 1
    out = {"kind": args.kind, "found": True, "seed": w.seed, "draw": w.draw, "z_lp": w.z_lp, "z_ip": w.z_ip,
           "decision": w.decision.describe() if w.decision else None}
    if args.out:
        Path(args.out).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bpsched", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse and validate instance files")
    p.add_argument("files", nargs="+")
    p.add_argument("--horizon", default="file")
    p.set_defaults(func=run_parse)

    p = sub.add_parser("colgen", help="solve the master LP relaxation of one instance")
    p.add_argument("instance")
    _common(p)
    p.set_defaults(func=run_colgen)

    p = sub.add_parser("bnp", help="branch-and-price on one instance")
    p.add_argument("instance")
    p.add_argument("--branch-rule", choices=sorted(RULE_ORDERS), default="hierarchical")
    _common(p)
    p.set_defaults(func=run_bnp)

    p = sub.add_parser("bounds", help="bound comparison table over a sample")
    _sampled(p)
    p.add_argument("--formulations", default=None, help="comma list of " + ", ".join(FORMULATIONS))
    _common(p)
    p.set_defaults(func=run_bounds)

    p = sub.add_parser("gap", help="integral PDT gaps under a per-instance budget")
    _sampled(p)
    p.add_argument("--time-budget", default="lmp", help="lmp | none | seconds")
    _common(p)
    p.set_defaults(func=run_gap)

    p = sub.add_parser("trace", help="convergence trace of one instance")
    p.add_argument("instance")
    p.add_argument("--dir", default=".")
    _common(p)
    p.set_defaults(func=run_trace, sample=None, seed=0)

    p = sub.add_parser("verify", help="run the oracle fixtures")
    p.add_argument("--quick", action="store_true")
    p.set_defaults(func=run_verify)

    p = sub.add_parser("counterexample", help="search small instances for a relaxation gap")
    p.add_argument("--kind", choices=("mode-gap", "usage-branch"), default="mode-gap")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=run_counterexample)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BpschedError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

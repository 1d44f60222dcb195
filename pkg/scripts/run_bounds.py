"""Bound comparison over a sampled instance directory (CSV plus summary)."""
import argparse

from bpsched.bench import FORMULATIONS, BenchConfig, cmd_bounds, summary_json


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dir", default="data/j30")
    ap.add_argument("--sample", default="random:20:0")
    ap.add_argument("--horizon", default="file")
    ap.add_argument("--formulations", default=",".join(FORMULATIONS))
    ap.add_argument("--pricing-style", default=None, choices=("aggregated", "disaggregated"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="bounds.csv")
    args = ap.parse_args()
    cfg = BenchConfig(
        directory=args.dir,
        sample=args.sample,
        horizon=args.horizon,
        formulations=tuple(args.formulations.split(",")),
        pricing_style=args.pricing_style,
        workers=args.workers,
    )
    rows, summ = cmd_bounds(cfg, args.out)
    print(f"{len(rows)} rows written to {args.out}")
    print(summary_json(summ))


if __name__ == "__main__":
    main()

"""Column-generation convergence trace of one instance."""
import argparse

from bpsched.bench import BenchConfig, cmd_trace
from bpsched.parser import parse_file


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("instance", nargs="?", default="data/j30/j3029_4.sm")
    ap.add_argument("--horizon", default="file")
    ap.add_argument("--single-column", action="store_true", help="add only the most negative column per iteration")
    ap.add_argument("--stabilize-alpha", type=float, default=0.0)
    ap.add_argument("--iteration-limit", type=int, default=50_000)
    ap.add_argument("--out", default="trace.csv")
    args = ap.parse_args()
    inst = parse_file(args.instance, args.horizon)
    cfg = BenchConfig(single_column=args.single_column, stabilize_alpha=args.stabilize_alpha, iteration_limit=args.iteration_limit)
    res = cmd_trace(inst, cfg, args.out)
    tr = res.trace
    print(f"{inst.name}: status {res.status}, {res.iterations} iterations, {len(res.master.columns)} columns")
    print(f"z_LMP {res.z_lmp:.6f}, longest plateau {tr.longest_plateau()} iterations; trace in {args.out}")


if __name__ == "__main__":
    main()

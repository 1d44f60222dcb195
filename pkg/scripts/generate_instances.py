"""Write the synthetic j30-style and MMLIB50-style instance sets."""
import argparse
from pathlib import Path

from bpsched.generate import write_j30_set, write_mmlib50_set


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data"))
    ap.add_argument("--per-set", type=int, default=10)
    ap.add_argument("--mm-count", type=int, default=10)
    args = ap.parse_args()
    out = Path(args.out)
    j30 = write_j30_set(out / "j30", args.per_set)
    mm = write_mmlib50_set(out / "mmlib50", args.mm_count)
    print(f"wrote {len(j30)} j30 files and {len(mm)} MMLIB50 files under {out}")


if __name__ == "__main__":
    main()

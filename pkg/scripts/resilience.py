"""Selective-jamming resilience curves on a lossless (or given) base trace.

    python scripts/resilience.py --out results/resilience.csv
"""
import argparse
import hashlib

from macagg.adversary import DEFAULT_LAYOUT, curve_csv, resilience_curve
from macagg.channel import LossTrace, parse_trace
from macagg.mac import Key
from macagg.schemes import SchemeConfig

SCHEMES = "trad,agg:16,comp:16,sw:16:100,sw:16:200,r2d2:8:1:100,r2d2:16:1:100,r2d2:16:1:200"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--schemes", default=SCHEMES)
    ap.add_argument("--len", type=int, default=2048, help="length of the lossless base trace")
    ap.add_argument("--trace", help="trace file to use as the base instead")
    ap.add_argument("--budgets", default=",".join(str(b / 100) for b in range(0, 31)))
    ap.add_argument("--strategy", choices=("analytic", "greedy"), default="analytic")
    ap.add_argument("--out", default="resilience.csv")
    args = ap.parse_args()

    if args.trace:
        with open(args.trace) as fh:
            base = parse_trace(fh.read())
    else:
        base = LossTrace.from_flags([True] * args.len, "lossless")
    key = Key(hashlib.sha256(b"macagg resilience key").digest())
    budgets = [float(b) for b in args.budgets.split(",")]
    parts = []
    for spec in args.schemes.split(","):
        pts = resilience_curve(SchemeConfig.parse(spec), base, budgets, key=key, layout=DEFAULT_LAYOUT,
                               strategy=args.strategy)
        text = curve_csv(pts, spec)
        parts.append(text if not parts else text.split("\n", 1)[1])
        at5 = next((p.goodput for p in pts if p.budget >= 0.05), None)
        print(f"{spec}: goodput at 5% budget {at5}", flush=True)
    with open(args.out, "w") as fh:
        fh.write("".join(parts))


if __name__ == "__main__":
    main()

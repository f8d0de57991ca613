"""Best payload length per scheme for a range of bit error rates.

    python scripts/payload_sweep.py --ber 1e-5,5e-5,1e-4,3e-4 --out results/payload.csv
"""
import argparse
import csv

from macagg.advisor import default_schemes, payload_sweep
from macagg.schemes import SchemeConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ber", default="1e-5,3e-5,5e-5,1e-4,2e-4,3e-4,5e-4")
    ap.add_argument("--header", type=int, default=5, help="header bytes")
    ap.add_argument("--len", type=int, default=3000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--schemes", help="comma-separated specs (default: the standard grid)")
    ap.add_argument("--grid", action="store_true", help="write every (payload, scheme) cell, not just the optimum")
    ap.add_argument("--out", default="payload_sweep.csv")
    args = ap.parse_args()

    schemes = default_schemes() if not args.schemes else [SchemeConfig.parse(s) for s in args.schemes.split(",")]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ber", "scheme", "payload_bytes", "goodput", "overall_best"])
        for ber in (float(b) for b in args.ber.split(",")):
            r = payload_sweep(ber, args.header * 8, schemes=schemes, trace_len=args.len, seed=args.seed)
            best = r.best()
            for c in schemes:
                if args.grid:
                    for p in r.payloads:
                        g = r.grid[(c.spec, p)]
                        if g is not None:
                            w.writerow([ber, c.spec, p, f"{g:.6f}", int(best[1] == c and best[0] == p)])
                else:
                    bp = r.best_payload(c)
                    if bp is not None:
                        w.writerow([ber, c.spec, bp[0], f"{bp[1]:.6f}", int(best[1] == c)])
            print(f"ber={ber}: best {best[1].spec} at {best[0]} B ({best[2]:.4f})", flush=True)


if __name__ == "__main__":
    main()

"""Authentication-delay CDFs per scheme on a Gilbert-Elliott or scenario trace.

    python scripts/delay_cdf.py --scenario city-mobile --out results/delay.csv
"""
import argparse
import csv
import hashlib

from macagg.channel import load_scenario
from macagg.mac import Key
from macagg.metrics import delay_cdf
from macagg.receiver import process_trace
from macagg.schemes import SchemeConfig

SCHEMES = "trad,agg:4,agg:16,comp:4,sw:4:100,sw:4:0,r2d2:4:1:100,r2d2:8:1:100"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="city-mobile")
    ap.add_argument("--len", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--schemes", default=SCHEMES)
    ap.add_argument("--out", default="delay_cdf.csv")
    args = ap.parse_args()

    trace = load_scenario(args.scenario).synth_trace(args.len, args.seed)
    key = Key(hashlib.sha256(b"macagg delay key").digest())
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "delay", "cdf"])
        for spec in args.schemes.split(","):
            cdf = delay_cdf(process_trace(SchemeConfig.parse(spec), key, trace, flush=True)) or []
            for d, f in cdf:
                w.writerow([spec, d, f"{f:.6f}"])
            print(f"{spec}: {len(cdf)} delay values", flush=True)


if __name__ == "__main__":
    main()

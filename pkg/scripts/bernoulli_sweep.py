"""Goodput of every default scheme over Bernoulli packet loss rates.

Writes one CSV row per (p_loss, scheme) with the seed-averaged goodput.

    python scripts/bernoulli_sweep.py --out results/bernoulli.csv
"""
import argparse
import csv
import hashlib

import numpy as np

from macagg.advisor import default_schemes
from macagg.channel import PacketLayout, gen_bernoulli
from macagg.mac import Key
from macagg.metrics import evaluate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--header", type=int, default=5, help="header bytes")
    ap.add_argument("--payload", type=int, default=48, help="payload bytes")
    ap.add_argument("--len", type=int, default=10_000)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--p", default="0,0.01,0.02,0.05,0.1,0.15,0.2,0.25,0.3,0.4")
    ap.add_argument("--out", default="bernoulli_sweep.csv")
    args = ap.parse_args()

    layout = PacketLayout.from_bytes(args.header, args.payload)
    key = Key(hashlib.sha256(b"macagg sweep key").digest())
    rates = [float(x) for x in args.p.split(",")]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p_loss", "scheme", "mean_tag_bits", "goodput", "goodput_std"])
        for p in rates:
            traces = [gen_bernoulli(p, args.len, seed) for seed in range(args.seeds)]
            for c in default_schemes():
                g = [evaluate(c, key, t, layout, flush=True).goodput for t in traces]
                w.writerow([p, c.spec, c.mean_tag_bits, f"{np.mean(g):.6f}", f"{np.std(g):.6f}"])
            print(f"p={p} done", flush=True)


if __name__ == "__main__":
    main()

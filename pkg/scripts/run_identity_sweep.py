#!/usr/bin/env python3
"""Sweep the whole identity catalog over a grid of (k, a) and write a CSV.

Usage: python scripts/run_identity_sweep.py [--digits 40] [--out identities.csv]
"""

import argparse
import csv
import sys
import time

import sourcegap as sg
from sourcegap.tau import check_identity


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--digits", type=int, default=40)
    ap.add_argument("--E", default="-1.5,1.5")
    ap.add_argument("--k", default="1,2")
    ap.add_argument("--a", default="0.5,1.0")
    ap.add_argument("--out", default="identities.csv")
    args = ap.parse_args()

    prec = sg.PrecisionConfig(args.digits)
    ends = [float(x) for x in args.E.split(",")]
    E = sg.normalize([(ends[i], ends[i + 1]) for i in range(0, len(ends), 2)])
    ks = [int(x) for x in args.k.split(",")]
    avals = [float(x) for x in args.a.split(",")]

    rows = []
    for k in ks:
        for a in avals:
            spec = sg.SourceSpec(a, k, k)
            for ident in sg.IDENTITY_IDS:
                t0 = time.time()
                rep = check_identity(ident, spec, E, prec=prec)
                rows.append({
                    "identity": ident, "k": k, "a": a,
                    "residual": rep.residual,
                    "order": rep.convergence_order,
                    "converged": rep.converged,
                    "seconds": round(time.time() - t0, 2),
                })
                print(f"{ident:10s} k={k} a={a}: residual={rep.residual:.3e} "
                      f"order={rep.convergence_order:.2f}")

    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

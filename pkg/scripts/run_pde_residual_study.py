#!/usr/bin/env python3
"""Step-refinement studies for both fourth-order PDEs, JSON to stdout.

The source-ensemble PDE runs over asymmetric single- and double-interval
sets (the symmetric stratum satisfies it identically); the transition-kernel
PDE runs one symmetric and one asymmetric set for contrast.

Usage: python scripts/run_pde_residual_study.py [--digits 40] [--skip-kernel]
"""

import argparse
import json
import sys
import time

import sourcegap as sg
from sourcegap.pde_source import residual_thm01
from sourcegap.pearcey import residual_thm02


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--digits", type=int, default=40)
    ap.add_argument("--kernel-digits", type=int, default=25)
    ap.add_argument("--skip-kernel", action="store_true")
    args = ap.parse_args()

    out = {"source_pde": [], "kernel_pde": []}
    prec = sg.PrecisionConfig(args.digits)
    for (k1, k2, a, Ep) in [
        (1, 1, 1.0, [(-1.2, 1.7)]),
        (2, 2, 1.5, [(-2, -0.5), (0.3, 1.8)]),
        (2, 1, 1.0, [(-1.0, 1.6)]),
    ]:
        t0 = time.time()
        rep = residual_thm01(sg.SourceSpec(a, k1, k2), sg.normalize(Ep), prec=prec)
        out["source_pde"].append({
            "k1": k1, "k2": k2, "a": a, "set": Ep,
            "relative_residual": rep.relative_residual,
            "trend": list(rep.trend), "converged": rep.converged,
            "seconds": round(time.time() - t0, 1),
        })

    if not args.skip_kernel:
        kprec = sg.PrecisionConfig(args.kernel_digits)
        for (t, Ep) in [(0.0, [(-1, 1)]), (0.3, [(-0.7, 1.2)])]:
            t0 = time.time()
            rep = residual_thm02(t, sg.normalize(Ep), prec=kprec)
            out["kernel_pde"].append({
                "t": t, "set": Ep,
                "relative_residual": rep.relative_residual,
                "trend": list(rep.trend), "converged": rep.converged,
                "degenerate": rep.degenerate,
                "seconds": round(time.time() - t0, 1),
            })

    json.dump(out, sys.stdout, indent=2)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())

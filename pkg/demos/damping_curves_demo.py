"""Numerical damping of the stiff integrators on the oscillator test rig.

We apply each one-step map to q'' + omega^2 q = 0 and fit the decay to the
modified oscillator q'' + d q' + omega^2 q = 0; d/omega as a function of
omega*h is the "damping curve" of the method. The trapezoidal rule is
conservative (d identically 0), backward Euler damps heavily, and the
second-order one-step methods sit in between.

Run:  python3 demos/damping_curves_demo.py [--out OUT_DIR]
"""

import argparse
import csv
import os

import numpy as np

from softdyn import analysis
from softdyn.analysis import Method


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="demo_out/damping")
    args = ap.parse_args()

    grid = np.geomspace(1e-2, 1e2, 64)
    methods = [Method.BE, Method.TR, Method.BDF2, Method.TRBDF2, Method.SDIRK]

    os.makedirs(args.out, exist_ok=True)
    curves = {}
    for m in methods:
        c = analysis.damping_curve(m, grid)
        curves[m.value] = c.d_over_omega
        path = os.path.join(args.out, f"damping_{m.value}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["omega_h", "d_over_omega"])
            w.writerows(zip(grid, c.d_over_omega))
        print(f"wrote {path}")

    # a few landmark values, printed as a small table
    print(f"\n{'omega*h':>8}  " + "  ".join(f"{m.value:>9}" for m in methods))
    for wh in (0.1, 1.0, 10.0, 100.0):
        vals = [analysis.damping_coefficient(m, wh, 1.0) / wh for m in methods]
        print(f"{wh:8.2f}  " + "  ".join(f"{v:9.4f}" for v in vals))

    print("\nObservations:")
    print(" - TR stays at machine zero: no artificial damping.")
    print(" - BE follows ln(1 + (omega h)^2): heavy damping everywhere.")
    print(" - BDF2 damps more than TR-BDF2 near omega*h ~ 1 and less for")
    print("   omega*h >> 1; the two DIRK curves track each other closely.")


if __name__ == "__main__":
    main()

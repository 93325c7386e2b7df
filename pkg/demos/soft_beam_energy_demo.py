"""Energy retention of different integrators on a soft clamped beam.

A stable neo-Hookean beam (E = 1e5 Pa, nu = 0.4) is fixed at both ends and
released under gravity. Every integrator here is stable at h = 1/60, but
they dissipate very different amounts of energy: backward Euler kills the
motion within a couple of seconds, the subspace-exponential methods keep
the low modes alive, and the two-stage DIRK methods barely damp at all.

Run:  python3 demos/soft_beam_energy_demo.py [--duration 2.0] [--out DIR]
(the full 5 s comparison takes a few minutes; the default is shorter)
"""

import argparse
import csv
import os
import time

import numpy as np

import softdyn as sd
from softdyn.driver import ReductionConfig, run_simulation
from softdyn.reduction import RefreshPolicy
from softdyn.system import SimState, state_energy


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--duration", type=float, default=2.0)
    ap.add_argument("--out", default="demo_out/beam")
    args = ap.parse_args()

    mesh = sd.beam_mesh(8, 2, 2, 1.0, 0.25, 0.25)
    mat = sd.MaterialParams(sd.Material.STABLE_NEO_HOOKEAN, 1e5, 0.4, 1000.0)
    model = sd.ForceModel(mesh, mat, sd.RayleighParams(), (0, 0, -9.8), None)
    h = 1.0 / 60.0
    red = ReductionConfig(s=10, policy=RefreshPolicy.EVERY_STEP)

    runs = [("BE", None), ("SIERE", red), ("STRSBDF2ERE", red),
            ("TRBDF2", None), ("SDIRK", None)]

    os.makedirs(args.out, exist_ok=True)
    print(f"{'method':>12}  {'E(T)-E(0) [J]':>14}  {'wall [s]':>9}")
    for method, rcfg in runs:
        t0 = time.time()
        frames, _ = run_simulation(model, method, h, args.duration, red=rcfg)
        wall = time.time() - t0
        energies = []
        for f in frames:
            ke, pe, pg = state_energy(model, f)
            energies.append((f.t, ke, pe, pg, ke + pe + pg))
        retained = energies[-1][4] - energies[0][4]
        path = os.path.join(args.out, f"energy_{method}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "ke", "pe_elastic", "pe_gravity", "total"])
            w.writerows(energies)
        print(f"{method:>12}  {retained:14.4f}  {wall:9.1f}")

    print("\nLess negative = livelier animation. BE settles to the sagged")
    print("equilibrium; the exponential-subspace methods preserve the low")
    print("bending modes; TR-BDF2 and SDIRK retain almost everything.")


if __name__ == "__main__":
    main()

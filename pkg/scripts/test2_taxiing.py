"""Taxiing ramp 1 -> 80 m/s with pothole pulses: open loop, ZAD and MCS."""
import argparse
import math
from pathlib import Path

import numpy as np

from shimmy import scenarios as sc
from shimmy.controllers import McsConfig, ZadConfig
from shimmy.integrator import StepConfig, simulate
from shimmy.observer import published_cert


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--dt", type=float, default=1e-5)
    ap.add_argument("--outdir", type=Path, default=Path("."))
    args = ap.parse_args()

    scen = sc.test2()
    plant_tire, ctrl_tire = scen.tires()
    for name, ctrl in (("none", None), ("zad", ZadConfig()), ("mcs", McsConfig())):
        traj = simulate(scen.params, plant_tire, StepConfig(args.dt, scen.duration, record_every=10),
                        controller=ctrl, cert=published_cert(), observer_tire=ctrl_tire,
                        disturbance=scen.disturbance, velocity=scen.velocity_profile)
        traj.to_csv(args.outdir / f"test2_{name}.csv")
        fast = traj.V > 25
        print(f"{name:4s} max|psi| {np.abs(traj.psi).max():.5f} rad "
              f"({math.degrees(np.abs(traj.psi).max()):.2f} deg), "
              f"max|psi| once V > 25: {np.abs(traj.psi[fast]).max():.4f} rad")


if __name__ == "__main__":
    main()

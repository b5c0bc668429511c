"""Burst-tire impulse at 80 m/s: open loop, ZAD and MCS.

Prints overshoot, settling time and duty-cycle spread and writes one CSV
per run.
"""
import argparse
from pathlib import Path

import numpy as np

from shimmy import analysis
from shimmy import scenarios as sc
from shimmy.controllers import McsConfig, ZadConfig
from shimmy.integrator import StepConfig, simulate
from shimmy.observer import published_cert


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--dt", type=float, default=1e-5)
    ap.add_argument("--zad-period", type=float, default=1e-3)
    ap.add_argument("--outdir", type=Path, default=Path("."))
    args = ap.parse_args()

    scen = sc.test1()
    plant_tire, ctrl_tire = scen.tires()
    for name, ctrl in (("none", None), ("zad", ZadConfig(T=args.zad_period)), ("mcs", McsConfig())):
        traj = simulate(scen.params, plant_tire, StepConfig(args.dt, scen.duration), controller=ctrl,
                        cert=published_cert(), observer_tire=ctrl_tire, disturbance=scen.disturbance,
                        velocity=scen.velocity_profile)
        traj.to_csv(args.outdir / f"test1_{name}.csv")
        m = analysis.perf_metrics(traj, 0.2)
        line = f"{name:4s} overshoot {m.overshoot:.5f} rad  settle {m.settle_time:.3f} s"
        if name == "zad":
            tail = traj.t >= traj.t[-1] - 0.5
            line += f"  std(d_c) over last 0.5 s {np.std(traj.d_c[tail]):.4f}"
        print(line)


if __name__ == "__main__":
    main()

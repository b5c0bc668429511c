"""Open-loop bifurcation diagrams over V for both tire models.

Writes bifurcation_<tire>.csv next to this script (or into --outdir) and
prints the detected Hopf speed and the peak LCO amplitude.
"""
import argparse
import math
import time
from pathlib import Path

from shimmy import analysis
from shimmy.dynamics import NlgParams
from shimmy.tire import TireKind, TireModel


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--dt", type=float, default=1e-5)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--outdir", type=Path, default=Path("."))
    args = ap.parse_args()

    params = NlgParams()
    cfg = analysis.SweepConfig(dt=args.dt)
    for kind in TireKind:
        t0 = time.perf_counter()
        pts = analysis.bifurcation_sweep(params, TireModel.from_params(kind, params), cfg, jobs=args.jobs)
        analysis.write_sweep_csv(pts, args.outdir / f"bifurcation_{kind.value}.csv")
        hopf = analysis.detect_hopf(pts)
        peak = analysis.peak_point(pts)
        print(f"{kind.value:9s} hopf_v={hopf if hopf is None else round(hopf, 3)}  "
              f"peak amplitude {peak.amplitude:.4f} rad ({math.degrees(peak.amplitude):.2f} deg) at V={peak.V:g}  "
              f"[{time.perf_counter() - t0:.1f} s]")


if __name__ == "__main__":
    main()

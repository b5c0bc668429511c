"""Bifurcation sweeps over V, oscillation frequency and closed-loop metrics."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

from . import _kernels as K
from .dynamics import V_MIN, NlgParams
from .integrator import DIVERGENCE_BOUND, Trajectory
from .tire import TireModel

log = logging.getLogger(__name__)

HOPF_THRESHOLD = 1e-3
CROSSING_HYSTERESIS = 1e-4
SAMPLE_PERIOD = 1e-4
SWEEP_X0 = (0.05, 0.0, 0.0)


@dataclass(frozen=True)
class BifurcationPoint:
    V: float
    psi_min: float
    psi_max: float
    alpha_min: float
    alpha_max: float
    dominant_freq: float = math.nan
    diverged: bool = False

    def __post_init__(self):
        if not self.diverged and not (self.psi_min <= self.psi_max and self.alpha_min <= self.alpha_max):
            raise ValueError("extrema out of order")

    @property
    def amplitude(self) -> float:
        """Half the peak-to-peak yaw over the window; inf if the run diverged."""
        if self.diverged:
            return math.inf
        return 0.5 * (self.psi_max - self.psi_min)


@dataclass(frozen=True)
class SweepConfig:
    V_start: float = 1.0
    V_stop: float = 80.0
    step: float = 1.0
    transient: float = 5.0
    window: float = 1.0
    dt: float = 1e-5
    x0: tuple = SWEEP_X0

    def __post_init__(self):
        if not (self.transient > 0 and self.window > 0 and self.step > 0 and self.dt > 0):
            raise ValueError("transient, window, step and dt must be positive")
        if self.V_start < V_MIN or self.V_stop > 80.0 or self.V_stop < self.V_start:
            raise ValueError(f"V range must lie within [{V_MIN}, 80]")

    @property
    def velocities(self) -> np.ndarray:
        n = int(math.floor((self.V_stop - self.V_start) / self.step + 1e-9))
        return self.V_start + self.step * np.arange(n + 1)


@dataclass(frozen=True)
class PerfMetrics:
    overshoot: float
    settle_time: float
    dominant_freq: float | None
    settled: bool = True


def _sweep_point(args) -> BifurcationPoint:
    params, model, V, cfg = args
    n_tr = int(round(cfg.transient / cfg.dt))
    n_win = int(round(cfg.window / cfg.dt))
    every = max(1, int(round(SAMPLE_PERIOD / cfg.dt)))
    status, ext, samples = K.open_loop_window(
        params.array, model.array, float(V), np.asarray(cfg.x0, dtype=float), cfg.dt,
        n_tr, n_win, every, DIVERGENCE_BOUND)
    if status != K.STATUS_OK:
        log.warning("open loop diverged at V=%g", V)
        return BifurcationPoint(float(V), math.nan, math.nan, math.nan, math.nan, math.nan, True)
    t = np.arange(len(samples)) * every * cfg.dt
    f = frequency_from_samples(t, samples)
    return BifurcationPoint(float(V), *map(float, ext), math.nan if f is None else float(f), False)


def bifurcation_sweep(params: NlgParams, model: TireModel, cfg: SweepConfig = SweepConfig(),
                      jobs: int = 1) -> list[BifurcationPoint]:
    """Open-loop steady-state extrema of psi and alpha at each V of the grid.

    Each V starts from ``cfg.x0``; the first ``cfg.transient`` seconds are
    discarded and extrema are taken over every step of the window. Divergent
    runs are kept as points flagged ``diverged``. With ``jobs > 1`` the grid
    is spread over a process pool; results come back in V order.
    """
    tasks = [(params, model, float(V), cfg) for V in cfg.velocities]
    if jobs <= 1:
        return [_sweep_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_point, tasks))


def detect_hopf(points: list[BifurcationPoint], amp_threshold: float = HOPF_THRESHOLD) -> float | None:
    """Smallest V whose amplitude exceeds the threshold, or None.

    The crossing is located by linear interpolation of the amplitude between
    the two bracketing grid points. A divergent first crossing returns that
    point's V.
    """
    if not amp_threshold > 0:
        raise ValueError("threshold must be positive")
    Vs = [p.V for p in points]
    if Vs != sorted(Vs):
        raise ValueError("points must be sorted by V")
    for k, pt in enumerate(points):
        if pt.amplitude > amp_threshold:
            if k == 0:
                return pt.V
            prev = points[k - 1]
            if pt.diverged:
                return pt.V
            frac = (amp_threshold - prev.amplitude) / (pt.amplitude - prev.amplitude)
            return prev.V + frac * (pt.V - prev.V)
    return None


def peak_point(points: list[BifurcationPoint]) -> BifurcationPoint:
    finite = [p for p in points if not p.diverged]
    return max(finite, key=lambda p: p.amplitude)


def _upward_crossings(t: np.ndarray, y: np.ndarray, h: float) -> np.ndarray:
    # Schmitt trigger: arm below -h, fire on the next crossing of zero after
    # passing +h; the firing instant is interpolated at the zero crossing.
    times = []
    armed = False
    last_neg = -1
    for i in range(len(y)):
        if y[i] < -h:
            armed = True
        if y[i] < 0:
            last_neg = i
        elif armed and y[i] > h:
            j = last_neg
            t0 = t[j] - y[j] * (t[j + 1] - t[j]) / (y[j + 1] - y[j])
            times.append(t0)
            armed = False
    return np.array(times)


def frequency_estimates(t, y, hysteresis: float = CROSSING_HYSTERESIS) -> tuple[float, float] | None:
    """(zero-crossing, peak-spacing) frequency estimates in Hz, or None.

    The signal is mean-removed first. None means fewer than two upward
    crossings beyond the hysteresis band, i.e. no oscillation.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    y = y - y.mean()
    up = _upward_crossings(t, y, hysteresis)
    if len(up) < 2:
        return None
    f_zero = (len(up) - 1) / (up[-1] - up[0])
    # one peak per cycle: the sample maximum between consecutive crossings
    peaks = []
    for a, b in zip(up[:-1], up[1:]):
        m = (t >= a) & (t < b)
        if m.any():
            idx = np.flatnonzero(m)
            peaks.append(t[idx[np.argmax(y[idx])]])
    f_peak = (len(peaks) - 1) / (peaks[-1] - peaks[0]) if len(peaks) >= 2 else f_zero
    return f_zero, f_peak


def frequency_from_samples(t, y, hysteresis: float = CROSSING_HYSTERESIS) -> float | None:
    est = frequency_estimates(t, y, hysteresis)
    if est is None:
        return None
    f_zero, f_peak = est
    if abs(f_peak - f_zero) > 0.02 * f_zero:
        log.info("zero-crossing (%.4g Hz) and peak-spacing (%.4g Hz) estimates disagree", f_zero, f_peak)
    return f_zero


def dominant_frequency(traj: Trajectory, signal: str = "psi", window: float | None = None,
                       hysteresis: float = CROSSING_HYSTERESIS) -> float | None:
    """Oscillation frequency of a state over the final ``window`` seconds."""
    cols = {"psi": traj.x[:, 0], "psi_dot": traj.x[:, 1], "alpha": traj.x[:, 2]}
    if signal not in cols:
        raise ValueError(f"unknown signal {signal!r}")
    t, y = traj.t, cols[signal]
    if window is not None:
        m = t >= t[-1] - window
        t, y = t[m], y[m]
    return frequency_from_samples(t, y, hysteresis)


def perf_metrics(traj: Trajectory, disturb_onset: float, settle_threshold: float = 1e-3) -> PerfMetrics:
    """Overshoot and settling time of psi after the disturbance onset.

    If |psi| is still above the threshold at the last sample the run never
    settled: ``settled`` is False and ``settle_time`` is inf.
    """
    if traj.t[-1] < disturb_onset:
        raise ValueError("trajectory ends before the disturbance onset")
    after = traj.t >= disturb_onset
    t, psi = traj.t[after], np.abs(traj.psi[after])
    overshoot = float(psi.max())
    above = np.flatnonzero(psi >= settle_threshold)
    if len(above) == 0:
        settle, settled = 0.0, True
    elif above[-1] == len(psi) - 1:
        settle, settled = math.inf, False
    else:
        settle, settled = float(t[above[-1] + 1] - disturb_onset), True
    return PerfMetrics(overshoot, settle, dominant_frequency(traj), settled)


CSV_HEADER = [f.name for f in fields(BifurcationPoint)]


def write_sweep_csv(points: list[BifurcationPoint], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for p in points:
            row = list(astuple(p))
            row[-1] = int(row[-1])
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def read_sweep_csv(path) -> list[BifurcationPoint]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [BifurcationPoint(float(r["V"]), float(r["psi_min"]), float(r["psi_max"]),
                             float(r["alpha_min"]), float(r["alpha_max"]),
                             float(r["dominant_freq"]), bool(int(r["diverged"]))) for r in rows]

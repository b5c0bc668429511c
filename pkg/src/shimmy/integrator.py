"""Fixed-step RK4 time stepping of plant, observer and controller."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels as K
from .controllers import AdaptationDivergence, McsConfig, ZadConfig
from .dynamics import V_MIN, NlgParams, SingularVelocityError
from .observer import ObserverCert
from .tire import TireModel

DIVERGENCE_BOUND = 1e6

CSV_HEADER = ["t", "psi", "psi_dot", "alpha", "alpha_hat", "psi_hat", "psi_dot_hat", "u", "d_c", "zeta", "V"]


class DivergenceError(ArithmeticError):
    def __init__(self, t: float, x):
        self.t = float(t)
        self.x = np.asarray(x)
        super().__init__(f"integration diverged at t={self.t:.6g} s, state={self.x}")


@dataclass(frozen=True)
class StepConfig:
    dt: float = 1e-5
    t_end: float = 2.0
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError("record_every must be an integer >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    x_hat: np.ndarray
    u: np.ndarray
    d_c: np.ndarray
    zeta: np.ndarray
    V: np.ndarray
    cycles: np.ndarray | None = None

    @property
    def psi(self) -> np.ndarray:
        return self.x[:, 0]

    @property
    def alpha(self) -> np.ndarray:
        return self.x[:, 2]

    @property
    def error(self) -> np.ndarray:
        return self.x_hat - self.x

    def __len__(self):
        return len(self.t)

    def to_csv(self, path) -> None:
        cols = np.column_stack([self.t, self.x, self.x_hat[:, [2, 0, 1]], self.u, self.d_c, self.zeta, self.V])
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for row in cols:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        data = np.genfromtxt(path, delimiter=",", names=True)
        col = lambda *names: np.column_stack([data[n] for n in names])
        return cls(t=data["t"], x=col("psi", "psi_dot", "alpha"),
                   x_hat=col("psi_hat", "psi_dot_hat", "alpha_hat"),
                   u=data["u"], d_c=data["d_c"], zeta=data["zeta"], V=data["V"])


def rk4_step(field: Callable, x, dt: float, t: float = 0.0) -> np.ndarray:
    """Classical RK4 step of x' = field(x).

    ``field`` takes the state only; wrap time dependence in a closure.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    k1 = np.asarray(field(x))
    k2 = np.asarray(field(x + 0.5 * dt * k1))
    k3 = np.asarray(field(x + 0.5 * dt * k2))
    k4 = np.asarray(field(x + dt * k3))
    for k in (k1, k2, k3, k4):
        if not np.all(np.isfinite(k)):
            raise DivergenceError(t, x)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def sample_signal(signal, t: np.ndarray, default: float) -> np.ndarray:
    """Evaluate a scalar signal of time on a grid (constant or callable)."""
    if signal is None:
        return np.full(t.shape, float(default))
    if not callable(signal):
        return np.full(t.shape, float(signal))
    try:
        out = np.asarray(signal(t), dtype=float)
        if out.shape == t.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(signal(float(s))) for s in t])


def simulate(params: NlgParams, plant_tire: TireModel, cfg: StepConfig = StepConfig(), *,
             controller: ZadConfig | McsConfig | None = None, cert: ObserverCert | None = None,
             observer_tire: TireModel | None = None, disturbance=None, velocity=None,
             x0=(0.0, 0.0, 0.0), x_hat0=(0.0, 0.0, 0.0)) -> Trajectory:
    """Integrate the closed loop and return the recorded trajectory.

    Without a certificate the observer is off and the ``x_hat`` columns are
    NaN; controllers need a certificate because they only act on estimates.
    The disturbance enters the plant only. ``velocity`` and ``disturbance``
    may be constants or functions of time (vectorised or scalar).
    An MCS config without ``A_m`` uses the linear plant at the current speed
    as reference model; B_m defaults to B. With ZAD, ``cycles`` holds one row [d_k, sign changes of u] per
    completed period.
    """
    if controller is not None and cert is None:
        raise ValueError("a controller needs an observer certificate")
    observer_tire = observer_tire or plant_tire
    n = cfg.n_steps
    t_half = np.arange(2 * n + 1) * (0.5 * cfg.dt)
    v_half = sample_signal(velocity, t_half, params.V)
    z_half = sample_signal(disturbance, t_half, 0.0)
    if not np.all(v_half >= V_MIN):
        raise SingularVelocityError(f"velocity profile drops below V_min={V_MIN} m/s")

    Pm, Am, am_fixed = np.eye(3), np.zeros((3, 3)), False
    Bm = np.array([0.0, 1.0 / params.I_z, 0.0])
    if isinstance(controller, ZadConfig):
        per = controller.T / cfg.dt
        if abs(per - round(per)) > 1e-9 or round(per) < 2:
            raise ValueError(f"PWM period T={controller.T} must be an integer multiple (>=2) of dt={cfg.dt}")
        per_steps = int(round(per))
        kind, cp = K.CTRL_ZAD, np.array([controller.T, controller.k_s, controller.mu])
    elif isinstance(controller, McsConfig):
        kind, cp, Pm = K.CTRL_MCS, np.array([controller.k_P, controller.k_I]), controller.P_m
        if controller.A_m is not None:
            Am, am_fixed = np.asarray(controller.A_m, dtype=float), True
        if controller.B_m is not None:
            Bm = np.asarray(controller.B_m, dtype=float)
    elif controller is None:
        kind, cp = K.CTRL_NONE, np.zeros(1)
    else:
        raise TypeError(f"unknown controller {controller!r}")

    use_obs = cert is not None
    L = np.array(cert.L) if use_obs else np.zeros((3, 2))
    x0 = np.asarray(x0, dtype=float)
    xh0 = np.asarray(x_hat0, dtype=float)
    status, fail, X, XH, U, DC, CYC = K.closed_loop(
        params.array, plant_tire.array, observer_tire.array, L, use_obs, kind, cp,
        np.ascontiguousarray(Pm, dtype=float), np.ascontiguousarray(Am), np.ascontiguousarray(Bm), am_fixed, v_half, z_half, cfg.dt, n, int(cfg.record_every),
        x0, xh0, DIVERGENCE_BOUND)
    if status == K.STATUS_GAIN:
        raise AdaptationDivergence(f"MCS gain exceeded {K.GAIN_LIMIT:g} at t={fail * cfg.dt:.6g} s")
    if status != K.STATUS_OK:
        raise DivergenceError(fail * cfg.dt, X[-1] if len(X) else x0)
    idx = np.arange(len(X)) * cfg.record_every
    if not use_obs:
        XH = np.full_like(XH, np.nan)
    return Trajectory(t=idx * cfg.dt, x=X, x_hat=XH, u=U, d_c=DC, zeta=z_half[2 * idx], V=v_half[2 * idx],
                      cycles=CYC[:n // per_steps] if kind == K.CTRL_ZAD else None)

"""Shimmy suppression laws: zero-average-dynamics PWM and MCS adaptive control.

Both laws only see the observer estimate ``x_hat``. The arithmetic shared
with the compiled simulation loop lives in ``_kernels`` and is called from
here, so the per-step functions below and the fast path stay identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .dynamics import NlgParams, build_matrices
from .tire import TireModel


class DegenerateSwitchingError(ZeroDivisionError):
    pass


class AdaptationDivergence(RuntimeError):
    pass


# ---------------------------------------------------------------- ZAD


@dataclass(frozen=True)
class ZadConfig:
    T: float = 1e-3
    k_s: float = 0.5
    mu: float = 1000.0

    def __post_init__(self):
        if not (self.T > 0 and self.k_s > 0 and self.mu > 0):
            raise ValueError("ZAD needs T, k_s and mu all positive")


@dataclass(frozen=True)
class ZadCycleState:
    d_k: float
    t_cycle_start: float


def zad_sliding(cfg: ZadConfig, psi: float, psi_dot: float) -> float:
    """S = psi + k_s psi_dot; on S = 0 the yaw decays with time constant k_s."""
    return psi + cfg.k_s * psi_dot


def zad_sliding_derivatives(params: NlgParams, model: TireModel, cfg: ZadConfig, x_hat) -> tuple[float, float]:
    """dS/dt at u = +mu and u = -mu, with alpha taken from the estimate."""
    x = np.asarray(x_hat, dtype=float)
    return K.zad_slopes(params.array, model.array, float(params.V), cfg.k_s, cfg.mu,
                        float(x[0]), float(x[1]), float(x[2]))


def zad_duty_cycle(cfg: ZadConfig, S: float, S_dot_1: float, S_dot_2: float, dt: float | None = None) -> float:
    """Duty cycle d_k from the linearised zero-average condition.

    The raw value is clamped to [0, T]. If ``dt`` is given it is then rounded
    to the nearest even multiple of dt so both half pulses end on a step.
    """
    try:
        return K.zad_duty(cfg.T, float(S), float(S_dot_1), float(S_dot_2), 0.0 if dt is None else float(dt))
    except ZeroDivisionError as exc:
        raise DegenerateSwitchingError(str(exc)) from None


def zad_control_signal(cycle: ZadCycleState, cfg: ZadConfig, t: float) -> float:
    """Centered PWM: +mu for the first and last d_k/2 of the period, -mu between."""
    tau = t - cycle.t_cycle_start
    half = 0.5 * cycle.d_k
    if tau <= half or tau >= cfg.T - half:
        return cfg.mu
    return -cfg.mu


# ---------------------------------------------------------------- MCS


@dataclass(frozen=True)
class McsConfig:
    k_P: float = 1e3
    k_I: float = 1e4
    P_m: np.ndarray = field(default_factory=lambda: np.eye(3))
    A_m: np.ndarray | None = None
    B_m: np.ndarray | None = None

    def __post_init__(self):
        if not (self.k_P > 0 and self.k_I > 0):
            raise ValueError("k_P and k_I must be positive")
        Pm = np.asarray(self.P_m, dtype=float)
        if not (np.allclose(Pm, Pm.T) and np.linalg.eigvalsh(Pm)[0] > 0):
            raise ValueError("P_m must be symmetric positive definite")
        object.__setattr__(self, "P_m", Pm)

    def for_plant(self, params: NlgParams) -> "McsConfig":
        """Reference model equal to the linear part of the plant at params.V."""
        m = build_matrices(params)
        return replace(self, A_m=np.array(m.A), B_m=np.array(m.B))


@dataclass
class McsState:
    K: np.ndarray = field(default_factory=lambda: np.zeros(3))
    K_integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    x_m: np.ndarray = field(default_factory=lambda: np.zeros(3))
    wx_prev: np.ndarray | None = None
    w: float = 0.0


def mcs_update(cfg: McsConfig, state: McsState, x_hat, dt: float) -> tuple[float, McsState]:
    """One sample of the MCS law; returns the control and the next state.

    The tracking error is e_m = x_hat - x_m and w = B_m^T P_m e_m. The
    integral of w x_hat^T is accumulated with the trapezoidal rule between
    consecutive samples; the control is u = -K x_hat and is meant to be held
    until the next call. The reference model is then advanced one RK4 step.
    """
    if cfg.A_m is None or cfg.B_m is None:
        raise ValueError("McsConfig needs A_m and B_m; use cfg.for_plant(params)")
    xh = np.asarray(x_hat, dtype=float)
    if not np.all(np.isfinite(xh)):
        raise ValueError("x_hat must be finite")
    k_int = state.K_integral.copy()
    first = state.wx_prev is None
    wx_prev = np.zeros(3) if first else state.wx_prev.copy()
    u, w = K.mcs_gain(cfg.k_P, cfg.k_I, np.asarray(cfg.B_m, dtype=float), cfg.P_m,
                      state.x_m, xh, k_int, wx_prev, float(dt), first)
    gain = cfg.k_P * w * xh + k_int
    if not np.all(np.abs(gain) < K.GAIN_LIMIT):
        raise AdaptationDivergence(f"MCS gain left the bounded region: K={gain}")

    xm_next = np.array(state.x_m, dtype=float)
    K.reference_step_matrix(np.asarray(cfg.A_m, dtype=float), xm_next, float(dt))
    return float(u), McsState(K=gain, K_integral=k_int, x_m=xm_next, wx_prev=wx_prev, w=float(w))

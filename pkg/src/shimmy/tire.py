"""Tire moment approximations: piecewise-smooth and smooth (rational) forms.

All angles are radians. ``M_z`` is the aligning torque about the contact
center, ``F_y`` the side force, and the ground moment acting on the strut is
``M_G = M_z - e * F_y``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K


class TireKind(enum.Enum):
    PIECEWISE = "piecewise"
    SMOOTH = "smooth"


ALPHA_G = 10 * math.pi / 180
DELTA = 5 * math.pi / 180
ALPHA_M = 3 * math.pi / 180
GAMMA_M = 0.1 * ALPHA_G / math.pi
ALPHA_F = 3 * ALPHA_G
GAMMA_F = 0.085

# grid step for the numerical Jacobian bound of the smooth kind
BOUND_GRID_STEP = 1e-5


@dataclass(frozen=True)
class TireModel:
    kind: TireKind = TireKind.PIECEWISE
    alpha_g: float = ALPHA_G
    delta: float = DELTA
    alpha_M: float = ALPHA_M
    gamma_M: float = GAMMA_M
    alpha_F: float = ALPHA_F
    gamma_F: float = GAMMA_F
    c_F_alpha: float = 20.0
    c_M_alpha: float = -2.0
    F_z: float = 9000.0
    e: float = 0.1
    _arr: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        kind = TireKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not (self.alpha_g > self.delta > 0 and self.alpha_M > 0 and self.alpha_F > 0):
            raise ValueError("tire shape constants must satisfy alpha_g > delta > 0, alpha_M > 0, alpha_F > 0")
        arr = np.array([
            0.0 if kind is TireKind.PIECEWISE else 1.0,
            self.alpha_g, self.delta, self.alpha_M, self.gamma_M, self.alpha_F,
            self.gamma_F, self.c_F_alpha, self.c_M_alpha, self.F_z, self.e,
        ], dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tire constants must be finite")
        object.__setattr__(self, "_arr", arr)

    @classmethod
    def from_params(cls, kind, params) -> "TireModel":
        """Build a tire sharing F_z, e and the slope constants of ``params``."""
        return cls(kind=TireKind(kind), c_F_alpha=params.c_F_alpha, c_M_alpha=params.c_M_alpha,
                   F_z=params.F_z, e=params.e)

    @property
    def array(self) -> np.ndarray:
        return self._arr


def _check(alpha):
    a = np.asarray(alpha, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"slip angle must be finite, got {alpha!r}")
    return a


def _apply(fn, model, alpha):
    a = _check(alpha)
    if a.ndim == 0:
        return fn(model.array, float(a))
    arr = model.array
    return np.array([fn(arr, float(v)) for v in a.ravel()]).reshape(a.shape)


def aligning_torque(model: TireModel, alpha):
    """Aligning torque M_z(alpha) in N*m. Accepts scalars or arrays."""
    return _apply(K.aligning_torque, model, alpha)


def side_force(model: TireModel, alpha):
    """Side force F_y(alpha) in N."""
    return _apply(K.side_force, model, alpha)


def ground_moment(model: TireModel, alpha):
    """M_G(alpha) = M_z(alpha) - e F_y(alpha)."""
    return _apply(K.ground_moment, model, alpha)


def ground_moment_slope(model: TireModel, alpha):
    """Analytic dM_G/dalpha (closed branch taken at the piecewise kinks)."""
    return _apply(K.ground_moment_slope, model, alpha)


def slope_range(model: TireModel, alpha_max: float = math.pi / 2, I_z: float = 1.0,
                step: float = BOUND_GRID_STEP) -> tuple[float, float]:
    """Min and max of d(M_G/I_z)/dalpha over |alpha| <= alpha_max.

    For the piecewise kind the extrema are the closed-form branch values
    (origin, delta and alpha_g); for the smooth kind they come from a grid.
    """
    if model.kind is TireKind.PIECEWISE:
        # each branch is monotone in |alpha|, so its endpoints bound it
        m1 = model.F_z * model.c_M_alpha
        m2 = model.e * model.c_F_alpha * model.F_z
        k = math.pi / model.alpha_g
        d = min(model.delta, alpha_max)
        vals = [m1 - m2, m1 * math.cos(k * d) - m2]
        if alpha_max > model.delta:
            vals += [m1 * math.cos(k * model.delta), m1 * math.cos(k * min(model.alpha_g, alpha_max))]
        if alpha_max > model.alpha_g:
            vals.append(0.0)
        return min(vals) / I_z, max(vals) / I_z
    grid = np.arange(0.0, alpha_max + step / 2, step)
    s = ground_moment_slope(model, grid)
    return float(s.min()) / I_z, float(s.max()) / I_z


def jacobian_bound(model: TireModel, I_z: float = 1.0) -> float:
    """sup over alpha of |d(M_G/I_z)/dalpha|: the Lipschitz constant of f."""
    lo, hi = slope_range(model, I_z=I_z)
    return max(abs(lo), abs(hi))

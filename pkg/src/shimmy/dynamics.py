"""Nose-landing-gear yaw/slip model in state-space form.

State ``x = [psi, psi_dot, alpha]`` (rad, rad/s, rad); measured output
``y = [psi, psi_dot]``. The plant is

    x' = A(V) x + f(x) + B u + B zeta,   f(x) = [0, M_G(alpha)/I_z, 0]

with the tire damping (kappa/V) psi_dot folded into A[1, 1].
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .tire import TireModel, ground_moment

V_MIN = 0.5


class SingularVelocityError(ValueError):
    """Raised when V is too small for the kappa/V tire-damping term."""


class StateVec(NamedTuple):
    psi: float
    psi_dot: float
    alpha: float


@dataclass(frozen=True)
class NlgParams:
    V: float = 80.0
    a: float = 0.1
    e: float = 0.1
    I_z: float = 1.0
    F_z: float = 9000.0
    c: float = -100000.0
    c_F_alpha: float = 20.0
    c_M_alpha: float = -2.0
    k: float = -10.0
    kappa: float = -270.0
    sigma: float = 0.3

    def __post_init__(self):
        if not self.I_z > 0 or not self.sigma > 0:
            raise ValueError("I_z and sigma must be positive")
        if self.V < 0:
            raise ValueError("forward velocity must be non-negative")

    def with_velocity(self, V: float) -> "NlgParams":
        return replace(self, V=float(V))

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def array(self) -> np.ndarray:
        return np.array([self.a, self.e, self.I_z, self.c, self.k, self.kappa, self.sigma])


@dataclass(frozen=True)
class PlantMatrices:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray


def _check_velocity(V: float) -> None:
    if not V >= V_MIN:
        raise SingularVelocityError(f"V={V} m/s is below V_min={V_MIN} m/s")


def strut_moment(params: NlgParams, psi: float, psi_dot: float) -> float:
    """Elastic plus viscous strut torque M_N = c psi + k psi_dot."""
    return params.c * psi + params.k * psi_dot


def build_matrices(params: NlgParams) -> PlantMatrices:
    _check_velocity(params.V)
    p, V = params, params.V
    A = np.array([
        [0.0, 1.0, 0.0],
        [p.c / p.I_z, p.k / p.I_z + p.kappa / (p.I_z * V), 0.0],
        [V / p.sigma, (p.e - p.a) / p.sigma, -V / p.sigma],
    ])
    B = np.array([0.0, 1.0 / p.I_z, 0.0])
    C = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    for m in (A, B, C):
        m.setflags(write=False)
    return PlantMatrices(A, B, C)


def nonlinearity(params: NlgParams, model: TireModel, x) -> np.ndarray:
    """f(x) = [0, M_G(alpha)/I_z, 0]."""
    return np.array([0.0, ground_moment(model, x[2]) / params.I_z, 0.0])


def vector_field(params: NlgParams, model: TireModel, x, u: float = 0.0, zeta: float = 0.0) -> np.ndarray:
    """x' = A x + f(x) + B (u + zeta)."""
    _check_velocity(params.V)
    x = np.asarray(x, dtype=float)
    return np.array(K.plant_field(params.array, model.array, float(params.V),
                                  float(x[0]), float(x[1]), float(x[2]), float(u + zeta)))

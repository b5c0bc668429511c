"""Luenberger observer for the slip angle and its QUAD-based certificate.

The observer runs a copy of the plant driven by output injection,

    x_hat' = A x_hat + B u + f(x_hat) - L (C x_hat - y),

and is guaranteed to converge when a certificate (P, L, Q, rho) satisfies

    (i)   (v1 - v2)^T P (f(v1) - f(v2)) <= rho |v1 - v2|^2   (QUAD)
    (ii)  P (A - LC) + (A - LC)^T P = -Q,  Q > 0
    (iii) lambda_min(Q) > rho.

Because f only has a second component depending on alpha, the left side of
(i) equals s * (dv^T P e2) * dv_alpha with s a secant slope of M_G/I_z.
Secant slopes lie in the range of the derivative, and the worst case over
that interval sits at an endpoint, which gives the smallest admissible rho
in closed form (:func:`quad_constant`).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from .dynamics import NlgParams, build_matrices, nonlinearity, vector_field
from .tire import TireModel, slope_range

log = logging.getLogger(__name__)

# operating box used for condition (i)
BOX = np.array([1.0, 50.0, 1.0])

LYAP_TOL = 1e-6
L_PENALTY = 1e-6


class CertificateInvalid(ValueError):
    def __init__(self, condition: str, detail: str):
        super().__init__(f"condition ({condition}) violated: {detail}")
        self.condition = condition


class SynthesisFailed(RuntimeError):
    def __init__(self, msg: str, best_margin: float):
        super().__init__(f"{msg} (best margin {best_margin:.6g})")
        self.best_margin = best_margin


@dataclass(frozen=True)
class ObserverCert:
    P: np.ndarray
    L: np.ndarray
    Q: np.ndarray
    rho: float
    V_design: float

    def __post_init__(self):
        for name, shape in (("P", (3, 3)), ("L", (3, 2)), ("Q", (3, 3))):
            m = np.array(getattr(self, name), dtype=float)
            if m.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {m.shape}")
            m.setflags(write=False)
            object.__setattr__(self, name, m)
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "V_design", float(self.V_design))

    def to_json(self) -> dict:
        return {"P": self.P.tolist(), "L": self.L.tolist(), "Q": self.Q.tolist(),
                "rho": self.rho, "v_design": self.V_design}

    @classmethod
    def from_json(cls, doc: dict) -> "ObserverCert":
        return cls(P=doc["P"], L=doc["L"], Q=doc["Q"], rho=doc["rho"], V_design=doc["v_design"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ObserverCert":
        return cls.from_json(json.loads(Path(path).read_text()))


# published design, obtained for the piecewise tire
PUBLISHED_P = np.array([[0.6995, 0.0, -0.004], [0.0, 0.001, 0.0], [-0.004, 0.0, 3.0]])
PUBLISHED_L = np.array([[21.0, -141.0], [0.12, 14705.0], [267.0, -0.18]])
PUBLISHED_Q = np.diag([29.437, 29.437, 1624.266])
PUBLISHED_RHO = 27.8644


def published_cert(V_design: float = 80.0) -> ObserverCert:
    """The published (P, L, Q, rho) exactly as reported."""
    return ObserverCert(PUBLISHED_P, PUBLISHED_L, PUBLISHED_Q, PUBLISHED_RHO, V_design)


def lyapunov_q(params: NlgParams, P, L) -> np.ndarray:
    """Q = -(P (A - LC) + (A - LC)^T P) at the velocity in ``params``."""
    m = build_matrices(params)
    Acl = m.A - np.asarray(L) @ m.C
    P = np.asarray(P)
    return -(P @ Acl + Acl.T @ P)


def quad_constant(params: NlgParams, model: TireModel, P, box=BOX) -> float:
    """Smallest rho for which condition (i) holds for this P on the box."""
    lo, hi = slope_range(model, alpha_max=float(box[2]), I_z=params.I_z)
    p = np.asarray(P, dtype=float)[:, 1]
    norm = float(np.linalg.norm(p))
    # eigenvalues of s/2 (p e3^T + e3 p^T) are s/2 (p3 +- |p|)
    rho = max(0.5 * s * (p[2] + norm) if s >= 0 else 0.5 * -s * (norm - p[2]) for s in (lo, hi))
    return float(rho) + 0.0  # no negative zero


def complete_cert(params: NlgParams, model: TireModel, P, L) -> ObserverCert:
    """Certificate with Q from (ii) and the tightest rho from (i)."""
    Q = lyapunov_q(params, P, L)
    return ObserverCert(P, L, 0.5 * (Q + Q.T), quad_constant(params, model, P), params.V)


def observer_derivative(params: NlgParams, model: TireModel, cert: ObserverCert, x_hat, u, y) -> np.ndarray:
    x_hat = np.asarray(x_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("measurement must be finite")
    C = build_matrices(params).C
    return vector_field(params, model, x_hat, u) - cert.L @ (C @ x_hat - y)


@dataclass
class VerificationReport:
    lyapunov_residual: float
    lambda_min_q: float
    rho: float
    quad_required_rho: float
    worst_sampled_margin: float
    P_pd: bool
    Q_pd: bool
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def gap(self) -> float:
        return self.lambda_min_q - self.rho


def verify_cert(params: NlgParams, model: TireModel, cert: ObserverCert, quad_samples: int = 10000,
                seed: int = 0, strict: bool = True, box=BOX, lyap_tol: float = LYAP_TOL) -> VerificationReport:
    """Check conditions (i)-(iii) for ``cert`` at ``params.V``.

    (ii) and (iii) are checked exactly. (i) is checked against the closed-form
    bound from the alpha sweep and, as a safety net, on random pairs drawn
    from the box. With ``strict`` a violation raises CertificateInvalid;
    otherwise it is listed in the report.
    """
    P, L, Q = cert.P, cert.L, cert.Q
    violations = []
    p_eigs = np.linalg.eigvalsh(0.5 * (P + P.T))
    q_eigs = np.linalg.eigvalsh(0.5 * (Q + Q.T))
    P_pd = bool(np.allclose(P, P.T) and p_eigs[0] > 0)
    Q_pd = bool(np.allclose(Q, Q.T) and q_eigs[0] > 0)
    if not P_pd:
        violations.append(("i", f"P is not symmetric positive definite (min eig {p_eigs[0]:.6g})"))
    if not Q_pd:
        violations.append(("ii", f"Q is not symmetric positive definite (min eig {q_eigs[0]:.6g})"))

    residual = float(np.linalg.norm(lyapunov_q(params, P, L) - Q))
    if residual > lyap_tol:
        violations.append(("ii", f"Lyapunov residual {residual:.6g} > {lyap_tol}"))

    lam = float(q_eigs[0])
    if not lam > cert.rho:
        violations.append(("iii", f"lambda_min(Q)={lam:.6g} <= rho={cert.rho:.6g}"))

    need = quad_constant(params, model, P, box)
    if need > cert.rho * (1 + 1e-12) + 1e-12:
        violations.append(("i", f"QUAD needs rho >= {need:.6g}, certificate has {cert.rho:.6g}"))

    rng = np.random.default_rng(seed)
    worst = np.inf
    if quad_samples > 0:
        v1 = rng.uniform(-1, 1, (quad_samples, 3)) * box
        v2 = rng.uniform(-1, 1, (quad_samples, 3)) * box
        # close alpha pairs push the secant slopes towards the local derivative
        v2[::2, 2] = v1[::2, 2] + rng.normal(0, 0.05, v2[::2, 2].shape)
        v2[:, 2] = np.clip(v2[:, 2], -box[2], box[2])
        dv = v1 - v2
        df = np.array([nonlinearity(params, model, a)[1] - nonlinearity(params, model, b)[1]
                       for a, b in zip(v1, v2)])
        lhs = (dv @ P[:, 1]) * df
        margin = cert.rho * np.einsum("ij,ij->i", dv, dv) - lhs
        worst = float(margin.min())
        if worst < -1e-9 * max(1.0, float(np.abs(lhs).max())):
            violations.append(("i", f"sampled QUAD margin {worst:.6g} < 0"))

    report = VerificationReport(residual, lam, cert.rho, need, worst, P_pd, Q_pd, violations)
    if strict and violations:
        cond, detail = violations[0]
        raise CertificateInvalid(cond, detail)
    return report


@dataclass
class SearchConfig:
    max_rounds: int = 20
    inner_iters: int = 400
    tol: float = 1e-4
    l_penalty: float = L_PENALTY
    seed: int = 0


def _chol_to_p(theta):
    R = np.zeros((3, 3))
    R[np.tril_indices(3)] = theta
    P = R @ R.T + 1e-12 * np.eye(3)
    return P / np.linalg.eigvalsh(P)[-1]


def _p_to_chol(P):
    return np.linalg.cholesky(P)[np.tril_indices(3)]


def _best_l(params, P, q_target=None):
    """L making Q = q I; maximises lambda_min(Q) for fixed P.

    Only Q[2, 2] = 2 P[2, 2] V / sigma is out of reach of L, so q defaults
    to that value.
    """
    m = build_matrices(params)
    Q0 = -(P @ m.A + m.A.T @ P)
    q = Q0[2, 2] if q_target is None else q_target
    D = q * np.eye(3) - Q0
    N = np.zeros((3, 2))
    N[0, 0] = D[0, 0] / 2
    N[1, 1] = D[1, 1] / 2
    N[0, 1] = N[1, 0] = D[0, 1] / 2
    N[2, 0] = D[2, 0]
    N[2, 1] = D[2, 1]
    return np.linalg.solve(P, N)


def synthesize_cert(params: NlgParams, model: TireModel, search: SearchConfig | None = None) -> ObserverCert:
    """Minimise rho / lambda_min(Q) + penalty * |L|_F over (P, L).

    The ratio is invariant to scaling P, so P is normalised to unit largest
    eigenvalue. Rounds alternate between an L-step (P fixed) and a P-step
    (L fixed), both Nelder-Mead, seeded with the L that maximises
    lambda_min(Q). Stops when a round improves the objective by less than
    ``search.tol``.
    """
    search = search or SearchConfig()
    if search.max_rounds <= 0:
        raise SynthesisFailed("search budget exhausted before any iteration", -np.inf)

    def objective(P, L):
        Q = lyapunov_q(params, P, L)
        lam = np.linalg.eigvalsh(0.5 * (Q + Q.T))[0]
        if lam <= 0:
            return 1e6 - lam
        return quad_constant(params, model, P) / lam + search.l_penalty * np.linalg.norm(L)

    P = _chol_to_p(_p_to_chol(np.diag([1.0, 1e-2, 1.0])))
    L = _best_l(params, P)
    best = objective(P, L)
    opts = {"maxiter": search.inner_iters, "xatol": 1e-10, "fatol": 1e-12, "adaptive": True}
    for rnd in range(search.max_rounds):
        prev = best
        scale = np.maximum(np.abs(L), 1.0)
        res = optimize.minimize(lambda z: objective(P, z.reshape(3, 2) * scale), L.ravel() / scale.ravel(),
                                method="Nelder-Mead", options=opts)
        if res.fun < best:
            L, best = res.x.reshape(3, 2) * scale, float(res.fun)
        res = optimize.minimize(lambda th: objective(_chol_to_p(th), L), _p_to_chol(P),
                                method="Nelder-Mead", options=opts)
        if res.fun < best:
            P, best = _chol_to_p(res.x), float(res.fun)
            L_re = _best_l(params, P)
            if objective(P, L_re) < best:
                L, best = L_re, objective(P, L_re)
        log.debug("synthesis round %d: objective %.6g", rnd, best)
        if prev - best < search.tol:
            break

    cert = complete_cert(params, model, P, L)
    margin = float(np.linalg.eigvalsh(cert.Q)[0] - cert.rho)
    if margin <= 0:
        raise SynthesisFailed("no certificate with lambda_min(Q) > rho found", margin)
    verify_cert(params, model, cert, strict=True)
    return cert

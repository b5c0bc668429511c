"""Period-to-period stability of ZAD about the origin.

Linearises the sampled-data loop (linear plant, exact propagation of the
centered PWM over one period) and prints the eigenvalues of the period map.
A real eigenvalue below -1 is a period-doubling (flip) instability: the duty
cycle then alternates between two values instead of settling.
"""
import argparse

import numpy as np
from scipy.linalg import expm

from shimmy.dynamics import NlgParams, build_matrices
from shimmy.tire import TireModel, ground_moment_slope


def linear_plant(params, kind):
    A = np.array(build_matrices(params).A)
    A[1, 2] = ground_moment_slope(TireModel.from_params(kind, params), 0.0) / params.I_z
    return A, np.array([0.0, 1.0 / params.I_z, 0.0])


def period_map(x, A, B, T, k_s, mu):
    acc = (A @ x)[1]
    s1 = x[1] + k_s * (acc + B[1] * mu)
    s2 = x[1] + k_s * (acc - B[1] * mu)
    S = x[0] + k_s * x[1]
    d = (2 * S + T * s2) / (s2 - s1)

    def hold(x, h, u):
        M = np.zeros((4, 4))
        M[:3, :3] = A
        M[:3, 3] = B * u
        E = expm(M * h)
        return E[:3, :3] @ x + E[:3, 3]

    return hold(hold(hold(x, d / 2, mu), T - d, -mu), d / 2, mu)


def floquet(A, B, T, k_s, mu, eps=1e-7):
    J = np.empty((3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = eps
        J[:, i] = (period_map(e, A, B, T, k_s, mu) - period_map(-e, A, B, T, k_s, mu)) / (2 * eps)
    return np.linalg.eigvals(J)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--tire", default="piecewise")
    ap.add_argument("--k-s", type=float, default=0.5)
    ap.add_argument("--mu", type=float, default=1000.0)
    args = ap.parse_args()
    for V in (10.0, 30.0, 80.0):
        A, B = linear_plant(NlgParams(V=V), args.tire)
        for T in (1e-3, 5e-4, 2e-4):
            ev = floquet(A, B, T, args.k_s, args.mu)
            worst = ev[np.argmax(np.abs(ev))]
            print(f"V={V:4.0f}  T={T:.0e}  eigenvalues {np.round(ev, 4)}  "
                  f"max |.| {abs(worst):.4f} {'UNSTABLE' if abs(worst) > 1 else 'stable'}")


if __name__ == "__main__":
    main()

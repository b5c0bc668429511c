import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shimmy.dynamics import (NlgParams, SingularVelocityError, build_matrices, nonlinearity,
                             strut_moment, vector_field)
from shimmy.tire import ground_moment, ground_moment_slope

state = st.tuples(st.floats(-1, 1), st.floats(-50, 50), st.floats(-1, 1))


def test_matrices_by_hand(params):
    m = build_matrices(params)
    expected = np.array([
        [0.0, 1.0, 0.0],
        [-1e5, -10 - 270 / 80, 0.0],
        [80 / 0.3, 0.0, -80 / 0.3],
    ])
    np.testing.assert_allclose(m.A, expected)
    np.testing.assert_array_equal(m.B, [0, 1, 0])
    np.testing.assert_array_equal(m.C, [[1, 0, 0], [0, 1, 0]])
    with pytest.raises(ValueError):
        m.A[0, 0] = 1.0


def test_low_speed_rejected():
    with pytest.raises(SingularVelocityError):
        build_matrices(NlgParams(V=0.1))
    with pytest.raises(SingularVelocityError):
        vector_field(NlgParams(V=0.0), None, [0, 0, 0])
    with pytest.raises(ValueError):
        NlgParams(I_z=0.0)


def test_strut_moment():
    assert strut_moment(NlgParams(), 0.01, 2.0) == pytest.approx(-1000 - 20)


@given(x=state, u=st.floats(-1e3, 1e3), zeta=st.floats(-1e3, 1e3))
def test_vector_field_is_linear_part_plus_tire(params, piecewise, x, u, zeta):
    m = build_matrices(params)
    expected = m.A @ np.array(x) + nonlinearity(params, piecewise, x) + m.B * (u + zeta)
    got = vector_field(params, piecewise, x, u, zeta)
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-6)


@given(x=state)
def test_vector_field_odd(params, smooth, x):
    x = np.array(x)
    np.testing.assert_allclose(vector_field(params, smooth, -x), -vector_field(params, smooth, x), atol=1e-9)


def test_origin_is_equilibrium(params, piecewise, smooth):
    for m in (piecewise, smooth):
        for V in (1.0, 20.0, 80.0):
            assert not np.any(vector_field(params.with_velocity(V), m, [0, 0, 0]))


def _jacobian_at_origin(params, model):
    A = np.array(build_matrices(params).A)
    A[1, 2] = ground_moment_slope(model, 0.0) / params.I_z
    return A


def test_linear_stability_switch_piecewise(params, piecewise):
    # the origin loses stability between 20 and 21 m/s
    re = [np.linalg.eigvals(_jacobian_at_origin(params.with_velocity(V), piecewise)).real.max()
          for V in (19.0, 20.0, 21.0, 30.0)]
    assert re[0] < 0 and re[1] < 0 and re[2] > 0 and re[3] > 0


def test_jacobian_against_finite_differences(params, smooth):
    x = np.array([0.02, -1.0, 0.03])
    h = 1e-7
    J = np.column_stack([(vector_field(params, smooth, x + h * e) - vector_field(params, smooth, x - h * e)) / (2 * h)
                         for e in np.eye(3)])
    A = np.array(build_matrices(params).A)
    A[1, 2] += ground_moment_slope(smooth, x[2])
    np.testing.assert_allclose(J, A, rtol=1e-6, atol=1e-3)


def test_nonlinearity_only_in_yaw_acceleration(params, piecewise):
    f = nonlinearity(params, piecewise, [0.3, 4.0, 0.05])
    assert f[0] == 0 and f[2] == 0
    assert f[1] == pytest.approx(ground_moment(piecewise, 0.05))

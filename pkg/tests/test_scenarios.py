import numpy as np
import pytest

from shimmy import scenarios as sc
from shimmy.integrator import StepConfig, simulate
from shimmy.observer import published_cert
from shimmy.tire import TireKind


def test_burst_scenario():
    s = sc.test1()
    assert s.disturbance(0.25) == 1000.0
    assert s.disturbance(0.1) == 0.0
    assert s.disturbance(0.2) == 1000.0 and s.disturbance(0.3) == 1000.0
    assert s.velocity_profile(1.7) == 80.0
    np.testing.assert_array_equal(s.velocity_profile(np.linspace(0, 2, 7)), 80.0)
    assert s.duration == 2.0 and s.x0 == (0.0, 0.0, 0.0)
    assert (s.plant_tire, s.controller_tire) == (TireKind.PIECEWISE, TireKind.SMOOTH)


def test_taxi_scenario():
    s = sc.test2()
    assert s.velocity_profile(0.0) == 1.0
    assert s.velocity_profile(s.duration) == 80.0
    assert s.velocity_profile(5.0) == pytest.approx(40.5)
    for t in sc.TEST2_POTHOLES:
        assert s.disturbance(t + 0.025) == 500.0
        assert s.disturbance(t + 0.7) == 0.0
    assert s.disturbance(1.0) == 0.0


def test_signals_are_deterministic_and_vectorised():
    t = np.linspace(0, 10, 10001)
    a, b = sc.test2(), sc.test2()
    np.testing.assert_array_equal(a.disturbance(t), b.disturbance(t))
    np.testing.assert_array_equal(a.velocity_profile(t), [b.velocity_profile(x) for x in t])


def test_scenario_rejects_bad_profiles():
    with pytest.raises(ValueError):
        sc.test2(V_start=0.0)
    with pytest.raises(ValueError):
        sc.test1(duration=0.0)


def test_disturbance_bypasses_observer(params, piecewise):
    # matched observer started on the true state: any estimation error can
    # only come from the torque pulse, which the observer must not see
    pulse = sc.PulseTrain((0.01,), 0.01, 1000.0)
    tr = simulate(params, piecewise, StepConfig(1e-5, 0.03), cert=published_cert(), observer_tire=piecewise,
                  disturbance=pulse, x0=(0.01, 0, 0), x_hat0=(0.01, 0, 0))
    err = np.abs(tr.x_hat - tr.x).max(axis=1)
    assert err[tr.t < 0.01].max() < 1e-12
    assert err[tr.t > 0.015].max() > 1e-6

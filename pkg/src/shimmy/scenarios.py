"""Benchmark runs: a burst-tire impulse at cruise speed and taxiing over potholes."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import V_MIN, NlgParams
from .tire import TireKind, TireModel


@dataclass(frozen=True)
class PulseTrain:
    """Sum of rectangular torque pulses, each on [start, start + width]."""
    starts: tuple = ()
    width: float = 0.0
    height: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for s in self.starts:
            out = np.where((t >= s) & (t <= s + self.width), self.height, out)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class Ramp:
    """Linear ramp from v0 to v1 over [0, duration], constant afterwards."""
    v0: float
    v1: float
    duration: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.v0 + (self.v1 - self.v0) * np.clip(t / self.duration, 0.0, 1.0)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.full(t.shape, self.value) if t.ndim else float(self.value)


@dataclass(frozen=True)
class Scenario:
    name: str
    velocity_profile: object
    disturbance: object
    duration: float
    plant_tire: TireKind = TireKind.PIECEWISE
    controller_tire: TireKind = TireKind.SMOOTH
    x0: tuple = (0.0, 0.0, 0.0)
    params: NlgParams = field(default_factory=NlgParams)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        grid = np.linspace(0.0, self.duration, 1001)
        if np.min(self.velocity_profile(grid)) < V_MIN:
            raise ValueError(f"velocity profile drops below V_min={V_MIN} m/s")

    def tires(self) -> tuple[TireModel, TireModel]:
        """(plant tire, observer/controller tire) built from the scenario params."""
        return (TireModel.from_params(self.plant_tire, self.params),
                TireModel.from_params(self.controller_tire, self.params))


def test1(V: float = 80.0, height: float = 1000.0, start: float = 0.2, stop: float = 0.3,
          duration: float = 2.0) -> Scenario:
    """Constant speed with a single torque pulse standing in for a tire burst."""
    return Scenario("test1", Constant(V), PulseTrain((start,), stop - start, height), duration,
                    params=NlgParams(V=V))


TEST2_POTHOLES = (2.0, 3.5, 5.0, 6.5, 8.0)


def test2(V_start: float = 1.0, V_end: float = 80.0, ramp_time: float = 10.0,
          pothole_times: tuple = TEST2_POTHOLES, pothole_width: float = 0.05,
          pothole_height: float = 500.0, duration: float | None = None) -> Scenario:
    """Taxiing with a speed ramp and a train of pothole torque pulses."""
    duration = ramp_time if duration is None else duration
    return Scenario("test2", Ramp(V_start, V_end, ramp_time),
                    PulseTrain(tuple(pothole_times), pothole_width, pothole_height), duration,
                    params=NlgParams(V=V_end))


SCENARIOS = {"test1": test1, "test2": test2}

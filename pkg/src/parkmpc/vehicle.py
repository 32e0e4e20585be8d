"""Kinematic bicycle model: nonlinear plant and the discrete linear model.

State is referenced to the rear-axle centre: ``(x_r, y_r, v, theta)``.
Inputs are longitudinal acceleration and the tangent of the front
road-wheel angle, so that yaw rate is ``v * tan_delta / L``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ConfigurationError

N_STATES = 4
N_INPUTS = 2
N_OUTPUTS = 3


def wrap_angle(a):
    """Wrap to (-pi, pi]. Works on floats and arrays."""
    if isinstance(a, (float, int)):
        return math.pi - (math.pi - a) % (2.0 * math.pi)
    wrapped = math.pi - np.mod(math.pi - np.asarray(a, dtype=float), 2.0 * math.pi)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def _finite(*values):
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class VehicleState:
    x_r: float
    y_r: float
    v: float
    theta: float

    def __post_init__(self):
        if not _finite(self.x_r, self.y_r, self.v, self.theta):
            raise ConfigurationError(f"non-finite vehicle state {self}")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self):
        return np.array([self.x_r, self.y_r, self.v, self.theta])

    @classmethod
    def from_array(cls, arr):
        return cls(*(float(a) for a in arr))

    @property
    def position(self):
        return (self.x_r, self.y_r)


@dataclass(frozen=True)
class ControlInput:
    a: float
    tan_delta: float

    def __post_init__(self):
        if not _finite(self.a, self.tan_delta):
            raise ConfigurationError(f"non-finite control input {self}")

    def as_array(self):
        return np.array([self.a, self.tan_delta])

    @property
    def delta(self):
        return math.atan(self.tan_delta)


@dataclass(frozen=True)
class VehicleParams:
    """Geometry, sample time and actuator limits.

    ``delta_max`` and ``d_delta_max`` are road-wheel angles in radians;
    the controller maps them into the tan domain. ``v_floor`` keeps the
    heading channel controllable at standstill during linearization.
    """

    L: float = 2.7
    T_s: float = 0.05
    delta_max: float = 0.6
    a_max: float = 2.0
    a_min: float = -2.0
    d_delta_max: float = 0.05
    d_a_max: float = 0.5
    v_floor: float = 0.05

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigurationError(problems)

    def problems(self):
        out = []
        for f in fields(self):
            val = getattr(self, f.name)
            if not isinstance(val, (int, float)) or not math.isfinite(val):
                out.append(f"vehicle.{f.name} must be a finite number (got {val!r})")
        if out:
            return out
        if self.L <= 0:
            out.append(f"vehicle.L must be > 0 (got {self.L})")
        if self.T_s <= 0:
            out.append(f"vehicle.T_s must be > 0 (got {self.T_s})")
        if not 0 < self.delta_max < math.pi / 2:
            out.append(f"vehicle.delta_max must be in (0, pi/2) (got {self.delta_max})")
        if not self.a_min < 0 < self.a_max:
            out.append(f"vehicle.a_min < 0 < vehicle.a_max required (got {self.a_min}, {self.a_max})")
        if self.d_delta_max <= 0:
            out.append(f"vehicle.d_delta_max must be > 0 (got {self.d_delta_max})")
        if self.d_a_max <= 0:
            out.append(f"vehicle.d_a_max must be > 0 (got {self.d_a_max})")
        if self.v_floor < 0:
            out.append(f"vehicle.v_floor must be >= 0 (got {self.v_floor})")
        return out

    @property
    def tan_delta_max(self):
        return math.tan(self.delta_max)


@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray = field(default_factory=lambda: np.zeros((N_OUTPUTS, N_INPUTS)))


def nonlinear_step(state: VehicleState, inp: ControlInput, dt: float, params: VehicleParams) -> VehicleState:
    """One forward-Euler step of the continuous kinematics.

    All right-hand sides use the pre-step state.
    """
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0 (got {dt})")
    x, y, v, th = state.x_r, state.y_r, state.v, state.theta
    return VehicleState(
        x + dt * v * math.cos(th),
        y + dt * v * math.sin(th),
        v + dt * inp.a,
        th + dt * v * inp.tan_delta / params.L,
    )


def integrate(state, inp, dt, n_steps, params):
    """Apply ``nonlinear_step`` ``n_steps`` times with a constant input."""
    for _ in range(n_steps):
        state = nonlinear_step(state, inp, dt, params)
    return state


def scheduling_speed(v, v_floor):
    # sign(0) counts as forward
    sign = -1.0 if v < 0 else 1.0
    return sign * max(abs(v), v_floor)


def linearize(state: VehicleState, params: VehicleParams) -> LinearModel:
    """Discrete model with heading and speed frozen at the current state."""
    Ts = params.T_s
    A = np.eye(N_STATES)
    A[0, 2] = Ts * math.cos(state.theta)
    A[1, 2] = Ts * math.sin(state.theta)
    B = np.zeros((N_STATES, N_INPUTS))
    B[2, 0] = Ts
    B[3, 1] = Ts * scheduling_speed(state.v, params.v_floor) / params.L
    C = np.zeros((N_OUTPUTS, N_STATES))
    C[0, 1] = C[1, 2] = C[2, 3] = 1.0
    return LinearModel(A, B, C, np.zeros((N_OUTPUTS, N_INPUTS)))


def output_of(state: VehicleState):
    """Measured outputs ``(y_r, v, theta)``."""
    return np.array([state.y_r, state.v, state.theta])

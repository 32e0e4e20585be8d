"""Closed-loop simulation of the controller against the kinematic plant."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .mpc import ControlCommand, ControllerState, MpcConfig, control_step
from .trajectory import Trajectory, project
from .vehicle import ControlInput, VehicleParams, VehicleState, nonlinear_step, wrap_angle

PLANT_SUBSTEPS = 10
GOAL_RADIUS = 0.05
GOAL_SPEED = 0.01
KINEMATIC_SPEED_LIMIT = 10.0


@dataclass(frozen=True)
class Scenario:
    trajectory: Trajectory
    initial_state: VehicleState
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    duration: float = 40.0
    actuation_delay_steps: int = 1
    plant_substeps: int = PLANT_SUBSTEPS
    # proportional gain of the low-level speed loop used in velocity_passthrough mode [1/s]
    speed_gain: float = 1.5

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigurationError(problems)

    def problems(self):
        out = sim_field_problems(self.duration, self.actuation_delay_steps, self.plant_substeps, self.speed_gain)
        if len(self.trajectory) < 4:
            out.append(f"trajectory needs at least 4 waypoints (got {len(self.trajectory)})")
        return out


def _is_count(val, minimum):
    return isinstance(val, int) and not isinstance(val, bool) and val >= minimum


def _is_positive(val):
    return isinstance(val, (int, float)) and not isinstance(val, bool) and math.isfinite(val) and val > 0


def sim_field_problems(duration, actuation_delay_steps, plant_substeps=PLANT_SUBSTEPS, speed_gain=1.5):
    out = []
    if not _is_positive(duration):
        out.append(f"sim.duration must be > 0 (got {duration!r})")
    if not _is_count(actuation_delay_steps, 0):
        out.append(f"sim.actuation_delay_steps must be a non-negative integer (got {actuation_delay_steps!r})")
    if not _is_count(plant_substeps, 1):
        out.append(f"sim.plant_substeps must be a positive integer (got {plant_substeps!r})")
    if not _is_positive(speed_gain):
        out.append(f"sim.speed_gain must be > 0 (got {speed_gain!r})")
    return out


@dataclass
class Sample:
    t: float
    state: VehicleState
    command: ControlCommand
    applied: ControlInput
    cross_track_error: float
    heading_error: float
    v_error: float
    v_ref: float

    @property
    def qp_iterations(self):
        return self.command.qp_iterations

    @property
    def constraint_active(self):
        return self.command.constraint_active


@dataclass
class SimResult:
    scenario: Scenario
    samples: list = field(default_factory=list)
    final_state: VehicleState | None = None
    reached_goal: bool = False
    failed: bool = False
    error: str = ""

    def column(self, name):
        """Array of a per-sample quantity, e.g. ``"x"``, ``"delta_cmd"``."""
        getters = {
            "t": lambda s: s.t,
            "x": lambda s: s.state.x_r,
            "y": lambda s: s.state.y_r,
            "theta": lambda s: s.state.theta,
            "v": lambda s: s.state.v,
            "delta_cmd": lambda s: s.command.delta_cmd,
            "a_cmd": lambda s: s.applied.a,
            "v_ref": lambda s: s.v_ref,
            "cross_track_err": lambda s: s.cross_track_error,
            "heading_err": lambda s: s.heading_error,
            "qp_iters": lambda s: s.command.qp_iterations,
            "constraint_active": lambda s: s.command.constraint_active,
        }
        return np.array([getters[name](s) for s in self.samples])


def _tracking_errors(traj, state):
    p = project(traj, state.position)
    return p.cross_track, wrap_angle(state.theta - p.theta), state.v - p.v, p.v


def _plant_input(cmd: ControlCommand, state: VehicleState, scenario: Scenario):
    if cmd.a_cmd is not None:
        return ControlInput(cmd.a_cmd, cmd.tan_delta)
    p = scenario.vehicle
    a = min(max(scenario.speed_gain * (cmd.v_cmd - state.v), p.a_min), p.a_max)
    return ControlInput(a, cmd.tan_delta)


def _idle_command(scenario: Scenario):
    if scenario.mpc.output_mode == "acceleration":
        return ControlCommand(delta_cmd=0.0, tan_delta=0.0, a_cmd=0.0)
    return ControlCommand(delta_cmd=0.0, tan_delta=0.0, v_cmd=0.0)


def goal_reached(state: VehicleState, traj: Trajectory):
    d = math.hypot(state.x_r - traj.x[-1], state.y_r - traj.y[-1])
    return d <= GOAL_RADIUS and abs(state.v) < GOAL_SPEED


def run_closed_loop(scenario: Scenario) -> SimResult:
    """Simulate until ``duration`` elapses or the vehicle stops on the goal.

    Each tick: read the plant state, compute a command, push it through the
    actuation delay line, and integrate the plant over one controller period
    with the command that leaves the delay line. Controller exceptions stop
    the run and return the samples collected so far with ``failed`` set.
    """
    sc = scenario
    params, traj = sc.vehicle, sc.trajectory
    dt = params.T_s / sc.plant_substeps
    ctrl = ControllerState()
    delay = deque(_idle_command(sc) for _ in range(sc.actuation_delay_steps))
    result = SimResult(sc)
    state = sc.initial_state
    n_ticks = int(math.floor(sc.duration / params.T_s + 1e-9))

    for k in range(n_ticks):
        try:
            cmd = control_step(ctrl, state, traj, sc.mpc, params)
        except Exception as exc:  # noqa: BLE001 - any controller fault ends the run
            result.failed = True
            result.error = f"tick {k}: {type(exc).__name__}: {exc}"
            break
        delay.append(cmd)
        applied_cmd = delay.popleft()
        applied = _plant_input(applied_cmd, state, sc)
        cte, he, ve, vref = _tracking_errors(traj, state)
        result.samples.append(Sample(k * params.T_s, state, cmd, applied, cte, he, ve, vref))
        for _ in range(sc.plant_substeps):
            state = nonlinear_step(state, applied, dt, params)
        if goal_reached(state, traj):
            result.reached_goal = True
            break

    result.final_state = state
    return result


@dataclass(frozen=True)
class Metrics:
    max_cross_track: float
    rms_cross_track: float
    max_overshoot: float
    final_position_error: float
    final_speed: float
    max_steering_rate: float
    steps_at_constraint: int

    def as_dict(self):
        return {
            "max_cross_track": self.max_cross_track,
            "rms_cross_track": self.rms_cross_track,
            "max_overshoot": self.max_overshoot,
            "final_position_error": self.final_position_error,
            "final_speed": self.final_speed,
            "max_steering_rate": self.max_steering_rate,
            "steps_at_constraint": self.steps_at_constraint,
        }


def segment_curvature(traj: Trajectory):
    return wrap_angle(np.diff(traj.theta)) / traj.segment_lengths


def compute_metrics(result: SimResult, trajectory: Trajectory) -> Metrics:
    """Summary of a run.

    ``max_overshoot`` is the largest excursion to the outside of a curved
    path segment (positive means outside the turn); it is 0 for a run that
    never visits a curved segment.
    """
    if not result.samples:
        raise ConfigurationError("cannot compute metrics of an empty result")
    kappa = segment_curvature(trajectory)
    cte = np.empty(len(result.samples))
    overshoot = []
    for i, s in enumerate(result.samples):
        p = project(trajectory, s.state.position)
        cte[i] = p.cross_track
        if abs(kappa[p.segment]) > 1e-6:
            overshoot.append(-math.copysign(1.0, kappa[p.segment]) * p.cross_track)
    delta = np.array([s.command.delta_cmd for s in result.samples])
    final = result.final_state or result.samples[-1].state
    return Metrics(
        max_cross_track=float(np.max(np.abs(cte))),
        rms_cross_track=float(np.sqrt(np.mean(cte ** 2))),
        max_overshoot=float(max(overshoot)) if overshoot else 0.0,
        final_position_error=float(math.hypot(final.x_r - trajectory.x[-1], final.y_r - trajectory.y[-1])),
        final_speed=float(abs(final.v)),
        max_steering_rate=float(np.max(np.abs(np.diff(delta)))) if len(delta) > 1 else 0.0,
        steps_at_constraint=int(sum(s.command.constraint_active for s in result.samples)),
    )


def _smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _smoothstep_slope(u):
    inside = (u > 0.0) & (u < 1.0)
    return np.where(inside, 6.0 * u * (1.0 - u), 0.0)


def s_curve_trajectory(lateral_offset, transition_length, cruise_speed, *, lead_in=5.0,
                       lead_out=5.0, accel=1.0, spacing=0.5):
    """Equidistant waypoints along a smoothstep lateral shift.

    The speed profile starts and ends at zero with constant-acceleration
    ramps (``accel``) and cruises at ``cruise_speed`` in between.
    """
    for name, val in (("transition_length", transition_length), ("cruise_speed", cruise_speed),
                      ("accel", accel), ("spacing", spacing)):
        if not (math.isfinite(val) and val > 0):
            raise ConfigurationError(f"{name} must be > 0 (got {val})")
    if not math.isfinite(lateral_offset):
        raise ConfigurationError(f"lateral_offset must be finite (got {lateral_offset})")
    if cruise_speed >= KINEMATIC_SPEED_LIMIT:
        raise ConfigurationError(
            f"cruise_speed must be below {KINEMATIC_SPEED_LIMIT} m/s for the kinematic model (got {cruise_speed})")
    if lead_in < 0 or lead_out < 0:
        raise ConfigurationError("lead_in and lead_out must be >= 0")

    x_end = lead_in + transition_length + lead_out
    xd = np.linspace(0.0, x_end, 20001)
    ud = (xd - lead_in) / transition_length
    yd = lateral_offset * _smoothstep(ud)
    sd = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(xd), np.diff(yd)))])
    total = sd[-1]
    n_seg = max(3, int(round(total / spacing)))
    s = np.linspace(0.0, total, n_seg + 1)
    x = np.interp(s, sd, xd)
    u = (x - lead_in) / transition_length
    y = lateral_offset * _smoothstep(u)
    theta = np.arctan2(lateral_offset * _smoothstep_slope(u) / transition_length, 1.0)
    v = np.minimum.reduce([
        np.full_like(s, cruise_speed),
        np.sqrt(2.0 * accel * s),
        np.sqrt(2.0 * accel * np.maximum(total - s, 0.0)),
    ])
    v[0] = v[-1] = 0.0
    return Trajectory.from_arrays(x, y, theta, v)


def make_s_curve_scenario(lateral_offset=3.0, transition_length=15.0, cruise_speed=2.0, *,
                          vehicle=None, mpc=None, duration=None, actuation_delay_steps=1,
                          **path_kwargs) -> Scenario:
    """Side-displacement manoeuvre from standstill to standstill."""
    traj = s_curve_trajectory(lateral_offset, transition_length, cruise_speed, **path_kwargs)
    if duration is None:
        accel = path_kwargs.get("accel", 1.0)
        duration = traj.length / cruise_speed + cruise_speed / accel + 20.0
    start = VehicleState(float(traj.x[0]), float(traj.y[0]), 0.0, float(traj.theta[0]))
    return Scenario(
        trajectory=traj,
        initial_state=start,
        vehicle=vehicle or VehicleParams(),
        mpc=mpc or MpcConfig(),
        duration=float(duration),
        actuation_delay_steps=actuation_delay_steps,
    )

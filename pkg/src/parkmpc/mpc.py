"""Receding-horizon controller on the augmented (incremental) model.

The decision variable is the stack of input increments over the control
horizon, ``dU = [du_0; du_1; ...]`` with ``du_j = (da, d tan_delta)``.
Outputs ``(y_r, v, theta)`` are predicted as ``Y = F x_aug + S dU``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, SolverError
from .qp import MAX_SWEEPS, QpProblem, QpSolution, solve_hildreth
from .trajectory import (
    PREVIEW_MODES,
    ReferencePreview,
    Trajectory,
    build_reference_preview,
    find_nearest_waypoint,
    resample_window,
)
from .vehicle import (
    N_INPUTS,
    N_STATES,
    ControlInput,
    LinearModel,
    VehicleParams,
    VehicleState,
    linearize,
    output_of,
    wrap_angle,
)

OUTPUT_MODES = ("acceleration", "velocity_passthrough")


@dataclass(frozen=True)
class MpcConfig:
    """Horizon lengths, input weight and preview options.

    ``preview_min_speed`` is the slowest rate at which the reference
    preview walks along the path, so a standstill reference does not pin
    the look-ahead in place.
    """

    N_p: int = 20
    N_c: int = 5
    r_w: float = 0.5
    preview_mode: str = "advancing"
    output_mode: str = "acceleration"
    preview_min_speed: float = 0.3
    resample_spacing: float = 0.1
    max_qp_iter: int = MAX_SWEEPS

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ConfigurationError(problems)

    def problems(self):
        out = []
        for name in ("N_p", "N_c", "max_qp_iter"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, int):
                out.append(f"mpc.{name} must be an integer (got {val!r})")
        for name in ("r_w", "preview_min_speed", "resample_spacing"):
            val = getattr(self, name)
            if not isinstance(val, (int, float)) or not math.isfinite(val):
                out.append(f"mpc.{name} must be a finite number (got {val!r})")
        if out:
            return out
        if self.N_p < 1:
            out.append(f"mpc.N_p must be >= 1 (got {self.N_p})")
        if self.N_c < 1:
            out.append(f"mpc.N_c must be >= 1 (got {self.N_c})")
        if self.N_c > self.N_p:
            out.append(f"mpc.N_c must be <= mpc.N_p (got N_c={self.N_c}, N_p={self.N_p})")
        if self.r_w <= 0:
            out.append(f"mpc.r_w must be > 0 for the constrained solver (got {self.r_w})")
        if self.preview_mode not in PREVIEW_MODES:
            out.append(f"mpc.preview_mode must be one of {PREVIEW_MODES} (got {self.preview_mode!r})")
        if self.output_mode not in OUTPUT_MODES:
            out.append(f"mpc.output_mode must be one of {OUTPUT_MODES} (got {self.output_mode!r})")
        if self.preview_min_speed < 0:
            out.append(f"mpc.preview_min_speed must be >= 0 (got {self.preview_min_speed})")
        if self.resample_spacing <= 0:
            out.append(f"mpc.resample_spacing must be > 0 (got {self.resample_spacing})")
        if self.max_qp_iter < 1:
            out.append(f"mpc.max_qp_iter must be >= 1 (got {self.max_qp_iter})")
        return out


@dataclass(frozen=True)
class AugmentedModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @property
    def n_states(self):
        return self.A.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    @property
    def n_outputs(self):
        return self.C.shape[0]


@dataclass(frozen=True)
class PredictionMatrices:
    F: np.ndarray
    S: np.ndarray
    N_p: int
    N_c: int

    def predict(self, x_aug, dU):
        return self.F @ x_aug + self.S @ dU


def build_augmented(model: LinearModel) -> AugmentedModel:
    """Stack state increments and outputs into one state vector.

    ``[dx_{k+1}; y_{k+1}] = [[A, 0], [CA, I]] [dx_k; y_k] + [B; CB] du_k``
    """
    A, B, C = (np.asarray(m, dtype=float) for m in (model.A, model.B, model.C))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigurationError(f"A must be square (got {A.shape})")
    m = A.shape[0]
    if B.ndim != 2 or B.shape[0] != m:
        raise ConfigurationError(f"B must have {m} rows (got {B.shape})")
    if C.ndim != 2 or C.shape[1] != m:
        raise ConfigurationError(f"C must have {m} columns (got {C.shape})")
    K = C.shape[0]
    A_aug = np.block([[A, np.zeros((m, K))], [C @ A, np.eye(K)]])
    B_aug = np.vstack([B, C @ B])
    C_aug = np.hstack([np.zeros((K, m)), np.eye(K)])
    return AugmentedModel(A_aug, B_aug, C_aug)


def build_prediction(aug: AugmentedModel, N_p: int, N_c: int) -> PredictionMatrices:
    if not 1 <= N_c <= N_p:
        raise ConfigurationError(f"need 1 <= N_c <= N_p (got N_c={N_c}, N_p={N_p})")
    K, n_u = aug.n_outputs, aug.n_inputs
    # CA^i for i = 0..N_p
    CA = [aug.C]
    for _ in range(N_p):
        CA.append(CA[-1] @ aug.A)
    F = np.vstack(CA[1:])
    CAB = [blk @ aug.B for blk in CA[:N_p]]
    S = np.zeros((N_p * K, N_c * n_u))
    for i in range(N_p):
        for j in range(min(i + 1, N_c)):
            S[i * K:(i + 1) * K, j * n_u:(j + 1) * n_u] = CAB[i - j]
    return PredictionMatrices(F, S, N_p, N_c)


def solve_unconstrained(pred: PredictionMatrices, R_s, x_aug, r_w: float):
    """Closed-form minimiser of ``|R_s - Y|^2 + r_w |dU|^2``."""
    S = pred.S
    H = S.T @ S + r_w * np.eye(S.shape[1])
    rhs = S.T @ (np.asarray(R_s, dtype=float) - pred.F @ np.asarray(x_aug, dtype=float))
    try:
        dU = np.linalg.solve(H, rhs)
    except np.linalg.LinAlgError:
        raise SolverError("normal matrix is singular; increase r_w") from None
    if not np.all(np.isfinite(dU)):
        raise SolverError("normal matrix is singular; increase r_w")
    return dU


def tan_rate_bound(delta_prev: float, d_delta_max: float) -> float:
    """Largest tan-domain increment that keeps |d delta| <= d_delta_max
    in both directions from ``delta_prev``."""
    a = abs(delta_prev)
    return math.tan(a) - math.tan(a - d_delta_max)


def input_bounds(params: VehicleParams, u_prev):
    """Amplitude box ``(u_min, u_max)`` and increment bound ``du_max``."""
    t_max = params.tan_delta_max
    u_min = np.array([params.a_min, -t_max])
    u_max = np.array([params.a_max, t_max])
    du_max = np.array([params.d_a_max, tan_rate_bound(math.atan(u_prev[1]), params.d_delta_max)])
    return u_min, u_max, du_max


def assemble_qp(pred: PredictionMatrices, R_s, x_aug, r_w: float, u_prev, params: VehicleParams,
                N_c: int | None = None) -> QpProblem:
    """Quadratic program with increment and amplitude bounds on every step
    of the control horizon.

    Row order of ``M``: increment upper, increment lower, amplitude upper,
    amplitude lower; each block covers all ``N_c * n_u`` entries.
    """
    if not r_w > 0:
        raise ConfigurationError(f"r_w must be > 0 (got {r_w})")
    N_c = pred.N_c if N_c is None else N_c
    n_u = pred.S.shape[1] // pred.N_c
    if N_c != pred.N_c:
        raise ConfigurationError(f"N_c={N_c} does not match prediction matrices (N_c={pred.N_c})")
    u_prev = np.asarray(u_prev.as_array() if isinstance(u_prev, ControlInput) else u_prev, dtype=float)
    S = pred.S
    n = S.shape[1]
    E = 2.0 * (S.T @ S + r_w * np.eye(n))
    E = 0.5 * (E + E.T)
    F_vec = -2.0 * S.T @ (np.asarray(R_s, dtype=float) - pred.F @ np.asarray(x_aug, dtype=float))

    u_min, u_max, du_max = input_bounds(params, u_prev)
    I = np.eye(n)
    summation = np.kron(np.tril(np.ones((N_c, N_c))), np.eye(n_u))
    M = np.vstack([I, -I, summation, -summation])
    gamma = np.concatenate([
        np.tile(du_max, N_c),
        np.tile(du_max, N_c),
        np.tile(u_max - u_prev, N_c),
        np.tile(u_prev - u_min, N_c),
    ])
    reach = N_c * du_max
    infeasible = bool(np.any(u_prev - u_max > reach) or np.any(u_min - u_prev > reach))
    return QpProblem(E, F_vec, M, gamma, infeasible=infeasible)


@dataclass
class ControlCommand:
    """One controller output plus diagnostics.

    Exactly one of ``a_cmd`` / ``v_cmd`` is set, depending on the output
    mode. ``Y_pred`` is the predicted output stack for the chosen ``dU``.
    """

    delta_cmd: float
    tan_delta: float
    a_cmd: float | None = None
    v_cmd: float | None = None
    a_internal: float = 0.0
    du: np.ndarray = field(default_factory=lambda: np.zeros(N_INPUTS))
    dU: np.ndarray | None = None
    Y_pred: np.ndarray | None = None
    R_s: np.ndarray | None = None
    qp_iterations: int = 0
    qp_converged: bool = True
    constraint_active: bool = False
    clamped: bool = False
    infeasible: bool = False

    @property
    def degraded(self):
        return not self.qp_converged


@dataclass
class ControllerState:
    """Memory carried between ticks: last applied input and last state."""

    u_prev: np.ndarray = field(default_factory=lambda: np.zeros(N_INPUTS))
    x_prev: np.ndarray | None = None
    last_delta: float = 0.0

    def reset(self):
        self.u_prev = np.zeros(N_INPUTS)
        self.x_prev = None
        self.last_delta = 0.0


def augmented_state(state: VehicleState, x_prev):
    x = state.as_array()
    dx = np.zeros(N_STATES) if x_prev is None else x - x_prev
    dx[3] = wrap_angle(dx[3])
    return np.concatenate([dx, output_of(state)])


def reference_vector(preview: ReferencePreview, theta_now: float):
    """Stacked references with headings unwrapped around the current heading."""
    rows = preview.rows.copy()
    rows[:, 2] = theta_now + wrap_angle(rows[:, 2] - theta_now)
    return rows.ravel()


def look_ahead_distance(traj: Trajectory, state: VehicleState, cfg: MpcConfig, T_s: float):
    speed = max(float(np.max(traj.v)), abs(state.v), cfg.preview_min_speed)
    return cfg.N_p * T_s * speed + 2.0 * float(np.max(traj.segment_lengths))


def control_step(ctrl: ControllerState, state: VehicleState, traj: Trajectory,
                 cfg: MpcConfig, params: VehicleParams) -> ControlCommand:
    """Run one controller tick and update ``ctrl`` in place."""
    near = find_nearest_waypoint(traj, state.position)
    local = resample_window(traj, near, cfg.resample_spacing, look_ahead_distance(traj, state, cfg, params.T_s))
    preview = build_reference_preview(local, state, cfg.N_p, params.T_s, cfg.preview_mode, cfg.preview_min_speed)

    pred = build_prediction(build_augmented(linearize(state, params)), cfg.N_p, cfg.N_c)
    x_aug = augmented_state(state, ctrl.x_prev)
    R_s = reference_vector(preview, state.theta)
    qp = assemble_qp(pred, R_s, x_aug, cfg.r_w, ctrl.u_prev, params, cfg.N_c)
    sol: QpSolution = solve_hildreth(qp, max_iter=cfg.max_qp_iter)

    u_prev = ctrl.u_prev
    u_min, u_max, du_max = input_bounds(params, u_prev)
    du = sol.x[:N_INPUTS]
    u_raw = u_prev + du
    u = np.clip(u_raw, u_prev - du_max, u_prev + du_max)
    u = np.clip(u, u_min, u_max)
    clamped = bool(np.any(np.abs(u - u_raw) > 1e-12))

    delta = math.atan(u[1])
    cmd = ControlCommand(
        delta_cmd=delta,
        tan_delta=float(u[1]),
        a_internal=float(u[0]),
        du=u - u_prev,
        dU=sol.x,
        Y_pred=pred.predict(x_aug, sol.x),
        R_s=R_s,
        qp_iterations=sol.iterations,
        qp_converged=sol.converged,
        constraint_active=sol.active or clamped,
        clamped=clamped,
        infeasible=qp.infeasible,
    )
    if cfg.output_mode == "acceleration":
        cmd.a_cmd = float(u[0])
    else:
        cmd.v_cmd = float(preview.rows[0, 1])

    ctrl.u_prev = u
    ctrl.x_prev = state.as_array()
    ctrl.last_delta = delta
    return cmd


class MpcController:
    """Stateful wrapper binding a trajectory and configuration to ``control_step``."""

    def __init__(self, trajectory: Trajectory, cfg: MpcConfig | None = None,
                 params: VehicleParams | None = None):
        if len(trajectory) < 4:
            raise ConfigurationError(f"controller needs at least 4 waypoints (got {len(trajectory)})")
        self.trajectory = trajectory
        self.cfg = cfg or MpcConfig()
        self.params = params or VehicleParams()
        self.state = ControllerState()

    def reset(self):
        self.state.reset()

    def step(self, vehicle_state: VehicleState) -> ControlCommand:
        return control_step(self.state, vehicle_state, self.trajectory, self.cfg, self.params)

"""Kinematic-bicycle model predictive control for low-speed path tracking."""
from .errors import ConfigurationError, SimulationError, SolverError
from .mpc import (
    AugmentedModel,
    ControlCommand,
    ControllerState,
    MpcConfig,
    MpcController,
    PredictionMatrices,
    assemble_qp,
    build_augmented,
    build_prediction,
    control_step,
    solve_unconstrained,
)
from .qp import QpProblem, QpSolution, solve_hildreth
from .sim import (
    Metrics,
    Scenario,
    SimResult,
    compute_metrics,
    make_s_curve_scenario,
    run_closed_loop,
    s_curve_trajectory,
)
from .trajectory import (
    ReferencePreview,
    Trajectory,
    Waypoint,
    build_reference_preview,
    find_nearest_waypoint,
    resample_cubic,
    resample_window,
)
from .vehicle import (
    ControlInput,
    LinearModel,
    VehicleParams,
    VehicleState,
    linearize,
    nonlinear_step,
    wrap_angle,
)

__version__ = "0.1.0"

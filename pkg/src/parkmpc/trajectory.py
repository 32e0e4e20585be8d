"""Planned-path handling: nearest waypoint, local cubic resampling and the
horizon reference preview."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .vehicle import VehicleState, wrap_angle

MIN_SEPARATION = 1e-6
SPACING_RANGE = (0.25, 2.0)
PREVIEW_MODES = ("advancing", "hold")


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float
    theta: float
    v: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.theta, self.v)):
            raise ConfigurationError(f"non-finite waypoint {self}")
        if self.v < 0:
            raise ConfigurationError(f"waypoint speed must be >= 0 (got {self.v})")


class Trajectory:
    """Ordered waypoints stored column-wise.

    ``cumulative_arclength`` is the polyline length up to each waypoint.
    """

    def __init__(self, waypoints):
        waypoints = list(waypoints)
        if len(waypoints) < 2:
            raise ConfigurationError(f"trajectory needs at least 2 waypoints (got {len(waypoints)})")
        arr = np.array([(w.x, w.y, w.theta, w.v) for w in waypoints], dtype=float)
        self._init_arrays(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])

    @classmethod
    def from_arrays(cls, x, y, theta, v):
        x, y, theta, v = (np.asarray(a, dtype=float).ravel() for a in (x, y, theta, v))
        if not len(x) == len(y) == len(theta) == len(v):
            raise ConfigurationError("trajectory arrays differ in length")
        if len(x) < 2:
            raise ConfigurationError(f"trajectory needs at least 2 waypoints (got {len(x)})")
        if not np.all(np.isfinite(np.concatenate([x, y, theta, v]))):
            raise ConfigurationError("trajectory contains non-finite values")
        if np.any(v < 0):
            raise ConfigurationError("waypoint speed must be >= 0")
        obj = cls.__new__(cls)
        obj._init_arrays(x, y, theta, v)
        return obj

    def _init_arrays(self, x, y, theta, v):
        self.x = np.array(x, dtype=float)
        self.y = np.array(y, dtype=float)
        self.theta = wrap_angle(np.array(theta, dtype=float))
        self.v = np.array(v, dtype=float)
        seg = np.hypot(np.diff(self.x), np.diff(self.y))
        if np.any(seg <= MIN_SEPARATION):
            i = int(np.argmax(seg <= MIN_SEPARATION))
            raise ConfigurationError(f"waypoints {i} and {i + 1} coincide")
        self.segment_lengths = seg
        self.cumulative_arclength = np.concatenate([[0.0], np.cumsum(seg)])
        for a in (self.x, self.y, self.theta, self.v, self.cumulative_arclength):
            a.flags.writeable = False

    def __len__(self):
        return len(self.x)

    @property
    def waypoints(self):
        return [Waypoint(*map(float, row)) for row in zip(self.x, self.y, self.theta, self.v)]

    @property
    def xy(self):
        return np.column_stack([self.x, self.y])

    @property
    def length(self):
        return float(self.cumulative_arclength[-1])

    def spacing_problems(self, lo=SPACING_RANGE[0], hi=SPACING_RANGE[1]):
        """Input-resolution check for planner output (not applied to resampled paths)."""
        bad = np.flatnonzero((self.segment_lengths < lo) | (self.segment_lengths > hi))
        return [
            f"waypoints {i} and {i + 1} are {self.segment_lengths[i]:.3f} m apart (allowed {lo}-{hi} m)"
            for i in bad
        ]

    def to_records(self):
        return [
            {"x": float(a), "y": float(b), "theta": float(c), "v": float(d)}
            for a, b, c, d in zip(self.x, self.y, self.theta, self.v)
        ]

    @classmethod
    def from_records(cls, records):
        if not isinstance(records, list):
            raise ConfigurationError("trajectory must be a JSON array of waypoint objects")
        pts = []
        for i, rec in enumerate(records):
            try:
                pts.append(Waypoint(float(rec["x"]), float(rec["y"]), float(rec["theta"]), float(rec["v"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigurationError(f"waypoint {i}: {exc}") from None
        return cls(pts)


def load_trajectory(path):
    with open(path) as fh:
        return Trajectory.from_records(json.load(fh))


def save_trajectory(traj, path):
    Path(path).write_text(json.dumps(traj.to_records(), indent=1) + "\n")


def find_nearest_waypoint(traj: Trajectory, position) -> int:
    """Index of the waypoint closest to ``position``; ties go to the lower index."""
    px, py = (float(p) for p in position)
    if not (math.isfinite(px) and math.isfinite(py)):
        raise ConfigurationError(f"non-finite query position {position}")
    d2 = (traj.x - px) ** 2 + (traj.y - py) ** 2
    return int(np.argmin(d2))  # argmin returns the first minimum


def _lagrange_matrix(knots, t):
    """Rows of Lagrange basis weights, one row per evaluation point."""
    t = np.asarray(t, dtype=float)[:, None]
    W = np.ones((t.shape[0], len(knots)))
    for j, kj in enumerate(knots):
        for m, km in enumerate(knots):
            if m != j:
                W[:, j] *= (t[:, 0] - km) / (kj - km)
    return W


def _stencil_start(n, index):
    return int(min(max(index - 1, 0), n - 4))


def _stencil_knots(traj, start, parameterization):
    idx = np.arange(start, start + 4)
    chord = traj.cumulative_arclength[idx] - traj.cumulative_arclength[start]
    if parameterization == "chord":
        return idx, chord
    if parameterization == "uniform":
        return idx, np.arange(4) * (chord[-1] / 3.0)
    raise ConfigurationError(f"unknown parameterization {parameterization!r}")


def _sample_grid(t0, t1, spacing, knots, include_end):
    grid = np.arange(t0, t1, spacing)
    if include_end:
        grid = np.append(grid, t1)
    tol = 1e-3 * spacing
    inner = [k for k in knots if t0 <= k <= t1 and (include_end or k < t1)]
    # drop grid points crowding any knot, including the excluded segment end
    keep = [g for g in grid if all(abs(g - k) > tol for k in knots)]
    return np.unique(np.concatenate([keep, inner]))


def _eval_stencil(traj, idx, knots, t):
    theta = np.unwrap(traj.theta[idx])
    values = np.column_stack([traj.x[idx], traj.y[idx], theta, traj.v[idx]])
    return _lagrange_matrix(knots, t) @ values


def _as_trajectory(samples):
    return Trajectory.from_arrays(
        samples[:, 0], samples[:, 1], wrap_angle(samples[:, 2]), np.maximum(samples[:, 3], 0.0)
    )


def resample_cubic(traj: Trajectory, nearest_index: int, spacing: float = 0.1,
                   parameterization: str = "chord") -> Trajectory:
    """Dense trajectory from one cubic through four waypoints.

    The stencil is one waypoint behind ``nearest_index`` and three ahead
    (counting the nearest), shifted inward at the ends of the path. Each
    channel is interpolated over cumulative chord length; heading is
    unwrapped across the stencil before fitting. The stencil waypoints
    themselves are always part of the output.
    """
    if not spacing > 0:
        raise ConfigurationError(f"spacing must be > 0 (got {spacing})")
    n = len(traj)
    if n < 4:
        raise ConfigurationError(f"cubic resampling needs at least 4 waypoints (got {n})")
    start = _stencil_start(n, nearest_index)
    idx, knots = _stencil_knots(traj, start, parameterization)
    t = _sample_grid(knots[0], knots[-1], spacing, knots, include_end=True)
    return _as_trajectory(_eval_stencil(traj, idx, knots, t))


def resample_window(traj: Trajectory, nearest_index: int, spacing: float = 0.1,
                    ahead: float = 0.0, parameterization: str = "chord") -> Trajectory:
    """Piecewise version of :func:`resample_cubic` covering a longer look-ahead.

    Segment ``[k, k+1]`` is sampled from the cubic through waypoints
    ``k-1 .. k+2`` (clamped at the ends). The window starts one waypoint
    behind ``nearest_index`` and extends at least ``ahead`` metres past it,
    and never covers less than the single four-point stencil.
    """
    if not spacing > 0:
        raise ConfigurationError(f"spacing must be > 0 (got {spacing})")
    n = len(traj)
    if n < 4:
        raise ConfigurationError(f"cubic resampling needs at least 4 waypoints (got {n})")
    s = traj.cumulative_arclength
    first = _stencil_start(n, nearest_index)
    target = s[min(nearest_index, n - 1)] + max(ahead, 0.0)
    last = int(np.searchsorted(s, target, side="left"))
    last = min(max(last, first + 3), n - 1)

    chunks = []
    for k in range(first, last):
        start = _stencil_start(n, k)
        idx, knots = _stencil_knots(traj, start, parameterization)
        j = k - start
        t = _sample_grid(knots[j], knots[j + 1], spacing, knots, include_end=(k == last - 1))
        chunks.append(_eval_stencil(traj, idx, knots, t))
    return _as_trajectory(np.vstack(chunks))


@dataclass(frozen=True)
class ReferencePreview:
    """Output references over the prediction horizon.

    ``rows[i]`` is ``(y_ref, v_ref, theta_ref)`` for step ``i + 1``;
    ``arclength`` holds the previewed arc positions and ``clamped`` marks
    rows that ran past the end of the path.
    """

    rows: np.ndarray
    arclength: np.ndarray
    clamped: np.ndarray

    @property
    def R_s(self):
        return self.rows.ravel()

    def __len__(self):
        return self.rows.shape[0]


def reference_at(traj: Trajectory, s: float):
    """Interpolated ``(y, v, theta)`` at arc length ``s``; past the end the
    final waypoint is returned with zero speed."""
    sa = traj.cumulative_arclength
    if s > sa[-1]:
        return np.array([traj.y[-1], 0.0, traj.theta[-1]]), True
    s = max(s, 0.0)
    theta = wrap_angle(np.interp(s, sa, np.unwrap(traj.theta)))
    return np.array([np.interp(s, sa, traj.y), np.interp(s, sa, traj.v), theta]), False


def build_reference_preview(resampled: Trajectory, state: VehicleState, N_p: int, T_s: float,
                            mode: str = "advancing", min_speed: float = 0.0) -> ReferencePreview:
    """Reference rows at arc lengths advanced by the reference speed.

    ``s_i = s_{i-1} + max(v_ref(s_{i-1}), min_speed) * T_s`` starting from
    the resampled point nearest the vehicle. ``min_speed`` lets the preview
    leave a standstill reference; with the default of zero the rule is the
    plain integrated reference speed. In ``hold`` mode the first previewed
    row is repeated across the horizon.
    """
    if N_p < 1:
        raise ConfigurationError(f"N_p must be >= 1 (got {N_p})")
    if mode not in PREVIEW_MODES:
        raise ConfigurationError(f"preview_mode must be one of {PREVIEW_MODES} (got {mode!r})")
    i0 = find_nearest_waypoint(resampled, state.position)
    s = float(resampled.cumulative_arclength[i0])
    v_here = float(resampled.v[i0])
    rows = np.empty((N_p, 3))
    arcs = np.empty(N_p)
    clamped = np.zeros(N_p, dtype=bool)
    for i in range(N_p):
        s = s + max(v_here, min_speed) * T_s
        rows[i], clamped[i] = reference_at(resampled, s)
        arcs[i] = s
        v_here = rows[i, 1]
    if mode == "hold":
        rows[:] = rows[0]
        arcs[:] = arcs[0]
        clamped[:] = clamped[0]
    return ReferencePreview(rows, arcs, clamped)


@dataclass(frozen=True)
class Projection:
    segment: int
    fraction: float
    cross_track: float
    theta: float
    v: float
    distance: float


def project(traj: Trajectory, position) -> Projection:
    """Closest point on the waypoint polyline.

    ``cross_track`` is positive when ``position`` lies left of the path
    direction. Ties between segments go to the lower segment index.
    """
    p = np.asarray(position, dtype=float)
    a = traj.xy[:-1]
    d = np.diff(traj.xy, axis=0)
    L2 = np.einsum("ij,ij->i", d, d)
    f = np.clip(np.einsum("ij,ij->i", p - a, d) / L2, 0.0, 1.0)
    closest = a + f[:, None] * d
    dist2 = np.einsum("ij,ij->i", p - closest, p - closest)
    k = int(np.argmin(dist2))
    rel = p - a[k]
    cross = (d[k, 0] * rel[1] - d[k, 1] * rel[0]) / math.sqrt(L2[k])
    dist = math.sqrt(dist2[k])
    # off the segment ends the signed distance keeps the side but uses the true distance
    signed = math.copysign(dist, cross) if dist > 0 else 0.0
    th0, th1 = traj.theta[k], traj.theta[k + 1]
    theta = wrap_angle(th0 + f[k] * wrap_angle(th1 - th0))
    v = traj.v[k] + f[k] * (traj.v[k + 1] - traj.v[k])
    return Projection(k, float(f[k]), signed, theta, float(v), dist)

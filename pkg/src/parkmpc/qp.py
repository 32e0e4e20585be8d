"""Hildreth's dual coordinate-ascent solver for small dense QPs.

Solves::

    min  0.5 x'Ex + x'F    s.t.  Mx <= gamma

with E symmetric positive definite. The dual is iterated one multiplier at
a time (Gauss-Seidel order) with each multiplier clipped at zero.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import SolverError

MAX_SWEEPS = 38
DEFAULT_TOL = 1e-14
FEAS_TOL = 1e-9
PIVOT_EPS = 1e-12


@dataclass(frozen=True)
class QpProblem:
    E: np.ndarray
    F_vec: np.ndarray
    M: np.ndarray
    gamma: np.ndarray
    # set when the bounds cannot be met from the current operating point
    infeasible: bool = False

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.E, dtype=float))
        F = np.asarray(self.F_vec, dtype=float).ravel()
        n = F.size
        M = np.asarray(self.M, dtype=float).reshape(-1, n) if np.size(self.M) else np.zeros((0, n))
        g = np.asarray(self.gamma, dtype=float).ravel()
        if E.shape != (n, n):
            raise SolverError(f"E has shape {E.shape}, expected {(n, n)}")
        if M.shape[0] != g.size:
            raise SolverError(f"M has {M.shape[0]} rows but gamma has {g.size} entries")
        if not np.allclose(E, E.T, rtol=0.0, atol=1e-10):
            raise SolverError("E is not symmetric")
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "F_vec", F)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "gamma", g)

    @property
    def n(self):
        return self.F_vec.size

    @property
    def n_constraints(self):
        return self.gamma.size

    def cost(self, x):
        return 0.5 * x @ self.E @ x + x @ self.F_vec


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    lam: np.ndarray
    iterations: int
    converged: bool
    max_violation: float

    @property
    def active(self):
        return bool(np.any(self.lam > 0.0))


def _violation(qp, x):
    if qp.n_constraints == 0:
        return 0.0
    return float(max(0.0, np.max(qp.M @ x - qp.gamma)))


def solve_hildreth(qp: QpProblem, max_iter: int = MAX_SWEEPS, tol: float = DEFAULT_TOL,
                   feas_tol: float = FEAS_TOL) -> QpSolution:
    """Solve ``qp``; the iteration cap counts full sweeps over the constraints.

    ``converged`` requires both the multiplier update to settle
    (squared change below ``tol``) and the primal point to satisfy the
    constraints within ``feas_tol``.
    """
    if max_iter < 1:
        raise SolverError("max_iter must be >= 1")
    if not (np.all(np.isfinite(qp.E)) and np.all(np.isfinite(qp.F_vec))
            and np.all(np.isfinite(qp.M)) and np.all(np.isfinite(qp.gamma))):
        raise SolverError("non-finite QP data")
    try:
        factor = cho_factor(qp.E, lower=True)
    except LinAlgError:
        raise SolverError("E is not positive definite") from None

    c = qp.n_constraints
    x0 = -cho_solve(factor, qp.F_vec)
    if c == 0 or np.all(qp.M @ x0 - qp.gamma <= feas_tol):
        return QpSolution(x0, np.zeros(c), 0, True, _violation(qp, x0))

    EinvMt = cho_solve(factor, qp.M.T)
    H = qp.M @ EinvMt
    K = qp.gamma + qp.M @ (-x0)  # gamma + M E^-1 F
    diag = np.diag(H)
    lam = np.zeros(c)
    converged = False
    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        lam_old = lam.copy()
        for i in range(c):
            if abs(diag[i]) < PIVOT_EPS:
                continue
            w = -(K[i] + H[i] @ lam - diag[i] * lam[i]) / diag[i]
            lam[i] = max(0.0, w)
        if not np.all(np.isfinite(lam)):
            raise SolverError("non-finite multipliers")
        if np.sum((lam - lam_old) ** 2) < tol:
            converged = True
            break

    x = x0 - EinvMt @ lam
    if not np.all(np.isfinite(x)):
        raise SolverError("non-finite solution")
    viol = _violation(qp, x)
    return QpSolution(x, lam, sweeps, converged and viol <= feas_tol, viol)

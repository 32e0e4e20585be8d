import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import active_set_enumeration, random_qp
from parkmpc.errors import SolverError
from parkmpc.qp import QpProblem, solve_hildreth


def test_unconstrained_scalar():
    sol = solve_hildreth(QpProblem(np.eye(1), [-1.0], np.zeros((0, 1)), []))
    assert sol.x == pytest.approx([1.0])
    assert sol.iterations == 0 and sol.converged


def test_single_active_bound():
    # min 0.5 x^2 - x  s.t. x <= 0.5  ->  x = 0.5, lambda = 0.5
    sol = solve_hildreth(QpProblem(np.eye(1), [-1.0], [[1.0]], [0.5]))
    assert sol.x == pytest.approx([0.5], abs=1e-12)
    assert sol.lam == pytest.approx([0.5], abs=1e-12)
    assert sol.converged and sol.active


def test_inactive_constraints_exit_early():
    sol = solve_hildreth(QpProblem(np.eye(2), [-1.0, 0.0], np.eye(2), [5.0, 5.0]))
    assert sol.iterations == 0 and not sol.active
    assert sol.x == pytest.approx([1.0, 0.0])


def test_matches_active_set_oracle():
    rng = np.random.default_rng(20)
    checked = 0
    for _ in range(50):
        E, F, M, g = random_qp(rng)
        sol = solve_hildreth(QpProblem(E, F, M, g))
        if not sol.converged:
            continue
        x_ref, _ = active_set_enumeration(E, F, M, g)
        assert np.max(np.abs(sol.x - x_ref)) < 1e-5
        checked += 1
    assert checked >= 25


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_kkt_when_converged(seed):
    E, F, M, g = random_qp(np.random.default_rng(seed))
    sol = solve_hildreth(QpProblem(E, F, M, g))
    assert np.all(sol.lam >= 0)
    if sol.converged:
        assert np.max(np.abs(E @ sol.x + F + M.T @ sol.lam)) < 1e-6
        assert np.max(np.abs(sol.lam * (M @ sol.x - g))) < 1e-5
        assert sol.max_violation <= 1e-9


def test_deterministic():
    E, F, M, g = random_qp(np.random.default_rng(4))
    a = solve_hildreth(QpProblem(E, F, M, g))
    b = solve_hildreth(QpProblem(E, F, M, g))
    assert np.array_equal(a.x, b.x) and np.array_equal(a.lam, b.lam)


def test_iteration_cap():
    # strongly coupled constraints converge slowly; one sweep cannot finish
    E = np.array([[1.0, 0.99], [0.99, 1.0]])
    M = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    sol = solve_hildreth(QpProblem(E, [-10.0, -10.0], M, [1.0, 1.0, 1.0]), max_iter=1)
    assert sol.iterations == 1 and not sol.converged


def test_degenerate_row_skipped():
    # a zero row has H_ii = 0 and must be skipped, not divided by
    M = np.array([[0.0, 0.0], [1.0, 0.0]])
    sol = solve_hildreth(QpProblem(np.eye(2), [-2.0, 0.0], M, [-1e-3, 1.0]))
    assert sol.lam[0] == 0.0
    assert sol.x == pytest.approx([1.0, 0.0], abs=1e-9)


def test_errors():
    with pytest.raises(SolverError, match="positive definite"):
        solve_hildreth(QpProblem(-np.eye(2), [0.0, 0.0], np.eye(2), [1.0, 1.0]))
    with pytest.raises(SolverError, match="symmetric"):
        QpProblem(np.array([[1.0, 2.0], [0.0, 1.0]]), [0.0, 0.0], np.eye(2), [1.0, 1.0])
    with pytest.raises(SolverError, match="non-finite"):
        solve_hildreth(QpProblem(np.eye(1), [np.nan], [[1.0]], [1.0]))

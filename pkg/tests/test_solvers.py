import math
import warnings

import numpy as np
import pytest
from scipy import linalg

from parqo.errors import ConfigError, DomainError, SingularSystemError
from parqo.metrics import objective_f, par
from parqo.solvers import (LinearSystem, SolverConfig, affine_project, default_drs_gamma,
                           grad_lplq, probe_step_size, project_l1_ball, prox_linf,
                           solve_drs_linf, solve_fbs_lplq, solve_ls)
from parqo.streams import complex_normal

from conftest import fd_grad, random_system

cvxpy = pytest.importorskip("cvxpy")


def linf_oracle(A, y):
    """Minimum peak magnitude over {x : A x = y} from a generic conic solver."""
    x = cvxpy.Variable(A.shape[1], complex=True)
    prob = cvxpy.Problem(cvxpy.Minimize(cvxpy.norm(x, "inf")), [A @ x == y])
    prob.solve(solver=cvxpy.CLARABEL)
    return prob.value


# -- LinearSystem -------------------------------------------------------------

def test_linear_system_validation():
    with pytest.raises(DomainError):
        LinearSystem(np.ones((3, 2)), np.ones(3))
    with pytest.raises(DomainError):
        LinearSystem(np.ones((2, 3)), np.ones(3))
    with pytest.raises(SingularSystemError):
        LinearSystem(np.ones((2, 3)), np.ones(2))
    with pytest.raises(DomainError):
        LinearSystem([[1, np.nan]], [1])


def test_linear_system_is_immutable(rng):
    sys = LinearSystem(*random_system(rng, 3, 5))
    with pytest.raises(ValueError):
        sys.A[0, 0] = 1
    with pytest.raises(ValueError):
        sys.y[0] = 1


def test_gram_factor_is_upper_cholesky(rng):
    sys = LinearSystem(*random_system(rng, 6, 11))
    U = sys.gram_factor
    assert np.allclose(np.tril(U, -1), 0)
    assert np.allclose(U.conj().T @ U, sys.A @ sys.A.conj().T, atol=1e-12)


# -- projection and LS ----------------------------------------------------------

def test_affine_project_examples():
    sys = LinearSystem([[1, 1]], [2])
    assert np.allclose(affine_project(np.zeros(2), sys), [1, 1], atol=1e-15)
    assert np.allclose(solve_ls(sys), [1, 1], atol=1e-15)
    # already feasible points are fixed
    assert np.allclose(affine_project([3, -1], sys), [3, -1], atol=1e-14)


def test_ls_of_identity_is_y(rng):
    y = complex_normal(rng, (7,))
    assert np.allclose(solve_ls(LinearSystem(np.eye(7), y)), y, atol=1e-14)


def test_ls_matches_svd_pseudo_inverse(rng):
    A, y = random_system(rng, 10, 20)
    x = solve_ls(LinearSystem(A, y))
    ref = linalg.pinv(A) @ y
    assert np.linalg.norm(x - ref) / np.linalg.norm(ref) < 1e-10


def test_projection_is_nearest_feasible_point(rng):
    A, y = random_system(rng, 30, 60)
    sys = LinearSystem(A, y)
    null = linalg.null_space(A)
    for _ in range(20):
        z = complex_normal(rng, (60,)) * 3
        x = affine_project(z, sys)
        assert sys.residual(x) < 1e-12
        other = x + null @ complex_normal(rng, (null.shape[1],)) * rng.uniform(1e-3, 1)
        assert sys.residual(other) < 1e-10
        assert np.linalg.norm(z - x) <= np.linalg.norm(z - other)


def test_ls_is_minimum_norm_on_large_system(rng):
    A, y = random_system(rng, 100, 200)
    sys = LinearSystem(A, y)
    x = solve_ls(sys)
    null = linalg.null_space(A)
    for _ in range(10):
        other = x + null @ complex_normal(rng, (null.shape[1],)) * 0.1
        assert np.linalg.norm(x) <= np.linalg.norm(other)


# -- gradient ----------------------------------------------------------------------

def test_gradient_example_value():
    g = grad_lplq(np.array([1, 0]), 4, 2)
    assert g[0] == pytest.approx(math.sqrt(2) - 1, abs=1e-15)
    assert g[1] == 0
    fd = fd_grad(lambda v: objective_f(v, 4, 2), np.array([1, 0]))
    assert abs(fd[0] - g[0]) / abs(g[0]) < 1e-6


@pytest.mark.parametrize("p, q", [(4, 2), (3, 2), (2, 1)])
def test_gradient_matches_finite_differences(rng, p, q):
    for n in (10, 37):
        x = complex_normal(rng, (n,))
        g = grad_lplq(x, p, q)
        fd = fd_grad(lambda v: objective_f(v, p, q), x)
        assert np.linalg.norm(g - fd) / np.linalg.norm(g) < 1e-6


@pytest.mark.parametrize("p, q", [(4, 2), (3, 2), (2, 1), (6, 1.5)])
def test_min_par_points_are_stationary(p, q):
    for x in (np.array([1, 1j, -1]), 2.5 * np.exp(0.7j * np.arange(40))):
        assert np.linalg.norm(grad_lplq(x, p, q)) < 1e-12 * np.linalg.norm(x)


def test_gradient_of_zero_and_zero_entries():
    assert np.array_equal(grad_lplq(np.zeros(4), 2, 1), np.zeros(4))
    g = grad_lplq(np.array([1, 0, 2j]), 2, 1)
    assert g[1] == 0 and np.all(np.isfinite(g))
    with pytest.raises(DomainError):
        grad_lplq([1, 2], math.inf, 2)


# -- l1 ball and prox ----------------------------------------------------------------

def test_l1_projection_examples():
    v = np.array([0.2, -0.3j, 0.1])
    assert np.array_equal(project_l1_ball(v, 1.0), v)
    assert np.allclose(project_l1_ball(np.array([3, 0]), 1), [1, 0])
    u = project_l1_ball(np.array([2, 1]), 2)
    assert np.allclose(u, [1.5, 0.5], atol=1e-15)


def test_l1_threshold_by_exhaustive_search():
    # oracle: theta solving sum(max(|v| - theta, 0)) = radius on a dense grid
    v = np.array([2.0, 1.0])
    thetas = np.linspace(0, 2, 200001)
    sums = np.maximum(v[:, None] - thetas, 0).sum(axis=0)
    theta = thetas[np.argmin(np.abs(sums - 2))]
    assert theta == pytest.approx(0.5, abs=1e-5)
    assert np.allclose(project_l1_ball(v, 2), np.maximum(v - theta, 0), atol=1e-5)


def test_l1_projection_is_nearest_point_in_ball(rng):
    for _ in range(20):
        v = complex_normal(rng, (12,)) * 2
        r = float(rng.uniform(0.1, 5))
        u = project_l1_ball(v, r)
        assert np.abs(u).sum() <= r * (1 + 1e-12)
        # phases preserved on the support
        nz = np.abs(u) > 0
        assert np.allclose(np.angle(u[nz]), np.angle(v[nz]))
        # no random point of the ball is closer
        for _ in range(50):
            w = complex_normal(rng, (12,))
            w *= r * rng.uniform(0, 1) / np.abs(w).sum()
            assert np.linalg.norm(v - u) <= np.linalg.norm(v - w) + 1e-12


def test_l1_projection_radius_domain():
    with pytest.raises(DomainError):
        project_l1_ball([1, 2], 0)


def test_prox_linf_examples():
    assert np.array_equal(prox_linf(np.zeros(3), 1.0), np.zeros(3))
    assert np.allclose(prox_linf(np.array([3, 0]), 1), [2, 0])
    with pytest.raises(DomainError):
        prox_linf([1], -1)


def test_prox_linf_against_grid_search(rng):
    z = complex_normal(rng, (8,))
    tau = 0.3
    mags = np.abs(z)
    # prox clips every magnitude at a common level a; minimize over a
    levels = np.linspace(0, mags.max(), 400001)
    cost = tau * levels + 0.5 * (np.maximum(mags[:, None] - levels, 0) ** 2).sum(axis=0)
    a = levels[np.argmin(cost)]
    x = prox_linf(z, tau)
    assert np.abs(x).max() == pytest.approx(a, abs=1e-4)
    assert np.allclose(x, z * np.minimum(1, a / mags), atol=1e-4)


def test_moreau_identity(rng):
    for _ in range(20):
        z = complex_normal(rng, (25,))
        tau = float(rng.uniform(0.01, 4))
        assert np.linalg.norm(prox_linf(z, tau) + project_l1_ball(z, tau) - z) < 1e-12
        assert np.abs(prox_linf(z, tau)).max() <= np.abs(z).max()


# -- configuration and probing ---------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    dict(p=2, q=2), dict(p=4, q=0.5), dict(k_max=0), dict(feas_tol=0), dict(tau=-1),
    dict(drs_gamma=0), dict(probe_horizon=0),
])
def test_config_validation(kwargs):
    with pytest.raises(ConfigError):
        SolverConfig(**kwargs)


def test_probe_warns_at_min_par_point():
    sys = LinearSystem([[1, 1]], [2])
    with pytest.warns(RuntimeWarning):
        tau, stalled = probe_step_size(sys, solve_ls(sys), SolverConfig())
    assert stalled and tau == 2.0**-40


def test_probe_is_deterministic_and_gives_monotone_run(rng):
    sys = LinearSystem(*random_system(rng, 100, 200))
    x0 = solve_ls(sys)
    tau1, _ = probe_step_size(sys, x0, SolverConfig())
    tau2, _ = probe_step_size(sys, x0, SolverConfig())
    assert tau1 == tau2
    _, tr = solve_fbs_lplq(sys, SolverConfig(tau=tau1, k_max=21))
    assert np.all(np.diff(tr.objective) <= 0)


# -- FBS ------------------------------------------------------------------------

def test_fbs_trivial_systems(rng):
    y = complex_normal(rng, (5,))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        x, tr = solve_fbs_lplq(LinearSystem(np.eye(5), y), SolverConfig(k_max=5))
    assert np.allclose(x, y)
    assert np.allclose(tr.par, tr.par[0])
    x, tr = solve_fbs_lplq(LinearSystem([[1, 1]], [2]), SolverConfig(k_max=4))
    assert np.allclose(x, [1, 1])
    assert np.allclose(tr.objective, 0, atol=1e-15)


@pytest.mark.parametrize("p, q", [(4, 2), (2, 1), (3, 2)])
def test_fbs_trace_contract(rng, p, q):
    sys = LinearSystem(*random_system(rng, 40, 80))
    x_ls = solve_ls(sys)
    x, tr = solve_fbs_lplq(sys, SolverConfig(p=p, q=q, k_max=300))
    assert len(tr) == 300
    assert list(tr.iterations[:3]) == [1, 2, 3]
    assert tr.pinc[0] == 1.0
    assert tr.par[0] == pytest.approx(par(x_ls), rel=1e-12)
    assert tr.objective[0] == pytest.approx(objective_f(x_ls, p, q), rel=1e-12)
    assert np.all(np.diff(tr.objective) <= 1e-12 * tr.objective[0])
    assert tr.par[-1] < tr.par[0]
    assert np.all(tr.par_pq <= tr.par * (1 + 1e-12))
    k, obj, rep = tr[-1]
    assert k == 300 and obj == tr.objective[-1]
    assert rep.par == pytest.approx(par(x), rel=1e-10)
    assert sys.residual(x) < 1e-9


def test_fbs_first_iterate_is_ls_bitwise(rng):
    sys = LinearSystem(*random_system(rng, 10, 30))
    x1, _ = solve_fbs_lplq(sys, SolverConfig(k_max=1))
    d1, _ = solve_drs_linf(sys, SolverConfig(k_max=1))
    assert np.array_equal(x1, solve_ls(sys))
    assert np.array_equal(d1, solve_ls(sys))


def test_fbs_early_exit(rng):
    sys = LinearSystem(*random_system(rng, 10, 30))
    x, tr = solve_fbs_lplq(sys, SolverConfig(k_max=10**6, stop_objective=1e-12, check_every=500))
    assert tr.objective[-1] < 1e-12
    assert len(tr) < 10**6 and len(tr) % 500 == 1
    assert par(x) < 1 + 1e-10


def test_fbs_without_trace(rng):
    sys = LinearSystem(*random_system(rng, 10, 30))
    x, tr = solve_fbs_lplq(sys, SolverConfig(k_max=20, record_trace=False))
    assert tr is None and sys.residual(x) < 1e-9


# -- DRS ------------------------------------------------------------------------

def test_drs_examples():
    x, _ = solve_drs_linf(LinearSystem([[1, -1]], [2]), SolverConfig(k_max=500))
    assert np.allclose(x, [1, -1], atol=1e-9)
    x, _ = solve_drs_linf(LinearSystem([[1, 1]], [2]), SolverConfig(k_max=50))
    assert np.allclose(x, [1, 1], atol=1e-12)


def test_drs_default_weight(rng):
    A, y = random_system(rng, 4, 9)
    sys = LinearSystem(A, y)
    assert default_drs_gamma(sys) == pytest.approx(np.linalg.norm(y) / 2)
    _, tr = solve_drs_linf(sys, SolverConfig(k_max=3))
    assert tr.tau == default_drs_gamma(sys)
    with pytest.raises(DomainError):
        solve_drs_linf(LinearSystem(A, np.zeros(4)), SolverConfig(k_max=3))


def test_drs_matches_convex_oracle_on_small_instances(rng):
    for _ in range(20):
        A, y = random_system(rng, 5, 10)
        sys = LinearSystem(A, y)
        x, tr = solve_drs_linf(sys, SolverConfig(k_max=5000))
        assert abs(np.abs(x).max() - linf_oracle(A, y)) < 1e-4
        assert par(x) <= 10 / 6 + 1e-3
        assert sys.residual(x) < 1e-9
        assert tr.objective[-1] == pytest.approx(np.abs(x).max())


def test_drs_solution_has_n_minus_m_plus_one_peaks(rng):
    A, y = random_system(rng, 5, 10)
    x, _ = solve_drs_linf(LinearSystem(A, y), SolverConfig(k_max=20000))
    mags = np.abs(x)
    assert np.sum(mags > mags.max() * (1 - 1e-5)) >= 10 - 5 + 1

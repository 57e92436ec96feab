"""NumPy reference implementation of the hot kernels.

Every function here has a twin with the same signature in the compiled
``_ckernels`` module. ``parqo.kernels`` picks one at import time.
"""
import numpy as np
from scipy.linalg import solve_triangular

BACKEND = "numpy"

# magnitudes below this are treated as exact zeros by the gradient
ZERO_MAG = 1e-300


def objective(x, p, q):
    a = np.abs(x)
    n = a.shape[0]
    sp = np.sum(a**p)
    sq = np.sum(a**q)
    return n ** (2.0 / q - 2.0 / p) * sp ** (2.0 / p) - sq ** (2.0 / q)


def objective_cols(T, p, q):
    a = np.abs(T)
    n = a.shape[0]
    sp = np.sum(a**p, axis=0)
    sq = np.sum(a**q, axis=0)
    return n ** (2.0 / q - 2.0 / p) * sp ** (2.0 / p) - sq ** (2.0 / q)


def _grad_coeffs(a, p, q, axis=None):
    n = a.shape[0]
    sp = np.sum(a**p, axis=axis)
    sq = np.sum(a**q, axis=axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        cp = np.where(sp > 0, n ** (2.0 / q - 2.0 / p) * sp ** ((2.0 - p) / p), 0.0)
        cq = np.where(sq > 0, sq ** ((2.0 - q) / q), 0.0)
    return cp, cq


def grad_lplq(x, p, q):
    x = np.asarray(x, dtype=np.complex128)
    a = np.abs(x)
    cp, cq = _grad_coeffs(a, p, q)
    nz = a >= ZERO_MAG
    out = np.zeros_like(x)
    an = a[nz]
    out[nz] = (cp * an ** (p - 2.0) - cq * an ** (q - 2.0)) * x[nz]
    return out


def grad_lplq_cols(T, p, q):
    T = np.asarray(T, dtype=np.complex128)
    a = np.abs(T)
    cp, cq = _grad_coeffs(a, p, q, axis=0)
    nz = a >= ZERO_MAG
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = cp[None, :] * a ** (p - 2.0) - cq[None, :] * a ** (q - 2.0)
    coef[~nz] = 0.0
    return coef * T


def l1_threshold(mags, radius):
    """Soft threshold ``theta`` with ``sum(max(mags - theta, 0)) == radius``."""
    if mags.sum() <= radius:
        return 0.0
    s = np.sort(mags)[::-1]
    excess = np.cumsum(s) - radius
    j = np.arange(1, s.size + 1)
    rho = np.flatnonzero(s * j > excess)[-1]
    return excess[rho] / (rho + 1)


def _shrink(v, a, theta):
    if theta == 0.0:
        return v.copy()
    keep = a > theta
    out = np.zeros_like(v)
    out[keep] = v[keep] * ((a[keep] - theta) / a[keep])
    return out


def project_l1_ball(v, radius):
    v = np.asarray(v, dtype=np.complex128)
    a = np.abs(v)
    return _shrink(v, a, l1_threshold(a, radius))


def project_l1_ball_cols(V, radius):
    V = np.asarray(V, dtype=np.complex128)
    out = np.empty_like(V)
    a = np.abs(V)
    for b in range(V.shape[1]):
        out[:, b] = _shrink(V[:, b], a[:, b], l1_threshold(a[:, b], radius))
    return out


def affine_project(z, A, U, y):
    """``z - A^H (A A^H)^{-1} (A z - y)`` with ``A A^H = U^H U``."""
    r = A @ z - y
    u = solve_triangular(U, r, trans="C", lower=False, check_finite=False)
    u = solve_triangular(U, u, lower=False, check_finite=False)
    return z - A.conj().T @ u


def _record(stats, k, x, p, q):
    a2 = x.real**2 + x.imag**2
    a = np.sqrt(a2)
    stats[k, 0] = a2.max()
    stats[k, 1] = a2.sum()
    stats[k, 2] = np.sum(a**p) ** (2.0 / p)
    stats[k, 3] = np.sum(a**q) ** (2.0 / q)


def fbs_run(x, A, U, y, p, q, tau, n_iter, stats=None):
    """Run ``n_iter`` projected-gradient steps from ``x``; return the last iterate.

    If given, row ``k`` of ``stats`` receives ``(max|x|^2, ||x||_2^2,
    ||x||_p^2, ||x||_q^2)`` of iterate ``k``.
    """
    AH = A.conj().T
    for k in range(n_iter):
        w = x - tau * grad_lplq(x, p, q)
        r = A @ w - y
        u = solve_triangular(U, r, trans="C", lower=False, check_finite=False)
        u = solve_triangular(U, u, lower=False, check_finite=False)
        x = w - AH @ u
        if stats is not None:
            _record(stats, k, x, p, q)
    return x


def drs_run(x, z, A, U, y, gamma, p, q, n_iter, stats=None):
    """Douglas-Rachford steps for ``min ||x||_inf s.t. A x = y``.

    ``x`` is the current (feasible) shadow iterate ``proj(z)``. Returns the
    updated ``(x, z)``.
    """
    AH = A.conj().T
    for k in range(n_iter):
        t = 2.0 * x - z
        v = t - project_l1_ball(t, gamma)
        z = z + v - x
        r = A @ z - y
        u = solve_triangular(U, r, trans="C", lower=False, check_finite=False)
        u = solve_triangular(U, u, lower=False, check_finite=False)
        x = z - AH @ u
        if stats is not None:
            _record(stats, k, x, p, q)
    return x, z

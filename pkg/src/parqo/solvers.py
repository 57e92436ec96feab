"""Constrained solvers for ``y = A x`` with ``A`` wide.

* :func:`solve_ls` -- minimum-norm solution (projection of the origin).
* :func:`solve_fbs_lplq` -- forward-backward splitting on the lp-lq
  objective, i.e. projected gradient descent onto the solution set.
* :func:`solve_drs_linf` -- Douglas-Rachford splitting for minimum peak
  magnitude, the convex baseline.

Both iterative solvers start from the LS solution and report it as
iteration 1.
"""
from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy import linalg

from . import kernels
from .errors import ConfigError, DomainError, SingularSystemError
from .metrics import ParReport

MAX_GRAM_COND = 1e12
PROBE_EXPONENTS = 40


class LinearSystem:
    """Immutable ``(A, y)`` pair with a cached Cholesky factor of ``A A^H``."""

    def __init__(self, A, y):
        A = np.array(A, dtype=np.complex128, order="F")
        y = np.array(y, dtype=np.complex128).ravel()
        if A.ndim != 2:
            raise DomainError("A must be a matrix")
        m, n = A.shape
        if y.size != m:
            raise DomainError(f"y has length {y.size}, A has {m} rows")
        if m > n:
            raise DomainError(f"system is overdetermined ({m}x{n})")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
            raise DomainError("A and y must be finite")
        gram = A @ A.conj().T
        cond = np.linalg.cond(gram)
        if not cond <= MAX_GRAM_COND:
            raise SingularSystemError(f"A A^H is ill-conditioned (cond={cond:.3g})")
        try:
            U = linalg.cholesky(gram, lower=False)
        except linalg.LinAlgError as exc:
            raise SingularSystemError(f"A A^H is not positive definite: {exc}") from None
        A.setflags(write=False)
        y.setflags(write=False)
        self.A = A
        self.y = y
        self.gram_factor = np.asfortranarray(U)
        self.gram_factor.setflags(write=False)

    @property
    def shape(self):
        return self.A.shape

    def residual(self, x):
        """Relative constraint violation ``||A x - y|| / ||y||``."""
        ny = np.linalg.norm(self.y)
        r = np.linalg.norm(self.A @ x - self.y)
        return r / ny if ny > 0 else r


@dataclass(frozen=True)
class SolverConfig:
    """Settings shared by the iterative solvers.

    ``tau=None`` selects the step size with :func:`probe_step_size`.
    ``probe_horizon`` is the number of consecutive steps a candidate step
    size must pass the sufficient-decrease test for.
    ``drs_gamma=None`` uses ``||y|| / sqrt(M)`` as the Douglas-Rachford
    prox weight. ``stop_objective`` enables an early exit for FBS once the
    objective falls below it (checked every ``check_every`` iterations).
    """

    p: float = 4.0
    q: float = 2.0
    tau: float | None = None
    k_max: int = 20
    feas_tol: float = 1e-9
    record_trace: bool = True
    probe_horizon: int = 1
    drs_gamma: float | None = None
    stop_objective: float | None = None
    check_every: int = 1000

    def __post_init__(self):
        if not (self.q >= 1 and self.q < self.p):
            raise ConfigError(f"need 1 <= q < p, got p={self.p}, q={self.q}")
        if self.k_max < 1:
            raise ConfigError("k_max must be at least 1")
        if not self.feas_tol > 0:
            raise ConfigError("feas_tol must be positive")
        if self.tau is not None and not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.drs_gamma is not None and not self.drs_gamma > 0:
            raise ConfigError("drs_gamma must be positive")
        if self.probe_horizon < 1 or self.check_every < 1:
            raise ConfigError("probe_horizon and check_every must be positive")


@dataclass
class IterTrace:
    """Per-iteration figures of merit; index 0 is iteration 1 (the LS point)."""

    objective: np.ndarray
    par: np.ndarray
    pinc: np.ndarray
    par_pq: np.ndarray
    tau: float = math.nan
    stalled: bool = False
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.objective)

    @property
    def iterations(self):
        return np.arange(1, len(self) + 1)

    def __getitem__(self, i):
        rep = ParReport(
            par=float(self.par[i]),
            pinc=float(self.pinc[i]),
            par_pq=float(self.par_pq[i]),
            objective=float(self.objective[i]),
        )
        return int(self.iterations[i]), float(self.objective[i]), rep


def affine_project(z, sys):
    """Euclidean projection of ``z`` onto ``{x : A x = y}``."""
    z = np.asarray(z, dtype=np.complex128)
    return kernels.affine_project(z, sys.A, sys.gram_factor, sys.y)


def solve_ls(sys):
    """Minimum-norm solution of ``y = A x``."""
    return affine_project(np.zeros(sys.shape[1], dtype=np.complex128), sys)


def grad_lplq(x, p, q):
    """Conjugate-coordinate gradient of the lp-lq objective.

    Entries with zero magnitude get a zero component. The real gradient
    with respect to ``(Re x, Im x)`` is twice this vector.
    """
    if not (q >= 1 and q < p and math.isfinite(p)):
        raise DomainError(f"need 1 <= q < p < inf, got p={p}, q={q}")
    x = np.asarray(x, dtype=np.complex128)
    if x.size == 0:
        return x.copy()
    return kernels.grad_lplq(x, float(p), float(q))


def project_l1_ball(v, radius):
    """Projection onto ``{u : ||u||_1 <= radius}`` (phases preserved)."""
    if not radius > 0:
        raise DomainError("radius must be positive")
    return kernels.project_l1_ball(np.asarray(v, dtype=np.complex128), float(radius))


def prox_linf(z, tau):
    """``argmin_x tau ||x||_inf + ||x - z||^2 / 2`` via Moreau decomposition."""
    if not tau > 0:
        raise DomainError("tau must be positive")
    z = np.asarray(z, dtype=np.complex128)
    return z - kernels.project_l1_ball(z, float(tau))


def _objectives(stats, n, p, q):
    return n ** (2.0 / q - 2.0 / p) * stats[:, 2] - stats[:, 3]


def _first_row(x, p, q):
    a2 = x.real**2 + x.imag**2
    a = np.sqrt(a2)
    return np.array([a2.max(), a2.sum(), np.sum(a**p) ** (2 / p), np.sum(a**q) ** (2 / q)])


def sufficient_decrease(f_old, f_new, step_energy, tau):
    """Backtracking test ``f_new <= f_old - ||d||^2 / tau`` for a projected step.

    For an exact projection onto an affine set this is the descent-lemma
    bound with curvature ``2 / tau``; it fails for steps at or beyond the
    stability limit, where the objective starts to oscillate.
    """
    return bool(np.isfinite(f_new) and f_new < f_old and f_new <= f_old - step_energy / tau)


def probe_step_size(sys, x0, cfg):
    """Pick a fixed FBS step size by halving from 1.

    Returns ``(tau, stalled)``: ``tau`` is the largest ``2**-k``
    (``k = 0..40``) for which each of ``cfg.probe_horizon`` FBS steps from
    ``x0`` passes :func:`sufficient_decrease`. If none does,
    ``(2**-40, True)`` is returned and a warning is issued.
    """
    p, q = float(cfg.p), float(cfg.q)
    for k in range(PROBE_EXPONENTS + 1):
        tau = 2.0**-k
        x = x0
        f_old = kernels.objective(x, p, q)
        for _ in range(cfg.probe_horizon):
            x_new = kernels.fbs_run(x, sys.A, sys.gram_factor, sys.y, p, q, tau, 1)
            d = x_new - x
            f_new = kernels.objective(x_new, p, q)
            if not sufficient_decrease(f_old, f_new, float(np.vdot(d, d).real), tau):
                break
            x, f_old = x_new, f_new
        else:
            return tau, False
    warnings.warn("no probed step size decreases the objective; x0 is near-stationary",
                  RuntimeWarning, stacklevel=2)
    return 2.0**-PROBE_EXPONENTS, True


def _trace_from_stats(stats, n, p, q, ls_energy, objective):
    with np.errstate(divide="ignore", invalid="ignore"):
        par = n * stats[:, 0] / stats[:, 1]
        par_pq = n ** (2.0 / q - 2.0 / p) * stats[:, 2] / stats[:, 3]
    return IterTrace(
        objective=objective,
        par=par,
        pinc=stats[:, 1] / ls_energy,
        par_pq=par_pq,
    )


def _check_feasible(sys, x, cfg):
    res = sys.residual(x)
    if not res <= cfg.feas_tol:
        raise SingularSystemError(f"iterate violates the constraints (relative residual {res:.3g})")


def solve_fbs_lplq(sys, cfg=SolverConfig()):
    """Forward-backward splitting for ``min f_pq(x) s.t. A x = y``.

    Iteration 1 is the LS solution; each further iteration takes a gradient
    step of size ``tau`` and projects back onto the solution set. Runs
    ``cfg.k_max`` iterations unless ``cfg.stop_objective`` triggers.
    """
    if math.isinf(cfg.p):
        raise ConfigError("FBS needs a finite p")
    p, q = float(cfg.p), float(cfg.q)
    n = sys.shape[1]
    x = solve_ls(sys)
    stalled = False
    if cfg.tau is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            tau, stalled = probe_step_size(sys, x, cfg)
    else:
        tau = float(cfg.tau)

    stats = np.empty((cfg.k_max, 4))
    stats[0] = _first_row(x, p, q)
    done = 1
    chunk = cfg.k_max - 1 if cfg.stop_objective is None else cfg.check_every
    while done < cfg.k_max:
        step = min(chunk, cfg.k_max - done)
        x = kernels.fbs_run(x, sys.A, sys.gram_factor, sys.y, p, q, tau, step,
                            stats[done:done + step])
        done += step
        if cfg.stop_objective is not None:
            if _objectives(stats[done - 1:done], n, p, q)[0] < cfg.stop_objective:
                break
    stats = stats[:done]
    _check_feasible(sys, x, cfg)
    trace = _trace_from_stats(stats, n, p, q, stats[0, 1], _objectives(stats, n, p, q))
    trace.tau = tau
    trace.stalled = stalled
    return x, (trace if cfg.record_trace else None)


def default_drs_gamma(sys):
    return float(np.linalg.norm(sys.y) / math.sqrt(sys.shape[0]))


def solve_drs_linf(sys, cfg=SolverConfig()):
    """Douglas-Rachford splitting for ``min ||x||_inf s.t. A x = y``.

    The iteration alternates the l-infinity prox with the affine projection;
    the reported iterate is the projected (feasible) point, starting at the
    LS solution. The trace objective is ``||x||_inf``.
    """
    p, q = float(cfg.p), float(cfg.q)
    if math.isinf(p):
        p = 4.0
    n = sys.shape[1]
    gamma = cfg.drs_gamma if cfg.drs_gamma is not None else default_drs_gamma(sys)
    if not gamma > 0:
        raise DomainError("DRS prox weight must be positive (is y zero?)")
    x = solve_ls(sys)
    z = np.zeros_like(x)
    stats = np.empty((cfg.k_max, 4))
    stats[0] = _first_row(x, p, q)
    if cfg.k_max > 1:
        x, z = kernels.drs_run(x, z, sys.A, sys.gram_factor, sys.y, gamma, p, q,
                               cfg.k_max - 1, stats[1:])
    _check_feasible(sys, x, cfg)
    trace = _trace_from_stats(stats, n, p, q, stats[0, 1], np.sqrt(stats[:, 0]))
    trace.tau = gamma
    return x, (trace if cfg.record_trace else None)

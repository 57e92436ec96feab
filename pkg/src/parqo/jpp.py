"""Joint precoding and PAR reduction (JPP) over an OFDM symbol.

The unknowns are the antenna time signals ``T`` (``W x B``). The
constraints live in the frequency domain: ``H_w x_w = s_w`` on used tones
(zero EVM) and ``x_w = 0`` on unused tones (zero out-of-band energy).
Every iterate is mapped to frequency, projected tone by tone, and mapped
back, so all reported iterates satisfy the constraints.

Two solvers are provided: FBS on the per-antenna sum of lp-lq objectives,
and a Douglas-Rachford baseline minimizing per-antenna peak magnitudes.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from . import kernels
from .errors import ConfigError
from .ofdm import ToneProjector, freq_to_time, oob_energy, time_to_freq
from .solvers import PROBE_EXPONENTS, sufficient_decrease


@dataclass(frozen=True)
class JppConfig:
    """JPP solver settings.

    ``solver`` is ``"lplq"`` or ``"linf"``. For ``"linf"``, ``linf_scope``
    selects the penalty: ``"antenna"`` sums per-antenna peaks, ``"grid"``
    uses the single largest sample of the whole grid. ``gamma=None`` uses
    ``||S||_F / sqrt(M)`` with ``M`` the number of scalar constraints.
    """

    solver: str = "lplq"
    p: float = 4.0
    q: float = 2.0
    tau: float | None = None
    k_max: int = 20
    feas_tol: float = 1e-10
    record_trace: bool = True
    probe_horizon: int = 1
    gamma: float | None = None
    linf_scope: str = "antenna"

    def __post_init__(self):
        if self.solver not in ("lplq", "linf"):
            raise ConfigError(f"unknown JPP solver {self.solver!r}")
        if self.solver == "lplq" and not (1 <= self.q < self.p < math.inf):
            raise ConfigError(f"need 1 <= q < p < inf, got p={self.p}, q={self.q}")
        if self.k_max < 1:
            raise ConfigError("k_max must be at least 1")
        if self.tau is not None and not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("gamma must be positive")
        if self.linf_scope not in ("antenna", "grid"):
            raise ConfigError(f"unknown linf scope {self.linf_scope!r}")
        if self.probe_horizon < 1 or not self.feas_tol > 0:
            raise ConfigError("probe_horizon and feas_tol must be positive")

    @property
    def label(self):
        if self.solver == "linf":
            return "linf"
        return f"lplq:{self.p:g}:{self.q:g}"


@dataclass
class JppTrace:
    """Raw per-iteration measurements; row 0 is iteration 1 (LS)."""

    par: np.ndarray          # (K, B) per-antenna PAR
    energy: np.ndarray       # (K,) ||T||_F^2
    objective: np.ndarray    # (K,) solver objective
    evm: np.ndarray          # (K,) max relative EVM residual over used tones
    oob: np.ndarray          # (K,) energy on unused tones
    parseval: np.ndarray     # (K,) | ||T||_F - ||X||_F | / ||X||_F

    def __len__(self):
        return len(self.energy)


@dataclass
class JppResult:
    T: np.ndarray
    X: np.ndarray
    trace: JppTrace | None
    tau: float = math.nan
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class JppMetrics:
    iteration: int
    par: np.ndarray
    pinc: float
    objective: float
    evm: float
    oob_energy: float
    parseval: float


def jpp_project(X, S, chan, plan, projector=None):
    """Project frequency grid ``X`` onto the JPP constraint set."""
    proj = projector or ToneProjector(chan, plan)
    return proj.project(X, S)


def jpp_gradient(T, p, q):
    """Column-wise lp-lq gradient of the summed per-antenna objective (``N = W``)."""
    if not (1 <= q < p < math.inf):
        raise ConfigError(f"need 1 <= q < p < inf, got p={p}, q={q}")
    return np.ascontiguousarray(kernels.grad_lplq_cols(np.asarray(T, dtype=np.complex128),
                                                       float(p), float(q)))


def jpp_objective(T, p, q):
    return float(np.sum(kernels.objective_cols(np.asarray(T, dtype=np.complex128),
                                               float(p), float(q))))


def default_gamma(S, plan, n_antennas):
    """``||y|| / sqrt(M)`` for the stacked JPP constraint system."""
    U = S.shape[0]
    m = U * plan.used.size + n_antennas * (plan.W - plan.used.size)
    return float(np.linalg.norm(S) / math.sqrt(m))


def grid_energy(T):
    """``||T||_F^2`` summed per antenna, the same order the trace uses."""
    return float((T.real**2 + T.imag**2).sum(axis=0).sum())


class _Problem:
    def __init__(self, S, chan, plan, projector):
        self.S = S
        self.plan = plan
        self.proj = projector or ToneProjector(chan, plan)

    def project(self, T):
        X = self.proj.project(time_to_freq(T), self.S)
        return freq_to_time(X), X


def _linf_prox(V, gamma, scope):
    if scope == "grid":
        flat = np.ravel(V, order="F")
        return V - kernels.project_l1_ball(flat, gamma).reshape(V.shape, order="F")
    return V - kernels.project_l1_ball_cols(V, gamma)


def _linf_objective(T, scope):
    a = np.abs(T)
    return float(a.max() if scope == "grid" else a.max(axis=0).sum())


def probe_jpp_step(problem, T0, p, q, horizon=1):
    """Largest ``2**-k`` step passing the sufficient-decrease test from ``T0``."""
    for k in range(PROBE_EXPONENTS + 1):
        tau = 2.0**-k
        T = T0
        f_old = jpp_objective(T, p, q)
        for _ in range(horizon):
            T_new, _ = problem.project(T - tau * jpp_gradient(T, p, q))
            d = T_new - T
            f_new = jpp_objective(T_new, p, q)
            if not sufficient_decrease(f_old, f_new, float(np.vdot(d, d).real), tau):
                break
            T, f_old = T_new, f_new
        else:
            return tau, False
    return 2.0**-PROBE_EXPONENTS, True


class _Recorder:
    def __init__(self, k_max, B, problem, cfg):
        self.par = np.empty((k_max, B))
        self.energy = np.empty(k_max)
        self.objective = np.empty(k_max)
        self.evm = np.empty(k_max)
        self.oob = np.empty(k_max)
        self.parseval = np.empty(k_max)
        self.problem = problem
        self.cfg = cfg

    def __call__(self, k, T, X):
        a2 = T.real**2 + T.imag**2
        col = a2.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.par[k] = T.shape[0] * a2.max(axis=0) / col
        energy = col.sum()
        self.energy[k] = energy
        cfg = self.cfg
        if cfg.solver == "lplq":
            self.objective[k] = jpp_objective(T, cfg.p, cfg.q)
        else:
            self.objective[k] = _linf_objective(T, cfg.linf_scope)
        self.evm[k] = self.problem.proj.evm(X, self.problem.S)
        self.oob[k] = oob_energy(X, self.problem.plan)
        nx = math.sqrt(float(np.vdot(X, X).real))
        self.parseval[k] = abs(math.sqrt(energy) - nx) / nx if nx > 0 else 0.0

    def trace(self, n):
        return JppTrace(self.par[:n], self.energy[:n], self.objective[:n], self.evm[:n],
                        self.oob[:n], self.parseval[:n])


def solve_jpp(S, chan, plan, cfg=JppConfig(), projector=None):
    """Run ``cfg.k_max`` JPP iterations starting from the LS precoder output.

    ``projector`` may be a prebuilt :class:`~parqo.ofdm.ToneProjector` for
    ``(chan, plan)`` so several solvers can share one factorization.
    """
    S = np.asarray(S, dtype=np.complex128)
    problem = _Problem(S, chan, plan, projector)
    B = problem.proj.B
    X = problem.proj.project(np.zeros((B, plan.W), dtype=np.complex128), S)
    T = freq_to_time(X)
    rec = _Recorder(cfg.k_max, B, problem, cfg) if cfg.record_trace else None
    if rec:
        rec(0, T, X)

    extra = {}
    if cfg.solver == "lplq":
        p, q = float(cfg.p), float(cfg.q)
        if cfg.tau is None:
            tau, stalled = probe_jpp_step(problem, T, p, q, cfg.probe_horizon)
            extra["stalled"] = stalled
        else:
            tau = float(cfg.tau)
        for k in range(1, cfg.k_max):
            T, X = problem.project(T - tau * jpp_gradient(T, p, q))
            if rec:
                rec(k, T, X)
    else:
        tau = cfg.gamma if cfg.gamma is not None else default_gamma(S, plan, B)
        z = np.zeros_like(T)
        for k in range(1, cfg.k_max):
            t = 2.0 * T - z
            z = z + _linf_prox(t, tau, cfg.linf_scope) - T
            T, X = problem.project(z)
            if rec:
                rec(k, T, X)

    evm = problem.proj.evm(X, S)
    if not evm <= cfg.feas_tol:
        raise ArithmeticError(f"JPP iterate violates the precoding constraints (EVM {evm:.3g})")
    trace = rec.trace(cfg.k_max) if rec else None
    return JppResult(T=T, X=X, trace=trace, tau=tau, extra=extra)


def evaluate_jpp(result, S, chan, plan, T_ls, projector=None):
    """Per-iteration metrics of a recorded JPP run.

    PINC is taken relative to ``T_ls``; the final iterate's EVM and OOB
    energy are recomputed from ``result.X`` and must agree with the trace.
    """
    tr = result.trace
    if tr is None or len(tr) == 0:
        raise ConfigError("JPP result carries no trace")
    ref = grid_energy(T_ls)
    proj = projector or ToneProjector(chan, plan)
    final_evm = proj.evm(result.X, np.asarray(S))
    final_oob = oob_energy(result.X, plan)
    out = []
    for k in range(len(tr)):
        evm = tr.evm[k]
        oob = tr.oob[k]
        if k == len(tr) - 1:
            evm, oob = max(evm, final_evm), max(oob, final_oob)
        out.append(JppMetrics(
            iteration=k + 1,
            par=tr.par[k],
            pinc=float(tr.energy[k] / ref),
            objective=float(tr.objective[k]),
            evm=float(evm),
            oob_energy=float(oob),
            parseval=float(tr.parseval[k]),
        ))
    return out

"""Figures of merit: PAR, PINC, the lp-lq surrogate PAR and its objective.

All functions are pure. Vectors are 1-D complex arrays; dB values use
``10*log10`` since every quantity here is a power ratio.
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError


def _vec(x):
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("expected a non-empty 1-D vector")
    return x


def _check_pq(p, q):
    if not (q >= 1 and q < p):
        raise DomainError(f"need 1 <= q < p, got p={p}, q={q}")


def db(value):
    """Power ratio in decibels."""
    return 10.0 * np.log10(value)


def lp_norm(x, p):
    a = np.abs(x)
    if math.isinf(p):
        return float(a.max(initial=0.0))
    return float(np.sum(a**p) ** (1.0 / p))


def par(x):
    """Peak-to-average power ratio ``N max|x|^2 / ||x||^2`` (linear)."""
    x = _vec(x)
    a2 = x.real**2 + x.imag**2
    energy = a2.sum()
    if energy == 0:
        raise DomainError("PAR is undefined for the zero vector")
    return float(x.size * a2.max() / energy)


def is_min_par(x, tol=0.0):
    """True when all magnitudes agree up to ``tol`` relative to the largest."""
    x = _vec(x)
    if tol < 0:
        raise DomainError("tol must be non-negative")
    a = np.abs(x)
    top = a.max()
    if top == 0:
        raise DomainError("min-PAR test is undefined for the zero vector")
    return bool(top - a.min() <= tol * top)


def pinc(x, x_ls):
    """Power increase of ``x`` relative to the least-squares solution."""
    ref = float(np.vdot(x_ls, x_ls).real)
    if ref == 0:
        raise DomainError("PINC reference (LS solution) is zero")
    return float(np.vdot(x, x).real) / ref


def par_pq(x, p, q):
    """lp-lq surrogate PAR ``N^(2/q-2/p) ||x||_p^2 / ||x||_q^2``.

    ``p`` may be ``inf``; with ``q == 2`` this is the ordinary PAR.
    """
    x = _vec(x)
    _check_pq(p, q)
    nq = lp_norm(x, q)
    if nq == 0:
        raise DomainError("PAR_pq is undefined for the zero vector")
    expo = 2.0 / q - (0.0 if math.isinf(p) else 2.0 / p)
    return float(x.size**expo * lp_norm(x, p) ** 2 / nq**2)


def objective_f(x, p, q):
    """``N^(2/q-2/p) ||x||_p^2 - ||x||_q^2``; zero exactly on min-PAR vectors."""
    x = _vec(x)
    _check_pq(p, q)
    if math.isinf(p):
        raise DomainError("the lp-lq objective needs a finite p")
    n = x.size
    return float(n ** (2.0 / q - 2.0 / p) * lp_norm(x, p) ** 2 - lp_norm(x, q) ** 2)


def tradeoff_constant(sys, x_inf, x_ls):
    """Lower bound ``c = N ||x_inf||_inf^2 / ||x_ls||_2^2`` on PAR * PINC.

    ``x_inf`` should be a converged minimum-peak solution of ``sys``; any
    feasible ``x`` then satisfies ``par(x) * pinc(x, x_ls) >= c``.
    """
    if not np.any(sys.y):
        raise DomainError("trade-off constant needs y != 0")
    x_inf = _vec(x_inf)
    ref = float(np.vdot(x_ls, x_ls).real)
    if ref == 0:
        raise DomainError("LS solution is zero")
    return float(x_inf.size * np.max(np.abs(x_inf)) ** 2 / ref)


@dataclass(frozen=True)
class ParReport:
    par: float
    pinc: float
    par_pq: float
    objective: float

    @property
    def par_db(self):
        return float(db(self.par))

    @property
    def pinc_db(self):
        return float(db(self.pinc))


def par_report(x, x_ls, p=4.0, q=2.0):
    return ParReport(
        par=par(x),
        pinc=pinc(x, x_ls),
        par_pq=par_pq(x, p, q),
        objective=objective_f(x, p, q),
    )


class EmpiricalDistribution:
    """Samples of a scalar random variable with CCDF and percentile queries.

    Percentiles use the nearest-rank rule: the ``ceil(pct/100 * n)``-th
    smallest sample.
    """

    def __init__(self, samples):
        s = np.sort(np.asarray(samples, dtype=float).ravel())
        if s.size == 0:
            raise DomainError("empirical distribution needs at least one sample")
        self._sorted = s

    def __len__(self):
        return self._sorted.size

    @property
    def samples(self):
        return self._sorted

    def percentile(self, pct):
        return percentile(self._sorted, pct, presorted=True)

    def ccdf(self, z):
        """Fraction of samples strictly greater than ``z``."""
        s = self._sorted
        return float((s.size - np.searchsorted(s, z, side="right")) / s.size)


def percentile(samples, pct, presorted=False):
    """Nearest-rank percentile of ``samples`` for ``0 < pct < 100``."""
    if not 0 < pct < 100:
        raise DomainError(f"percentile must lie in (0, 100), got {pct}")
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise DomainError("percentile of an empty sample set")
    if not presorted:
        s = np.sort(s)
    # ceil on a rounded product so that e.g. 0.99 * 100 does not land on 100
    rank = math.ceil(round(pct / 100.0 * s.size, 9))
    return float(s[max(rank, 1) - 1])

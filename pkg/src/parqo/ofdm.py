"""MU-MIMO-OFDM downlink model: tone plans, channels, transforms, LS precoding.

Shapes follow one convention throughout:

* frequency grid ``X``: ``(B, W)``, column ``w`` is the per-antenna vector of tone ``w``;
* time grid ``T``: ``(W, B)``, column ``b`` is the sample stream of antenna ``b``;
* symbol grid ``S``: ``(U, W)``, zero columns on unused tones;
* channel ``freq``: ``(W, U, B)``, ``freq[w]`` is the ``U x B`` matrix of tone ``w``.

Tones are numbered ``1..W`` and tone 1 is the DC bin (no fft-shift); tone
``w`` lives in array column ``w - 1``. ``TonePlan.used`` holds tone numbers,
``TonePlan.used_index`` the matching 0-based column indices.
"""
from dataclasses import dataclass
import warnings

import numpy as np

from .errors import ConfigError, DomainError, SingularSystemError
from .streams import make_rng

MAX_TONE_COND = 1e12
QAM16_LEVELS = np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(10.0)


@dataclass(frozen=True)
class TonePlan:
    """Used tone set of a ``W``-tone OFDM symbol (tone numbers ``1..W``)."""

    W: int
    used: np.ndarray

    def __post_init__(self):
        used = np.unique(np.asarray(self.used, dtype=np.intp))
        if self.W < 1:
            raise ConfigError("W must be positive")
        if used.size == 0:
            raise ConfigError("tone plan has no used tones")
        if used[0] < 1 or used[-1] > self.W:
            raise ConfigError(f"used tones must lie in 1..{self.W}")
        used.setflags(write=False)
        index = used - 1
        index.setflags(write=False)
        object.__setattr__(self, "used", used)
        object.__setattr__(self, "used_index", index)

    @property
    def mask(self):
        """Boolean array over columns, True on used tones."""
        m = np.zeros(self.W, dtype=bool)
        m[self.used_index] = True
        return m

    @property
    def unused_index(self):
        return np.flatnonzero(~self.mask)

    @property
    def unused(self):
        return self.unused_index + 1

    def __eq__(self, other):
        return (isinstance(other, TonePlan) and self.W == other.W
                and np.array_equal(self.used, other.used))

    __hash__ = None


def lte_used_tones(W, n_used):
    """``n_used`` tone numbers split symmetrically around an empty DC tone (tone 1)."""
    if n_used % 2 or n_used >= W:
        raise ConfigError(f"cannot place {n_used} tones symmetrically in W={W}")
    half = n_used // 2
    return np.r_[2:half + 2, W - half + 1:W + 1]


def make_tone_plan(W, profile="lte20", used=None):
    """Build a tone plan.

    ``profile="lte20"`` uses 1200 data tones (600 each side of DC, DC null)
    scaled to ``W`` as ``round(1200 * W / 2048)`` rounded down to even;
    ``profile="custom"`` takes tone numbers (``1..W``) from ``used``.
    """
    if W < 2:
        raise ConfigError("W must be at least 2")
    if profile == "lte20":
        n_used = int(round(1200 * W / 2048)) // 2 * 2
        if n_used < 2:
            raise ConfigError(f"W={W} too small for the lte20 profile")
        return TonePlan(W, lte_used_tones(W, n_used))
    if profile == "custom":
        if used is None:
            raise ConfigError("custom tone plan needs the used tone set")
        return TonePlan(W, np.asarray(list(used), dtype=np.intp))
    raise ConfigError(f"unknown tone plan profile {profile!r}")


@dataclass(frozen=True)
class ChannelRealization:
    """Time-domain taps ``(L, U, B)`` and per-tone responses ``(W, U, B)``."""

    taps: np.ndarray
    freq: np.ndarray

    @property
    def shape(self):
        W, U, B = self.freq.shape
        return B, U, W, self.taps.shape[0]


def freq_response(taps, W):
    """``H_w = sum_t H_t exp(-2j pi w t / W)`` evaluated for all tones."""
    return np.fft.fft(taps, n=W, axis=0)


def channel_from_taps(taps, W, check=True):
    taps = np.asarray(taps, dtype=np.complex128)
    L, U, B = taps.shape
    if L > W:
        raise ConfigError("more taps than tones")
    freq = freq_response(taps, W)
    if check:
        # direct evaluation of the tap sum as an independent check of the FFT path
        phase = np.exp(-2j * np.pi * np.outer(np.arange(W), np.arange(L)) / W)
        direct = np.einsum("wl,lub->wub", phase, taps)
        scale = max(np.max(np.abs(direct)), 1.0)
        if np.max(np.abs(direct - freq)) > 1e-12 * scale * L:
            raise SingularSystemError("frequency response disagrees with taps")
    taps.setflags(write=False)
    freq.setflags(write=False)
    return ChannelRealization(taps, freq)


def gen_channel(B, U, W, L, seed, unit_tap_variance=False):
    """Draw an i.i.d. Rayleigh channel with ``L`` equal-power taps.

    Taps are CN(0, 1/L) so per-tone entries have unit variance; with
    ``unit_tap_variance=True`` each tap is CN(0, 1) instead. ``seed`` is an
    integer or a ``numpy.random.Generator``.
    """
    if U >= B:
        raise ConfigError(f"need fewer users than antennas (U={U}, B={B})")
    if not 1 <= L <= W:
        raise ConfigError("need 1 <= L <= W")
    rng = make_rng(seed)
    var = 1.0 if unit_tap_variance else 1.0 / L
    g = rng.standard_normal((L, U, B, 2))
    taps = (g[..., 0] + 1j * g[..., 1]) * np.sqrt(var / 2.0)
    chan = channel_from_taps(taps, W)
    # rank check on a few tones; full check happens in ToneProjector
    probe = chan.freq[:: max(W // 8, 1)]
    if np.any(np.linalg.matrix_rank(probe) < U):
        warnings.warn("channel realization has a rank-deficient tone", RuntimeWarning,
                      stacklevel=2)
    return chan


def qam16(n, rng):
    i = rng.integers(0, 4, size=(n, 2))
    return QAM16_LEVELS[i[:, 0]] + 1j * QAM16_LEVELS[i[:, 1]]


def gen_symbols(U, plan, seed, constellation="16qam"):
    """Random symbol grid ``(U, W)`` with exact zeros on unused tones."""
    if constellation != "16qam":
        raise ConfigError(f"unsupported constellation {constellation!r}")
    rng = make_rng(seed)
    S = np.zeros((U, plan.W), dtype=np.complex128)
    S[:, plan.used_index] = qam16(U * plan.used.size, rng).reshape(plan.used.size, U).T
    return S


def freq_to_time(X):
    """``T = F^H X^T`` with the unitary DFT; ``X`` is ``(B, W)``."""
    return np.fft.ifft(np.asarray(X).T, axis=0, norm="ortho")


def time_to_freq(T):
    """``X = (F T)^T``, the exact inverse of :func:`freq_to_time`."""
    return np.fft.fft(np.asarray(T), axis=0, norm="ortho").T


class ToneProjector:
    """Per-tone affine projections for one channel realization.

    Factorizes each used-tone Gram matrix ``H_w H_w^H`` once; ``project``
    maps every used-tone column onto ``{x : H_w x = s_w}`` and sets unused
    tones to exact zeros.
    """

    def __init__(self, chan, plan):
        W, U, B = chan.freq.shape
        if plan.W != W:
            raise ConfigError(f"tone plan has W={plan.W}, channel has W={W}")
        H = np.ascontiguousarray(chan.freq[plan.used_index])
        gram = H @ H.conj().transpose(0, 2, 1)
        cond = np.linalg.cond(gram)
        bad = np.flatnonzero(~(cond <= MAX_TONE_COND))
        if bad.size:
            w = int(plan.used[bad[0]])  # tone number
            raise SingularSystemError(
                f"Gram matrix of tone {w} is singular (cond={cond[bad[0]]:.3g})", tone=w)
        self.plan = plan
        self.H = H
        self.H_adj = np.ascontiguousarray(H.conj().transpose(0, 2, 1))
        # Cholesky once per realization; the inverse Gram is formed from it so
        # each projection is two batched mat-vecs
        chol_inv = np.linalg.inv(np.linalg.cholesky(gram))
        self.gram_inv = chol_inv.conj().transpose(0, 2, 1) @ chol_inv
        self.B, self.U, self.W = B, U, W

    def _apply(self, M, v):
        return (M @ v[..., None])[..., 0]

    def project(self, X, S):
        """Project frequency grid ``X`` ``(B, W)`` onto the constraint set."""
        used = self.plan.used_index
        xu = np.asarray(X)[:, used].T  # (n_used, B)
        r = self._apply(self.H, xu) - S[:, used].T
        corr = self._apply(self.H_adj, self._apply(self.gram_inv, r))
        out = np.zeros((self.B, self.W), dtype=np.complex128)
        out[:, used] = (xu - corr).T
        return out

    def evm(self, X, S):
        """Largest relative residual ``||H_w x_w - s_w|| / ||s_w||`` over used tones."""
        used = self.plan.used_index
        su = S[:, used].T
        r = self._apply(self.H, np.asarray(X)[:, used].T) - su
        ns = np.linalg.norm(su, axis=1)
        nr = np.linalg.norm(r, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(ns > 0, nr / ns, nr)
        return float(rel.max())


def ls_precode(S, chan, plan, projector=None):
    """LS (zero-forcing) precoding ``x_w = H_w^H (H_w H_w^H)^{-1} s_w``."""
    proj = projector or ToneProjector(chan, plan)
    return proj.project(np.zeros((proj.B, proj.W), dtype=np.complex128), S)


def normalize_power(X):
    """Scale ``X`` to unit Frobenius norm; returns ``(X_hat, P)`` with ``P = ||X||_F^2``."""
    X = np.asarray(X)
    power = float(np.vdot(X, X).real)
    if power == 0:
        raise DomainError("cannot normalize an all-zero grid")
    return X / np.sqrt(power), power


def oob_energy(X, plan):
    """Energy on unused tones of a frequency grid."""
    xo = np.asarray(X)[:, plan.unused_index]
    return float(np.vdot(xo, xo).real)

"""Seeded random streams for order-independent Monte-Carlo trials.

Every draw comes from a Philox (counter-based) generator keyed by a
64-bit seed. Trial streams are derived from ``(seed, trial, purpose)``
through ``numpy.random.SeedSequence``, so a trial's channel, symbols and
system matrices do not depend on which worker runs it or in what order.
"""
import zlib

import numpy as np

PURPOSES = ("system", "channel", "symbols")


def _tag(purpose):
    return zlib.crc32(purpose.encode("ascii"))


def derive_seed(seed, trial, purpose):
    """64-bit seed for stream ``purpose`` of trial ``trial``."""
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(trial), _tag(purpose)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed):
    """Philox generator for an integer seed; generators pass through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def trial_rng(seed, trial, purpose):
    return make_rng(derive_seed(seed, trial, purpose))


def complex_normal(rng, shape):
    """Circularly-symmetric CN(0, 1) samples."""
    g = rng.standard_normal(tuple(shape) + (2,))
    return (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0)

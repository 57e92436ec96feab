"""Binary container for channel realizations and symbol grids.

Layout: one line of UTF-8 JSON (the header) terminated by ``\\n``, followed
by the array data as row-major (C-order) complex pairs ``(re, im)`` of
little-endian IEEE-754 doubles. The header holds ``format``, ``version``,
``kind``, ``shape`` and ``dtype`` (always ``"<c16"``) plus kind-specific
fields: ``W`` for channels (the stored array is the tap tensor
``(L, U, B)``) and ``used`` (tone numbers ``1..W``) for symbol grids.
Data length must equal ``16 * prod(shape)`` bytes.
"""
import json
import math

import numpy as np

from .errors import ConfigError
from .ofdm import TonePlan, channel_from_taps

FORMAT = "parqo-array"
VERSION = 1
DTYPE = "<c16"


def write_array(path, arr, kind, **fields):
    arr = np.ascontiguousarray(arr, dtype=DTYPE)
    header = {"format": FORMAT, "version": VERSION, "kind": kind,
              "shape": list(arr.shape), "dtype": DTYPE, **fields}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(arr.tobytes(order="C"))


def read_array(path, kind=None):
    """Read a container; returns ``(array, header)``."""
    with open(path, "rb") as fh:
        line = fh.readline()
        data = fh.read()
    try:
        header = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: bad container header ({exc})") from None
    if header.get("format") != FORMAT or header.get("dtype") != DTYPE:
        raise ConfigError(f"{path}: not a {FORMAT} container")
    if header.get("version") != VERSION:
        raise ConfigError(f"{path}: unsupported container version {header.get('version')}")
    if kind is not None and header.get("kind") != kind:
        raise ConfigError(f"{path}: expected a {kind!r} container, found {header.get('kind')!r}")
    shape = tuple(int(s) for s in header["shape"])
    if len(data) != 16 * math.prod(shape):
        raise ConfigError(f"{path}: data length {len(data)} does not match shape {shape}")
    return np.frombuffer(data, dtype=DTYPE).reshape(shape).astype(np.complex128), header


def save_channel(path, chan):
    """Store the taps ``(L, U, B)``; the tone count ``W`` goes in the header."""
    write_array(path, chan.taps, "channel", W=int(chan.freq.shape[0]))


def load_channel(path):
    taps, header = read_array(path, "channel")
    return channel_from_taps(taps, int(header["W"]))


def save_symbols(path, S, plan):
    write_array(path, S, "symbols", used=[int(w) for w in plan.used])


def load_symbols(path):
    """Returns ``(S, plan)``."""
    S, header = read_array(path, "symbols")
    plan = TonePlan(S.shape[1], np.asarray(header["used"], dtype=np.intp))
    return S, plan

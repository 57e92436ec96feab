"""Hot-loop kernels, compiled when available.

The Cython extension ``parqo._ckernels`` is used if it imports; otherwise
the NumPy implementation in ``parqo._pykernels`` is used. Set
``PARQO_PURE_PYTHON=1`` to force the NumPy path.

Both backends expose the same functions:

``objective``, ``objective_cols``, ``grad_lplq``, ``grad_lplq_cols``,
``l1_threshold``, ``project_l1_ball``, ``project_l1_ball_cols``,
``affine_project``, ``fbs_run``, ``drs_run``.
"""
import os

from . import _pykernels

_NAMES = (
    "objective",
    "objective_cols",
    "grad_lplq",
    "grad_lplq_cols",
    "l1_threshold",
    "project_l1_ball",
    "project_l1_ball_cols",
    "affine_project",
    "fbs_run",
    "drs_run",
)


def _load():
    if os.environ.get("PARQO_PURE_PYTHON", "") not in ("", "0"):
        return _pykernels
    try:
        from . import _ckernels
    except ImportError:
        return _pykernels
    return _ckernels


def use(backend):
    """Switch the active backend (``"cython"`` or ``"numpy"``); returns the module."""
    global _impl, BACKEND
    if backend == "numpy":
        mod = _pykernels
    elif backend == "cython":
        from . import _ckernels as mod
    else:
        raise ValueError(f"unknown kernel backend {backend!r}")
    _impl = mod
    BACKEND = mod.BACKEND
    g = globals()
    for name in _NAMES:
        g[name] = getattr(mod, name)
    return mod


def available():
    """Names of the backends importable in this environment."""
    names = ["numpy"]
    try:
        from . import _ckernels  # noqa: F401
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


_impl = _load()
BACKEND = _impl.BACKEND
use(BACKEND)

"""Import-time selection between the compiled and NumPy ADMM loops.

The compiled extension is preferred when it imported cleanly; the
environment variable SPARSEHESS_BACKEND ("compiled" or "numpy") or the
``backend=`` argument threaded through the public API overrides it.
"""

import os

from . import _admm_numpy

try:
    from . import _admm_cy
except ImportError:  # extension not built on this install
    _admm_cy = None

_BACKENDS = {"numpy": _admm_numpy}
if _admm_cy is not None:
    _BACKENDS["compiled"] = _admm_cy


def available():
    """Names of the usable backends, sorted."""
    return tuple(sorted(_BACKENDS))


def default_name():
    env = os.environ.get("SPARSEHESS_BACKEND")
    if env:
        if env not in _BACKENDS:
            raise ValueError(
                f"SPARSEHESS_BACKEND={env!r} not available; "
                f"choose from {available()}"
            )
        return env
    return "compiled" if "compiled" in _BACKENDS else "numpy"


def get_backend(name=None):
    """Resolve a backend module by name (None means the default)."""
    if name is None:
        name = default_name()
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown backend {name!r}; choose from {available()}"
        ) from None

"""Kernel backend selection.

The compiled FFTW core is used when it imports; otherwise, or when the
environment variable ``SWAVE_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy/scipy implementation is used.
"""
import os

from . import _pykernels
from ._pykernels import CONVERGED, MAX_ITER, NONFINITE, STALLED, fixed_point

try:
    from . import _fftw_core
except ImportError:  # extension not built
    _fftw_core = None

_BACKENDS = {"python": _pykernels.SineTransform}
if _fftw_core is not None:
    _BACKENDS["fftw"] = _fftw_core.SineTransform

if os.environ.get("SWAVE_PURE_PYTHON", "") not in ("", "0") or _fftw_core is None:
    BACKEND = "python"
else:
    BACKEND = "fftw"

SineTransform = _BACKENDS[BACKEND]


def available_backends():
    return sorted(_BACKENDS)


def transform_class(name=None):
    return _BACKENDS[name or BACKEND]


__all__ = [
    "BACKEND",
    "SineTransform",
    "available_backends",
    "transform_class",
    "fixed_point",
    "CONVERGED",
    "STALLED",
    "MAX_ITER",
    "NONFINITE",
]

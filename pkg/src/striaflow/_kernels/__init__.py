"""Kernel backend selection: compiled Cython core when available, numpy otherwise.

Set STRIAFLOW_KERNELS=python to force the numpy fallback (used by tests and
the benchmark to compare backends).
"""

from __future__ import annotations

import os

from . import fallback

_forced = os.environ.get("STRIAFLOW_KERNELS", "").strip().lower()

HAVE_COMPILED = False
if _forced != "python":
    try:
        from . import _core  # type: ignore[attr-defined]

        HAVE_COMPILED = True
    except ImportError:
        HAVE_COMPILED = False

if HAVE_COMPILED:
    _impl = _core
else:
    _impl = fallback


import numpy as _np


def backend_name() -> str:
    return "compiled" if HAVE_COMPILED else "numpy"


def _c128(a):
    return _np.ascontiguousarray(a, dtype=_np.complex128)


def _f64(a):
    return _np.ascontiguousarray(a, dtype=_np.float64)


def trig_eval(coeffs, fx, fy, scale, xs, ys):
    # The dense trig sum is a matrix product in disguise; BLAS through the
    # numpy implementation beats the scalar loop at every query count, so
    # this one kernel always routes to the fallback. The compiled version
    # stays available for the benchmark comparison.
    return fallback.trig_eval(
        _c128(coeffs), _f64(fx), _f64(fy), float(scale), _f64(xs), _f64(ys)
    )


def holder_pair_max(values, interior, offsets, spacing, eps):
    return float(
        _impl.holder_pair_max(
            _f64(values),
            _np.ascontiguousarray(interior, dtype=_np.uint8),
            _np.ascontiguousarray(offsets, dtype=_np.int64),
            float(spacing),
            float(eps),
        )
    )


def polyline_interior_distance(px, py, qx, qy):
    return _impl.polyline_interior_distance(_f64(px), _f64(py), _f64(qx), _f64(qy))

"""Propagation kernels with import-time backend selection.

``forward(phases, is_eom, offset, n)`` pushes the ``n`` channel columns of the
identity through a cascade of diagonal phase factors and returns the
``n x n`` channel-window block ``W`` plus a tape for ``backward``.
``phases`` has one row of ``M`` diagonal phases per element; rows flagged in
``is_eom`` act on time samples (``F_M diag F_M^H``), the others on frequency
bins.

``backward(phases, is_eom, offset, tape, g)`` returns ``dL/dphases`` for a
real loss ``L(W)`` given ``g = dL/dRe(W) + 1j * dL/dIm(W)``.

The compiled backend is used when importable and ``M`` is a power of two;
set ``AFPKIT_PURE_PYTHON=1`` to force the numpy path.
"""

import os

import numpy as np

from . import _fallback

try:
    if os.environ.get("AFPKIT_PURE_PYTHON"):
        raise ImportError("pure-python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def _use_compiled(m):
    return _compiled is not None and m & (m - 1) == 0


def forward(phases, is_eom, offset, n):
    phases = np.ascontiguousarray(phases, dtype=np.float64)
    is_eom = np.ascontiguousarray(is_eom, dtype=np.uint8)
    if _use_compiled(phases.shape[1]):
        return _compiled.forward(phases, is_eom, int(offset), int(n))
    return _fallback.forward(phases, is_eom, int(offset), int(n))


def backward(phases, is_eom, offset, tape, g):
    phases = np.ascontiguousarray(phases, dtype=np.float64)
    is_eom = np.ascontiguousarray(is_eom, dtype=np.uint8)
    g = np.asarray(g, dtype=np.complex128)
    if _use_compiled(phases.shape[1]):
        return _compiled.backward(phases, is_eom, int(offset), tape, g)
    return _fallback.backward(phases, is_eom, int(offset), tape, g)

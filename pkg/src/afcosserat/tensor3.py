"""Small-tensor algebra on 3x3 matrices.

All functions accept a single ``(3, 3)`` array or a stack ``(..., 3, 3)`` and
operate on the trailing two axes. Vectors are ``(..., 3)``.

The axial-vector convention follows the ordering of the upper triangle::

    A = [[ 0,  a,  b],
         [-a,  0,  g],
         [-b, -g,  0]]   ->   axl(A) = (a, b, g)
"""

from __future__ import annotations

import numpy as np

IDENTITY = np.eye(3)
SKEW_RTOL = 1e-12

# upper-triangle positions used by axl
_AXL_ROWS = np.array([0, 0, 1])
_AXL_COLS = np.array([1, 2, 2])


class NotSkew(ValueError):
    """Raised when a matrix passed to :func:`axl` is not skew-symmetric."""


def _finite(M, name="argument"):
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def transpose(M):
    return np.swapaxes(M, -1, -2)


def sym(M):
    M = _finite(M)
    return 0.5 * (M + transpose(M))


def skew(M):
    M = _finite(M)
    return 0.5 * (M - transpose(M))


def sym_skew_split(M):
    """Return ``(sym M, skew M)``; the parts add back to ``M`` up to rounding."""
    M = _finite(M)
    S = 0.5 * (M + transpose(M))
    return S, M - S


def tr(M):
    M = _finite(M)
    return np.trace(M, axis1=-2, axis2=-1)


def dev(M):
    M = _finite(M)
    return M - (np.trace(M, axis1=-2, axis2=-1) / 3.0)[..., None, None] * IDENTITY


def inner(M, N):
    """Frobenius inner product ``M : N``."""
    return np.einsum("...ij,...ij->...", np.asarray(M, float), np.asarray(N, float))


def norm(M):
    """Frobenius norm."""
    return np.sqrt(inner(M, M))


def axl(A, rtol=SKEW_RTOL):
    """Axial vector of a skew-symmetric matrix.

    Raises
    ------
    NotSkew
        If ``|A + A^T|`` exceeds ``rtol * |A|`` for any matrix in the stack.
    """
    A = _finite(A)
    resid = norm(A + transpose(A))
    scale = norm(A)
    if np.any(resid > rtol * scale):
        raise NotSkew(f"symmetry residual {np.max(resid):.3e} exceeds tolerance")
    return A[..., _AXL_ROWS, _AXL_COLS]


def axl_inv(v):
    v = _finite(v)
    A = np.zeros(v.shape[:-1] + (3, 3))
    A[..., _AXL_ROWS, _AXL_COLS] = v
    A[..., _AXL_COLS, _AXL_ROWS] = -v
    return A

"""Dense SVD, Hermitian eigendecomposition and the Moore-Penrose pseudoinverse.

Both factorizations are Jacobi methods: one-sided (Hestenes) rotations for the
SVD and cyclic complex rotations for Hermitian matrices. The kernels live in a
Cython extension; when it has not been built, a pure-Python module with the
same control flow is used instead. ``BACKEND`` names the active one.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericalFailure, ValidationError

try:
    from . import _jacobi as _kernels

    BACKEND = "cython"
except ImportError:  # extension not compiled
    from . import _jacobi_py as _kernels

    BACKEND = "python"

from . import _jacobi_py

EPS = float(np.finfo(float).eps)
MAX_SWEEPS = 80


def _pow2_scale(a: np.ndarray) -> float:
    """Power of two bringing the largest entry into [0.5, 1); exact in binary."""
    top = float(np.max(np.abs(a))) if a.size else 0.0
    if top == 0.0:
        return 1.0
    # clamped so subnormal inputs still get a finite scale
    return math.ldexp(1.0, min(-math.frexp(top)[1], 1022))


def kernel_modules():
    """Return ``{name: module}`` for every importable kernel implementation."""
    mods = {"python": _jacobi_py}
    if BACKEND == "cython":
        mods["cython"] = _kernels
    return mods


def svd(a, max_sweeps: int = MAX_SWEEPS, kernels=None):
    """Thin SVD ``a = u @ diag(s) @ vt`` with ``s`` in descending order.

    Raises :class:`NumericalFailure` if the rotations do not settle within
    ``max_sweeps`` full sweeps.
    """
    k = _kernels if kernels is None else kernels
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValidationError(f"svd expects a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("svd input contains non-finite entries")
    m, n = a.shape
    flip = m < n
    # prescaling keeps squared norms clear of overflow and underflow
    scale = _pow2_scale(a)
    # rows of ``w`` are the columns being orthogonalised
    w = np.ascontiguousarray((a if flip else a.T) * scale, dtype=float)
    rows, length = w.shape
    tol = max(length, 1) * EPS
    v, sweeps = k.svd_rows(w, tol, max_sweeps)
    if sweeps < 0:
        raise NumericalFailure(f"Jacobi SVD did not converge in {max_sweeps} sweeps")
    v = np.asarray(v)
    sig = np.sqrt(np.einsum("ij,ij->i", w, w))
    order = np.argsort(-sig, kind="stable")
    sig = sig[order]
    w = w[order]
    v = v[order]
    left = np.zeros_like(w)
    nz = sig > 0
    left[nz] = w[nz] / sig[nz, None]
    sig = sig / scale
    # Zero singular values leave zero rows in ``left``; callers that need a
    # full orthonormal basis must not rely on those directions.
    if flip:
        # v @ a has orthogonal rows, so a = v.T @ diag(sig) @ left
        return v.T, sig, left
    # v @ a.T has orthogonal rows, so a = left.T @ diag(sig) @ v
    return left.T, sig, v


def default_rel_tol(shape) -> float:
    """Singular-value cutoff ``max(m, n) * eps * 64`` relative to the largest."""
    return max(shape) * EPS * 64


def pinv(a, rel_tol: float | None = None, kernels=None):
    """Moore-Penrose pseudoinverse with its singular values and numerical rank.

    Singular values at or below ``rel_tol * s_max`` are treated as zero. Raises
    NumericalFailure if a retained singular value has no finite reciprocal.
    Returns ``(a_plus, s, rank)``.
    """
    a = np.asarray(a, dtype=float)
    if rel_tol is None:
        rel_tol = default_rel_tol(a.shape)
    if not 0.0 < rel_tol < 1.0:
        raise ValidationError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    u, s, vt = svd(a, kernels=kernels)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(a.shape[::-1]), s, 0
    keep = s > rel_tol * s[0]
    rank = int(np.count_nonzero(keep))
    if s[rank - 1] < 1.0 / np.finfo(float).max:
        raise NumericalFailure(f"pseudoinverse overflows: singular value {s[rank - 1]:.3g} has no finite reciprocal")
    a_plus = (vt[keep].T / s[keep]) @ u[:, keep].T
    return a_plus, s, rank


def eigh(h, max_sweeps: int = MAX_SWEEPS, kernels=None):
    """Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix."""
    k = _kernels if kernels is None else kernels
    a = np.array(h, dtype=np.complex128, order="C")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"eigh expects a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("eigh input contains non-finite entries")
    scale = _pow2_scale(a)
    a = 0.5 * (a + a.conj().T) * scale
    n = a.shape[0]
    v, sweeps = k.eigh_inplace(a, max(n, 1) * EPS, max_sweeps)
    if sweeps < 0:
        raise NumericalFailure(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")
    vals = np.real(np.diag(a)) / scale
    order = np.argsort(vals, kind="stable")
    return vals[order], np.asarray(v)[:, order]

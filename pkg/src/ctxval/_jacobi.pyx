# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Jacobi kernels (one-sided SVD and cyclic Hermitian eigensolver).

Both routines mutate their argument in place and return the accumulated
rotation matrix together with the number of sweeps used. A return value of
``-1`` for the sweep count signals that the iteration cap was hit.
"""

import numpy as np
cimport numpy as cnp
from libc.float cimport DBL_MIN
from libc.math cimport sqrt, fabs, hypot

cnp.import_array()

cdef extern from "complex.h":
    double creal(double complex)
    double cimag(double complex)
    double complex conj(double complex)
    double cabs(double complex)


def svd_rows(double[:, ::1] w, double tol, int max_sweeps):
    """Orthogonalise the rows of ``w`` (n x m) with Hestenes rotations."""
    cdef Py_ssize_t n = w.shape[0], m = w.shape[1]
    cdef Py_ssize_t p, q, k
    cdef double alpha, beta, gamma, zeta, t, c, s, wp, wq, floor = 0.0
    cdef int sweep
    cdef bint rotated
    v_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] v = v_arr
    # rows below tol * ||w||_F count as converged; rounding keeps them from reaching zero
    for p in range(n):
        for k in range(m):
            floor += w[p, k] * w[p, k]
    floor *= tol * tol
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for k in range(m):
                    alpha += w[p, k] * w[p, k]
                    beta += w[q, k] * w[q, k]
                    gamma += w[p, k] * w[q, k]
                if fabs(gamma) <= tol * sqrt(alpha * beta) or gamma == 0.0:
                    continue
                if alpha <= floor or beta <= floor:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + hypot(1.0, zeta))
                else:
                    t = -1.0 / (-zeta + hypot(1.0, zeta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = c * t
                for k in range(m):
                    wp = w[p, k]
                    wq = w[q, k]
                    w[p, k] = c * wp - s * wq
                    w[q, k] = s * wp + c * wq
                for k in range(n):
                    wp = v[p, k]
                    wq = v[q, k]
                    v[p, k] = c * wp - s * wq
                    v[q, k] = s * wp + c * wq
        if not rotated:
            return v_arr, sweep + 1
    return v_arr, -1


def eigh_inplace(double complex[:, ::1] a, double tol, int max_sweeps):
    """Diagonalise the Hermitian matrix ``a`` by cyclic complex Jacobi sweeps."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, k
    cdef double r, theta, t, c, s, app, aqq, off, total
    cdef double complex ph, phc, x, y
    cdef int sweep
    v_arr = np.eye(n, dtype=np.complex128)
    cdef double complex[:, ::1] v = v_arr
    for sweep in range(max_sweeps):
        off = 0.0
        total = 0.0
        for p in range(n):
            for q in range(n):
                r = cabs(a[p, q])
                total += r * r
                if p != q:
                    off += r * r
        if off <= tol * tol * total:
            return v_arr, sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                r = cabs(a[p, q])
                if r < DBL_MIN:
                    # subnormal coupling: drop it rather than divide by it
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                ph = a[p, q] / r
                phc = conj(ph)
                app = creal(a[p, p])
                aqq = creal(a[q, q])
                theta = (aqq - app) / (2.0 * r)
                if theta >= 0.0:
                    t = 1.0 / (theta + hypot(1.0, theta))
                else:
                    t = -1.0 / (-theta + hypot(1.0, theta))
                c = 1.0 / sqrt(1.0 + t * t)
                s = c * t
                for k in range(n):
                    x = a[k, p]
                    y = a[k, q]
                    a[k, p] = c * x - s * phc * y
                    a[k, q] = s * x + c * phc * y
                for k in range(n):
                    x = a[p, k]
                    y = a[q, k]
                    a[p, k] = c * x - s * ph * y
                    a[q, k] = s * x + c * ph * y
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = app - t * r
                a[q, q] = aqq + t * r
                for k in range(n):
                    x = v[k, p]
                    y = v[k, q]
                    v[k, p] = c * x - s * phc * y
                    v[k, q] = s * x + c * phc * y
    return v_arr, -1

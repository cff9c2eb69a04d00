"""Pure-Python Jacobi kernels, used when the compiled extension is absent.

The control flow mirrors ``_jacobi.pyx`` line for line; only the inner
vector updates are delegated to numpy row slices.
"""

import math
import sys

import numpy as np

TINY = sys.float_info.min


def svd_rows(w, tol, max_sweeps):
    n = w.shape[0]
    v = np.eye(n)
    # rows below tol * ||w||_F count as converged; rounding keeps them from reaching zero
    floor = tol * tol * float(np.sum(w * w))
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                wp, wq = w[p], w[q]
                alpha = float(wp @ wp)
                beta = float(wq @ wq)
                gamma = float(wp @ wq)
                if abs(gamma) <= tol * math.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                if min(alpha, beta) <= floor:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + math.hypot(1.0, zeta))
                else:
                    t = -1.0 / (-zeta + math.hypot(1.0, zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                w[p], w[q] = c * wp - s * wq, s * wp + c * wq
                vp, vq = v[p].copy(), v[q].copy()
                v[p], v[q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            return v, sweep + 1
    return v, -1


def eigh_inplace(a, tol, max_sweeps):
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    offdiag = ~np.eye(n, dtype=bool)
    for sweep in range(max_sweeps):
        mag = np.abs(a) ** 2
        total = float(mag.sum())
        # summed directly; total - trace would cancel
        off = float(mag[offdiag].sum())
        if off <= tol * tol * total:
            return v, sweep
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = complex(a[p, q])
                r = abs(apq)
                if r < TINY:
                    # subnormal coupling: drop it rather than divide by it
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                ph = complex(apq.real / r, apq.imag / r)
                phc = ph.conjugate()
                app = float(a[p, p].real)
                aqq = float(a[q, q].real)
                theta = (aqq - app) / (2.0 * r)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.hypot(1.0, theta))
                else:
                    t = -1.0 / (-theta + math.hypot(1.0, theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                x, y = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * x - s * phc * y
                a[:, q] = s * x + c * phc * y
                x, y = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * x - s * ph * y
                a[q, :] = s * x + c * ph * y
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = app - t * r
                a[q, q] = aqq + t * r
                x, y = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * x - s * phc * y
                v[:, q] = s * x + c * phc * y
    return v, -1

"""Independent reference implementations used by the tests.

Everything here is built from scalar loops or third-party libraries, never
from the package's own fast paths.
"""
import numpy as np
import pywt
from scipy.fft import dct
from scipy.optimize import brentq


def db8_analysis_matrix(n, levels):
    """Multilevel periodized db8 analysis matrix, column by column through PyWavelets."""
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        coeffs = pywt.wavedec(e, "db8", mode="periodization", level=levels)
        cols.append(np.concatenate(coeffs))
    return np.array(cols).T


def dct_analysis_matrix(n):
    """Orthonormal DCT-II written out from its cosine formula."""
    c = np.empty((n, n))
    for k in range(n):
        scale = np.sqrt(1.0 / n) if k == 0 else np.sqrt(2.0 / n)
        for i in range(n):
            c[k, i] = scale * np.cos(np.pi * (2 * i + 1) * k / (2 * n))
    return c


def kron3(c, ay, ax):
    """``C kron A_y kron A_x`` built entry by entry with scalar loops."""
    nt, ny, nx = c.shape[0], ay.shape[0], ax.shape[0]
    n = nx * ny * nt
    out = np.empty((n, n))
    for t in range(nt):
        for y in range(ny):
            for x in range(nx):
                row = x + nx * (y + ny * t)
                for tt in range(nt):
                    ctt = c[t, tt]
                    for yy in range(ny):
                        cy = ctt * ay[y, yy]
                        base = nx * (yy + ny * tt)
                        for xx in range(nx):
                            out[row, base + xx] = cy * ax[x, xx]
    return out


def dense_sensing(planes):
    """Sensing matrix ``Phi = [diag(vec H_1), ..., diag(vec H_T)]`` by scalar loops."""
    nx, ny, nt = planes.shape
    npix = nx * ny
    phi = np.zeros((npix, npix * nt))
    for k in range(nt):
        for y in range(ny):
            for x in range(nx):
                p = x + nx * y
                phi[p, p + npix * k] = planes[x, y, k]
    return phi


def vec(a):
    return np.asarray(a).reshape(-1, order="F")


def group_prox_bruteforce(v, tau):
    """``argmin_u 0.5||u - v||^2 + tau ||u||`` by a 1-D search along ``v``'s direction.

    The minimizer is a non-negative multiple ``s * v / ||v||``. The scalar
    objective ``0.5 (s - r)^2 + tau s`` on ``[0, r]`` is convex; its minimizer
    is found by bracketing the root of the derivative with Brent's method
    (or is the boundary ``s = 0`` when the derivative is positive there).
    """
    r = float(np.linalg.norm(v))
    if r == 0.0:
        return np.zeros_like(v)
    deriv = lambda s: (s - r) + tau
    if deriv(0.0) >= 0.0:
        return np.zeros_like(v)
    s = brentq(deriv, 0.0, r, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return s * v / r


def dct_ortho(x, axis):
    return dct(x, type=2, norm="ortho", axis=axis)

"""Orthonormal separable wavelet-DCT basis for video cubes.

Each frame is transformed by an L-level periodized Daubechies-8 DWT applied
separably along x and along y, and each pixel's time series by an orthonormal
DCT-II. With ``A_x``, ``A_y`` the one-dimensional multilevel analysis matrices
and ``C`` the DCT matrix, the coefficient cube is

    w = (C kron A_y kron A_x) vec(x)

so the synthesis matrices of the basis are ``T_x = A_x.T`` etc. Coefficients
use Mallat ordering along every spatial axis: ``[a_L, d_L, d_{L-1}, ..., d_1]``,
which places the approximation band in the low-index corner.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.fft import dct

from .tensor import DimensionError, as_cube

# Daubechies wavelet with 8 vanishing moments, orthonormal scaling filter
# (sum of squares 1, sum sqrt(2)).
DB8 = (
    0.05441584224310401,
    0.31287159091429995,
    0.6756307362972898,
    0.5853546836542067,
    -0.015829105256349306,
    -0.2840155429615469,
    0.0004724845739132828,
    0.12874742662047847,
    -0.017369301001807547,
    -0.044088253930794755,
    0.013981027917398282,
    0.008746094047405777,
    -0.004870352993451574,
    -0.00039174037337694705,
    0.0006754494064505693,
    -0.00011747678412476953,
)


@dataclass(frozen=True)
class WaveletSpec:
    """Periodized orthogonal wavelet used along both spatial axes.

    ``levels`` is the number of decomposition levels L; transformed sizes
    must be divisible by ``2**levels``.
    """

    levels: int = 4
    filter: tuple = field(default=DB8, repr=False)
    boundary: str = "periodic"

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 1:
            raise ValueError("levels must be a positive integer")
        if self.boundary != "periodic":
            raise ValueError("only periodic boundaries are supported")
        h = np.asarray(self.filter, dtype=np.float64)
        if h.ndim != 1 or len(h) < 2 or len(h) % 2:
            raise ValueError("filter must have an even number of taps")
        for k in range(0, len(h) // 2):
            dot = float(np.dot(h[: len(h) - 2 * k], h[2 * k :]))
            if abs(dot - (1.0 if k == 0 else 0.0)) > 1e-12:
                raise ValueError("filter is not orthonormal under even shifts")

    @property
    def lowpass(self):
        return np.asarray(self.filter, dtype=np.float64)

    @property
    def highpass(self):
        h = self.lowpass
        n = len(h)
        return np.array([(-1.0) ** i * h[n - 1 - i] for i in range(n)])

    def check_size(self, n):
        if n % (2**self.levels):
            raise DimensionError(
                f"size {n} is not divisible by 2**{self.levels}; "
                "pad or crop the input, non-dyadic sizes are rejected"
            )


@dataclass(frozen=True)
class DctSpec:
    """Orthonormal type-II DCT of a given length along the time axis."""

    length: int

    def __post_init__(self):
        if int(self.length) != self.length or self.length < 1:
            raise ValueError("DCT length must be a positive integer")


def dwt_step(x, spec, axis=0):
    """One periodized analysis step along ``axis``: returns (approx, detail).

    Output ``k`` is ``sum_i h[i] * x[(2k + i - (len(h)/2 - 1)) mod N]``.
    """
    x = np.moveaxis(np.asarray(x, dtype=np.float64), axis, 0)
    n = x.shape[0]
    if n % 2:
        raise DimensionError("periodized DWT needs an even length")
    h, g = spec.lowpass, spec.highpass
    offset = 1 - len(h) // 2
    base = 2 * np.arange(n // 2)
    approx = np.zeros((n // 2,) + x.shape[1:])
    detail = np.zeros_like(approx)
    for i in range(len(h)):
        xi = x[(base + i + offset) % n]
        approx += h[i] * xi
        detail += g[i] * xi
    return np.moveaxis(approx, 0, axis), np.moveaxis(detail, 0, axis)


def idwt_step(approx, detail, spec, axis=0):
    """Inverse (adjoint) of :func:`dwt_step`."""
    a = np.moveaxis(np.asarray(approx, dtype=np.float64), axis, 0)
    d = np.moveaxis(np.asarray(detail, dtype=np.float64), axis, 0)
    half = a.shape[0]
    n = 2 * half
    h, g = spec.lowpass, spec.highpass
    offset = 1 - len(h) // 2
    base = 2 * np.arange(half)
    out = np.zeros((n,) + a.shape[1:])
    for i in range(len(h)):
        np.add.at(out, (base + i + offset) % n, h[i] * a + g[i] * d)
    return np.moveaxis(out, 0, axis)


def dwt(x, spec, axis=0):
    """Multilevel 1-D periodized DWT along ``axis`` in Mallat ordering."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[axis]
    spec.check_size(n)
    out = np.moveaxis(x, axis, 0).copy()
    length = n
    for _ in range(spec.levels):
        a, d = dwt_step(out[:length], spec)
        out[: length // 2] = a
        out[length // 2 : length] = d
        length //= 2
    return np.moveaxis(out, 0, axis)


def idwt(w, spec, axis=0):
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[axis]
    spec.check_size(n)
    out = np.moveaxis(w, axis, 0).copy()
    length = n >> spec.levels
    for _ in range(spec.levels):
        out[: 2 * length] = idwt_step(out[:length], out[length : 2 * length], spec)
        length *= 2
    return np.moveaxis(out, 0, axis)


@lru_cache(maxsize=32)
def wavelet_matrix(n, spec):
    """Dense ``n x n`` multilevel analysis matrix ``A`` (``dwt(x) == A @ x``)."""
    m = dwt(np.eye(n), spec, axis=0)
    m.setflags(write=False)
    return m


@lru_cache(maxsize=32)
def dct_matrix(n):
    """Dense orthonormal DCT-II analysis matrix ``C`` (``C @ v == dct(v)``)."""
    m = dct(np.eye(n), type=2, norm="ortho", axis=0)
    m.setflags(write=False)
    return m


def _apply(mat, a, axis):
    return np.moveaxis(np.tensordot(mat, a, axes=(1, axis)), 0, axis)


def _check(shape, wspec, dspec):
    nx, ny, nt = shape
    wspec.check_size(nx)
    wspec.check_size(ny)
    if dspec.length != nt:
        raise DimensionError(f"DCT length {dspec.length} does not match n_t={nt}")


def analyze(x, wspec=None, dspec=None):
    """Wavelet-DCT coefficients of a video cube."""
    x = as_cube(x, "video")
    wspec = wspec or WaveletSpec()
    dspec = dspec or DctSpec(x.shape[2])
    _check(x.shape, wspec, dspec)
    w = _apply(wavelet_matrix(x.shape[0], wspec), x, 0)
    w = _apply(wavelet_matrix(x.shape[1], wspec), w, 1)
    w = _apply(dct_matrix(x.shape[2]), w, 2)
    return np.ascontiguousarray(w)


def synthesize(w, wspec=None, dspec=None):
    """Video cube from wavelet-DCT coefficients (exact inverse of :func:`analyze`)."""
    w = as_cube(w, "coefficients")
    wspec = wspec or WaveletSpec()
    dspec = dspec or DctSpec(w.shape[2])
    _check(w.shape, wspec, dspec)
    x = _apply(dct_matrix(w.shape[2]).T, w, 2)
    x = _apply(wavelet_matrix(w.shape[1], wspec).T, x, 1)
    x = _apply(wavelet_matrix(w.shape[0], wspec).T, x, 0)
    return np.ascontiguousarray(x)


def axis_levels(n, levels):
    """Wavelet level of every coefficient index along one axis.

    0 marks the approximation band ``[0, n/2^L)``; level ``l`` (1..L) is the
    detail ring ``[n/2^(L-l+1), n/2^(L-l))``, so ``L`` is the finest scale.
    """
    idx = np.arange(n)
    lev = np.zeros(n, dtype=int)
    for ell in range(1, levels + 1):
        lev[idx >= n >> (levels - ell + 1)] = ell
    return lev


def subband_level(ix, iy, spec, n_x, n_y):
    """Level owning the 2-D coefficient ``(ix, iy)``: max of the per-axis levels."""
    if not (0 <= ix < n_x and 0 <= iy < n_y):
        raise IndexError(f"coefficient index ({ix}, {iy}) outside {n_x}x{n_y}")
    spec.check_size(n_x)
    spec.check_size(n_y)
    return int(max(axis_levels(n_x, spec.levels)[ix], axis_levels(n_y, spec.levels)[iy]))


def level_map(n_x, n_y, spec):
    """Array of :func:`subband_level` over the whole ``n_x x n_y`` plane."""
    spec.check_size(n_x)
    spec.check_size(n_y)
    lx = axis_levels(n_x, spec.levels)
    ly = axis_levels(n_y, spec.levels)
    return np.maximum(lx[:, None], ly[None, :])

"""Dense real containers and elementwise kernels shared by the toolkit.

Video cubes are plain ``float64`` ndarrays of shape ``(n_x, n_y, n_t)`` and
images are ``(n_x, n_y)``. The toolkit-wide vectorization puts x fastest,
then y, then t, i.e. ``vec(a) == a.reshape(-1, order="F")``.
"""
import numpy as np


class DimensionError(ValueError):
    """Raised when array shapes are inconsistent with an operation."""


def vec(a):
    """Column-major vectorization (x fastest, then y, then t)."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v, shape):
    return np.asarray(v).reshape(shape, order="F")


def as_cube(x, name="cube"):
    """Validate and convert ``x`` to a finite float64 video cube."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 3 or min(a.shape) < 1:
        raise DimensionError(f"{name} must be 3-D (n_x, n_y, n_t), got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def as_image(x, name="image"):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or min(a.shape) < 1:
        raise DimensionError(f"{name} must be 2-D (n_x, n_y), got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def hadamard(a, b):
    """Elementwise product of two equally shaped images or cubes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b)
    return a * b


def sum_over_t(x):
    """Pixelwise sum over the time axis, accumulated in ascending frame order.

    The explicit loop pins the summation order so that results are bitwise
    reproducible regardless of how numpy would vectorize a reduction.
    """
    x = as_cube(x)
    out = x[:, :, 0].copy()
    for k in range(1, x.shape[2]):
        out += x[:, :, k]
    return out


def mse(est, ref):
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    _check_same_shape(est, ref)
    return float(np.mean((est - ref) ** 2))


def relative_mse(est, ref):
    """``||est - ref||^2 / ||ref||^2`` (plain squared error if ``ref`` is zero)."""
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    _check_same_shape(est, ref)
    den = float(np.sum(ref * ref))
    num = float(np.sum((est - ref) ** 2))
    return num / den if den > 0 else num


def psnr(est, ref, peak=1.0):
    """Peak signal-to-noise ratio in dB.

    Returns ``math.inf`` when the two inputs are identical.
    """
    if not peak > 0:
        raise ValueError("peak must be positive")
    err = mse(est, ref)
    if err == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / err))


def framewise_psnr(est, ref, peak=1.0):
    """PSNR of each frame along the last axis of two video cubes."""
    est = np.asarray(est, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    _check_same_shape(est, ref)
    return np.array([psnr(est[..., k], ref[..., k], peak) for k in range(est.shape[-1])])

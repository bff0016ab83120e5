"""Coded-aperture measurement model.

A snapshot integrates ``n_t`` sub-frames, each modulated by its own code
plane ``H_k``::

    Y = sum_k X_k * H_k + E

In the shifted mode every plane is a window of one master Bernoulli mask,
translated one column per sub-frame. Because the sensing matrix is a row of
diagonal blocks, its Gram matrix is diagonal with entries ``sum_k H_k**2``.
"""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from . import io
from .tensor import DimensionError, as_cube, as_image

MODES = ("shifted", "random-binary", "random-gray")


@dataclass(frozen=True)
class MasterMask:
    """Binary master code, ``n_t - 1`` columns wider than the frame."""

    data: np.ndarray
    seed: int
    density: float = 0.5

    @classmethod
    def draw(cls, n_x, width, seed, density=0.5):
        if not 0.0 < density < 1.0:
            raise ValueError("mask density must lie in (0, 1)")
        rng = np.random.default_rng(seed)
        data = (rng.random((n_x, width)) < density).astype(np.float64)
        return cls(data, seed, density)

    def window(self, n_y, k):
        """Plane seen by sub-frame ``k`` (0-based): columns ``k .. k+n_y-1``."""
        if k + n_y > self.data.shape[1]:
            raise DimensionError("master mask too narrow for requested window")
        return self.data[:, k : k + n_y]


@dataclass(frozen=True, eq=False)
class MaskSchedule:
    """Stack of code planes, shape ``(n_x, n_y, n_t)``."""

    planes: np.ndarray
    mode: str = "shifted"
    seed: int | None = None
    density: float = 0.5
    master: MasterMask | None = field(default=None, repr=False)

    def __post_init__(self):
        p = as_cube(self.planes, "mask planes")
        if self.mode not in MODES and self.mode != "custom":
            raise ValueError(f"unknown mask mode {self.mode!r}")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("mask transmissions must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "planes", p)

    @property
    def shape(self):
        return self.planes.shape[:2]

    @property
    def n_t(self):
        return self.planes.shape[2]

    def subsample(self, row0, col0, step=2):
        """Planes restricted to one Bayer site ``(row0, col0)`` of every 2x2 tile."""
        return MaskSchedule(
            self.planes[row0::step, col0::step, :].copy(), "custom", self.seed, self.density
        )


def make_schedule(n_x, n_y, n_t, mode="shifted", seed=0, p=0.5):
    """Deterministic code planes for one snapshot.

    ``shifted`` draws a single master mask and windows it; ``random-binary``
    draws an independent Bernoulli(p) plane per sub-frame; ``random-gray``
    draws transmissions uniformly from [0, 1] per sub-frame.
    """
    if n_t < 1 or n_x < 1 or n_y < 1:
        raise ValueError("dimensions must be positive")
    if mode == "shifted":
        master = MasterMask.draw(n_x, n_y + n_t - 1, seed, p)
        planes = np.stack([master.window(n_y, k) for k in range(n_t)], axis=2)
        return MaskSchedule(planes, mode, seed, p, master)
    rng = np.random.default_rng(seed)
    if mode == "random-binary":
        if not 0.0 < p < 1.0:
            raise ValueError("mask density must lie in (0, 1)")
        planes = np.stack([rng.random((n_x, n_y)) < p for _ in range(n_t)], axis=2)
        return MaskSchedule(planes.astype(np.float64), mode, seed, p)
    if mode == "random-gray":
        planes = np.stack([rng.random((n_x, n_y)) for _ in range(n_t)], axis=2)
        return MaskSchedule(planes, mode, seed, p)
    raise ValueError(f"unknown mask mode {mode!r}; expected one of {MODES}")


@dataclass(frozen=True, eq=False)
class CodedSnapshot:
    y: np.ndarray
    schedule: MaskSchedule
    noise_sigma: float = 0.0


def _check_cube(x, schedule):
    x = as_cube(x, "video")
    if x.shape != schedule.planes.shape:
        raise DimensionError(f"video shape {x.shape} does not match masks {schedule.planes.shape}")
    return x


def _modulate_sum(x, planes):
    out = x[:, :, 0] * planes[:, :, 0]
    for k in range(1, planes.shape[2]):
        out += x[:, :, k] * planes[:, :, k]
    return out


def forward(x, schedule, noise_sigma=0.0, seed=None):
    """Coded snapshot of a video cube, with optional additive Gaussian noise."""
    x = _check_cube(x, schedule)
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    y = _modulate_sum(x, schedule.planes)
    if noise_sigma > 0:
        y = y + np.random.default_rng(seed).normal(0.0, noise_sigma, y.shape)
    return CodedSnapshot(y, schedule, float(noise_sigma))


def adjoint(y, schedule):
    """Back-projection: frame ``k`` is ``y * H_k``."""
    y = as_image(y, "measurement")
    if y.shape != schedule.shape:
        raise DimensionError(f"measurement shape {y.shape} does not match masks {schedule.shape}")
    return y[:, :, None] * schedule.planes


def gram_diagonal(schedule):
    """Pixelwise ``sum_k H_k**2``, i.e. the diagonal of the sensing Gram matrix."""
    p = schedule.planes
    out = p[:, :, 0] * p[:, :, 0]
    for k in range(1, p.shape[2]):
        out += p[:, :, k] * p[:, :, k]
    return out


class SensingOperator:
    """Block-diagonal sensing of ``S`` consecutive snapshots on one frame axis.

    Frames ``s*n_t .. (s+1)*n_t - 1`` are seen only by snapshot ``s`` through
    its own schedule. Measurements are stacked as ``(n_x, n_y, S)``; the Gram
    matrix stays diagonal.
    """

    def __init__(self, schedules):
        if isinstance(schedules, MaskSchedule):
            schedules = [schedules]
        schedules = list(schedules)
        if not schedules:
            raise ValueError("need at least one schedule")
        shapes = {s.planes.shape for s in schedules}
        if len(shapes) != 1:
            raise DimensionError("all stacked schedules must share one shape")
        self.schedules = schedules
        self.n_x, self.n_y, self.n_t = schedules[0].planes.shape
        self.segments = len(schedules)

    @property
    def video_shape(self):
        return (self.n_x, self.n_y, self.n_t * self.segments)

    @property
    def measurement_shape(self):
        return (self.n_x, self.n_y, self.segments)

    def forward(self, x):
        out = np.empty(self.measurement_shape)
        for s, sched in enumerate(self.schedules):
            out[:, :, s] = _modulate_sum(x[:, :, s * self.n_t : (s + 1) * self.n_t], sched.planes)
        return out

    def adjoint(self, y):
        return np.concatenate(
            [y[:, :, s, None] * sched.planes for s, sched in enumerate(self.schedules)], axis=2
        )

    def gram_diagonal(self):
        return np.stack([gram_diagonal(s) for s in self.schedules], axis=2)


def focus_blur(x_sharp, depth_map, focus_of_frame, blur_gain):
    """Depth- and frame-dependent Gaussian defocus.

    Pixel ``(i, j)`` of frame ``k`` spreads its intensity with a normalized
    Gaussian of width ``blur_gain * |depth_map[i, j] - focus_of_frame[k]|``
    (truncated at 3 sigma, reflective boundary). Spreading rather than
    gathering keeps the total intensity of every frame unchanged.
    """
    x = as_cube(x_sharp, "sharp video")
    depth = as_image(depth_map, "depth map")
    if depth.shape != x.shape[:2]:
        raise DimensionError("depth map must match frame dimensions")
    focus = np.asarray(focus_of_frame, dtype=np.float64)
    if focus.shape != (x.shape[2],):
        raise DimensionError("need one focal depth per frame")
    if blur_gain < 0:
        raise ValueError("blur_gain must be non-negative")
    out = np.zeros_like(x)
    for k in range(x.shape[2]):
        sigma = blur_gain * np.abs(depth - focus[k])
        frame = x[:, :, k]
        for s in np.unique(sigma):
            sel = sigma == s
            part = np.where(sel, frame, 0.0)
            if s > 0:
                part = gaussian_filter(part, s, mode="reflect", truncate=3.0)
            out[:, :, k] += part
    return out


def save_schedule(directory, schedule):
    """Write one mask file per plane (PGM if binary, CSV otherwise)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    binary = bool(np.all((schedule.planes == 0) | (schedule.planes == 1)))
    names = []
    for k in range(schedule.n_t):
        if binary:
            name = f"mask_{k:03d}.pgm"
            io.write_mask_pgm(directory / name, schedule.planes[:, :, k])
        else:
            name = f"mask_{k:03d}.csv"
            io.write_mask_csv(directory / name, schedule.planes[:, :, k])
        names.append(name)
    return names


def load_schedule(directory, n_t, mode="custom", seed=None, density=0.5):
    """Inverse of :func:`save_schedule`; also loads externally measured masks."""
    directory = Path(directory)
    planes = []
    for k in range(n_t):
        pgm, csvf = directory / f"mask_{k:03d}.pgm", directory / f"mask_{k:03d}.csv"
        if pgm.exists():
            planes.append(io.read_mask_pgm(pgm))
        elif csvf.exists():
            planes.append(io.read_mask_csv(csvf))
        else:
            raise FileNotFoundError(f"missing mask plane {k} in {directory}")
    if len({p.shape for p in planes}) != 1:
        raise DimensionError("mask planes differ in size")
    return MaskSchedule(np.stack(planes, axis=2), mode, seed, density)

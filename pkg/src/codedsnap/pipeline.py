"""Colour reconstruction and temporal-overlap inversion.

A Bayer sensor sees one colour per pixel. The coded snapshot is split into
its four sub-sampled mosaic components (R, G1, G2, B); each is inverted on
its own with the matching sub-sampled mask planes, the recovered frames are
re-mosaicked and finally demosaicked bilinearly.
"""
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.ndimage import convolve

from .coding import MaskSchedule, SensingOperator
from .gap import GapConfig, gap_solve
from .tensor import DimensionError, as_cube, as_image

# Offsets (row, col) of R, G1, G2, B inside a 2x2 tile; G1 shares a row with R.
PATTERNS = {
    "RGGB": ((0, 0), (0, 1), (1, 0), (1, 1)),
    "GRBG": ((0, 1), (0, 0), (1, 1), (1, 0)),
    "GBRG": ((1, 0), (1, 1), (0, 0), (0, 1)),
    "BGGR": ((1, 1), (1, 0), (0, 1), (0, 0)),
}
CHANNELS = ("R", "G1", "G2", "B")


def _offsets(pattern):
    try:
        return PATTERNS[pattern]
    except KeyError:
        raise ValueError(f"unknown Bayer pattern {pattern!r}") from None


@dataclass(frozen=True, eq=False)
class BayerImage:
    mosaic: np.ndarray
    pattern: str = "RGGB"

    def __post_init__(self):
        m = np.asarray(self.mosaic, dtype=np.float64)
        if m.ndim not in (2, 3):
            raise DimensionError("a mosaic is an image or a stack of images")
        if m.shape[0] % 2 or m.shape[1] % 2:
            raise DimensionError("Bayer mosaics need even dimensions")
        _offsets(self.pattern)
        object.__setattr__(self, "mosaic", m)


@dataclass(frozen=True, eq=False)
class ColorCube:
    """Three equally shaped ``(n_x, n_y, n_t)`` cubes."""

    r: np.ndarray
    g: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        shapes = {np.shape(c) for c in (self.r, self.g, self.b)}
        if len(shapes) != 1:
            raise DimensionError("colour planes differ in shape")

    @classmethod
    def from_array(cls, rgb):
        """From an ``(n_x, n_y, 3, n_t)`` array."""
        rgb = np.asarray(rgb, dtype=np.float64)
        return cls(rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2])

    def to_array(self):
        return np.stack([self.r, self.g, self.b], axis=2)


def site_masks(shape, pattern="RGGB"):
    """Boolean R, G, B sampling masks of a mosaic of the given 2-D shape."""
    off = _offsets(pattern)
    masks = np.zeros((4,) + tuple(shape), dtype=bool)
    for i, (r0, c0) in enumerate(off):
        masks[i, r0::2, c0::2] = True
    return masks[0], masks[1] | masks[2], masks[3]


def bayer_split(y):
    """The four quarter-size mosaic components ``(R, G1, G2, B)``."""
    if not isinstance(y, BayerImage):
        y = BayerImage(y)
    return tuple(y.mosaic[r0::2, c0::2].copy() for r0, c0 in _offsets(y.pattern))


def bayer_merge(r, g1, g2, b, pattern="RGGB"):
    """Inverse of :func:`bayer_split`."""
    planes = [np.asarray(p, dtype=np.float64) for p in (r, g1, g2, b)]
    if len({p.shape for p in planes}) != 1:
        raise DimensionError("mosaic components differ in shape")
    shape = (2 * planes[0].shape[0], 2 * planes[0].shape[1]) + planes[0].shape[2:]
    out = np.empty(shape)
    for p, (r0, c0) in zip(planes, _offsets(pattern)):
        out[r0::2, c0::2] = p
    return BayerImage(out, pattern)


_CROSS = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.float64)
_BOX = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64)


def _interpolate(values, sites, kernel):
    """Normalized convolution: weighted mean of the sampled neighbours."""
    num = convolve(np.where(sites, values, 0.0), kernel, mode="mirror")
    den = convolve(sites.astype(np.float64), kernel, mode="mirror")
    filled = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return np.where(sites, values, filled)


def demosaic(m):
    """Bilinear demosaicking of a single mosaic frame.

    Native samples pass through unchanged. Missing green is the mean of the
    four edge neighbours; missing red/blue the mean of the nearest two or
    four same-colour samples. Output is clamped to the mosaic's value range.
    """
    if not isinstance(m, BayerImage):
        m = BayerImage(m)
    mosaic = as_image(m.mosaic, "mosaic")
    r_s, g_s, b_s = site_masks(mosaic.shape, m.pattern)
    lo, hi = mosaic.min(), mosaic.max()
    r = _interpolate(mosaic, r_s, _BOX)
    g = _interpolate(mosaic, g_s, _CROSS)
    b = _interpolate(mosaic, b_s, _BOX)
    return tuple(np.clip(c, lo, hi) for c in (r, g, b))


def mosaic_video(c, pattern="RGGB"):
    """Sample a colour video through the Bayer filter, frame by frame."""
    if not isinstance(c, ColorCube):
        c = ColorCube.from_array(c)
    r, g, b = (as_cube(p, "colour plane") for p in (c.r, c.g, c.b))
    r_s, g_s, b_s = site_masks(r.shape[:2], pattern)
    if r.shape[0] % 2 or r.shape[1] % 2:
        raise DimensionError("Bayer mosaics need even dimensions")
    return np.where(r_s[:, :, None], r, np.where(g_s[:, :, None], g, b))


def channel_schedules(schedule, pattern="RGGB"):
    """Full-resolution mask planes restricted to each mosaic component."""
    return [schedule.subsample(r0, c0) for r0, c0 in _offsets(pattern)]


def _solve_channels(planes, operators, configs, workers):
    """Solve each mosaic component independently; results keep channel order."""

    def job(i):
        return gap_solve(planes[i], operators[i], None, configs[i])

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, range(len(planes))))
    return [job(i) for i in range(len(planes))]


def _truth_slice(config, lo, hi):
    """Config whose ground truth is restricted to frames ``lo:hi``."""
    if config.ground_truth is None:
        return config
    return replace(config, ground_truth=np.asarray(config.ground_truth)[..., lo:hi])


def reconstruct_mosaic(y, schedules, config=None, pattern="RGGB", workers=None, traces=None):
    """Recovered mosaic video from one snapshot (or S stacked snapshots).

    ``schedules`` is a full-resolution schedule, or a list of them for joint
    inversion of consecutive snapshots stacked along ``y``'s third axis.
    ``config.ground_truth``, when set, is the full-resolution mosaic video.
    Solver traces are appended to ``traces`` as ``(channel, trace)`` pairs.
    """
    config = config or GapConfig()
    if isinstance(schedules, MaskSchedule):
        schedules = [schedules]
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2:
        y = y[:, :, None]
    if y.shape[0] % 2 or y.shape[1] % 2:
        raise DimensionError("Bayer mosaics need even dimensions")
    off = _offsets(pattern)
    comps = [y[r0::2, c0::2, :] for r0, c0 in off]
    ops = [SensingOperator([s.subsample(r0, c0) for s in schedules]) for r0, c0 in off]
    if config.ground_truth is None:
        configs = [config] * 4
    else:
        truth = np.asarray(config.ground_truth, dtype=np.float64)
        configs = [replace(config, ground_truth=truth[r0::2, c0::2]) for r0, c0 in off]
    results = _solve_channels(comps, ops, configs, workers)
    if traces is not None:
        traces.extend(zip(CHANNELS, (tr for _, tr in results)))
    return bayer_merge(*(v for v, _ in results), pattern=pattern).mosaic


def demosaic_video(mosaic, pattern="RGGB"):
    mosaic = as_cube(mosaic, "mosaic video")
    frames = [demosaic(BayerImage(mosaic[:, :, k], pattern)) for k in range(mosaic.shape[2])]
    return ColorCube(*(np.stack([f[c] for f in frames], axis=2) for c in range(3)))


def reconstruct_color(y, schedule, config=None, pattern="RGGB", workers=None, traces=None):
    """Colour video from a Bayer-mosaicked coded snapshot."""
    if isinstance(y, BayerImage):
        pattern = y.pattern
        y = y.mosaic
    mosaic = reconstruct_mosaic(y, schedule, config, pattern, workers, traces)
    return demosaic_video(mosaic, pattern)


def _solver(config, color, pattern, workers, traces):
    """``solve(y, schedules, first_frame, label)`` for gray or mosaic data."""

    def solve(y, scheds, lo, label):
        cfg = _truth_slice(config, lo, lo + len(scheds) * scheds[0].n_t)
        if color:
            collected = [] if traces is not None else None
            video = reconstruct_mosaic(y, scheds, cfg, pattern, workers, collected)
            if traces is not None:
                traces.extend((f"{label}/{ch}", tr) for ch, tr in collected)
            return video
        video, trace = gap_solve(y, scheds, None, cfg)
        if traces is not None:
            traces.append((label, trace))
        return video

    return solve


def _schedule_list(snapshots, schedule):
    schedules = list(schedule) if isinstance(schedule, (list, tuple)) else [schedule] * len(snapshots)
    if len(schedules) != len(snapshots):
        raise ValueError("need one schedule per snapshot")
    return schedules


def _pairwise(snapshots, schedules, solve):
    """Joint estimates for each adjacent pair, as 2*n_t-frame cubes."""
    n_t = schedules[0].n_t
    return [
        solve(
            np.stack([snapshots[l], snapshots[l + 1]], axis=2),
            [schedules[l], schedules[l + 1]],
            l * n_t,
            f"pair{l}",
        )
        for l in range(len(snapshots) - 1)
    ]


def _average_windows(pairs, n_t):
    """Each window is the mean of its estimates from the neighbouring pairs."""
    windows = []
    count = len(pairs) + 1
    for l in range(count):
        est = []
        if l > 0:
            est.append(pairs[l - 1][..., n_t:])
        if l < len(pairs):
            est.append(pairs[l][..., :n_t])
        windows.append(est[0] if len(est) == 1 else 0.5 * (est[0] + est[1]))
    return np.concatenate(windows, axis=-1)


def overlap_reconstruct(snapshots, schedule, config=None, color=False, pattern="RGGB", workers=None,
                        traces=None):
    """Video from consecutive snapshots using joint inversion of adjacent pairs.

    Every adjacent pair ``(Y_l, Y_{l+1})`` is inverted jointly over ``2 n_t``
    frames (DCT of length ``2 n_t``). Interior windows average their two
    estimates; the first and last windows have a single estimate. ``schedule``
    may be one schedule shared by all snapshots or one per snapshot.

    ``config.ground_truth``, when set, covers the whole sequence (gray video,
    or mosaic video when ``color``). Solver traces are appended to
    ``traces`` as ``(label, trace)`` pairs.

    With fewer than two snapshots the snapshots are inverted independently
    and a ``UserWarning`` is emitted.
    """
    config = config or GapConfig()
    snapshots = [np.asarray(s, dtype=np.float64) for s in snapshots]
    if not snapshots:
        raise ValueError("no snapshots given")
    schedules = _schedule_list(snapshots, schedule)
    n_t = schedules[0].n_t
    solve = _solver(config, color, pattern, workers, traces)
    if len(snapshots) < 2:
        warnings.warn("fewer than two snapshots: falling back to independent inversion", UserWarning)
        video = np.concatenate(
            [solve(s, [sc], l * n_t, f"snap{l}") for l, (s, sc) in enumerate(zip(snapshots, schedules))],
            axis=-1,
        )
    else:
        video = _average_windows(_pairwise(snapshots, schedules, solve), n_t)
    return demosaic_video(video, pattern) if color else video


def independent_reconstruct(snapshots, schedule, config=None, color=False, pattern="RGGB", workers=None,
                            traces=None):
    """Snapshot-by-snapshot inversion, concatenated along time (no overlap)."""
    config = config or GapConfig()
    snapshots = [np.asarray(s, dtype=np.float64) for s in snapshots]
    schedules = _schedule_list(snapshots, schedule)
    n_t = schedules[0].n_t
    solve = _solver(config, color, pattern, workers, traces)
    parts = [solve(s, [sc], l * n_t, f"snap{l}") for l, (s, sc) in enumerate(zip(snapshots, schedules))]
    video = np.concatenate(parts, axis=-1)
    return demosaic_video(video, pattern) if color else video

"""Depth from focus over a reconstructed focus sweep.

Each reconstructed frame was exposed at a different focal setting, so the
frame in which a pixel is sharpest tells how far away it is. Sharpness is the
local variance of the discrete Laplacian; a calibration table maps the
best-focus frame index to a physical depth.
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import laplace, uniform_filter

from . import io
from .tensor import DimensionError, as_cube, as_image

DEFAULT_WINDOW = 9
DEFAULT_MIN_CONFIDENCE = 0.1
_EPS = 1e-12


def sharpness(frame, window=DEFAULT_WINDOW):
    """Local variance of the Laplacian over a ``window x window`` neighbourhood.

    Parameters
    ----------
    frame : array_like
        2-D image.
    window : int
        Odd neighbourhood size, at least 3.

    Returns
    -------
    ndarray
        Non-negative sharpness map, same shape as ``frame``. Boundaries are
        handled by reflection.
    """
    if int(window) != window or window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd integer >= 3")
    img = as_image(frame, "frame")
    lap = laplace(img, mode="reflect")
    mean = uniform_filter(lap, window, mode="reflect")
    mean_sq = uniform_filter(lap * lap, window, mode="reflect")
    return np.maximum(mean_sq - mean * mean, 0.0)


def sharpness_profile(x, window=DEFAULT_WINDOW):
    """Stack of per-frame sharpness maps, shape ``(n_x, n_y, n_t)``."""
    x = as_cube(x, "video")
    return np.stack([sharpness(x[:, :, k], window) for k in range(x.shape[2])], axis=2)


def best_focus_index(x, window=DEFAULT_WINDOW, refine=False):
    """Per-pixel index of the sharpest frame and a confidence in [0, 1].

    Ties go to the smallest index. Confidence is
    ``(max - median) / (max + eps)`` of the pixel's sharpness profile, so a
    textureless pixel scores about 0 whatever its index. With ``refine`` the
    index is moved to the vertex of a parabola through the peak and its two
    neighbours (interior peaks only).

    Returns
    -------
    index : ndarray
        Integer array, or float array when ``refine`` is set.
    confidence : ndarray
    """
    x = as_cube(x, "video")
    if x.shape[2] < 2:
        raise DimensionError("a focus sweep needs at least two frames")
    s = sharpness_profile(x, window)
    idx = np.argmax(s, axis=2)  # first maximum on ties
    peak = np.take_along_axis(s, idx[:, :, None], axis=2)[:, :, 0]
    conf = (peak - np.median(s, axis=2)) / (peak + _EPS)
    conf = np.clip(conf, 0.0, 1.0)
    if not refine:
        return idx, conf
    n_t = s.shape[2]
    lo = np.clip(idx - 1, 0, n_t - 1)
    hi = np.clip(idx + 1, 0, n_t - 1)
    s_lo = np.take_along_axis(s, lo[:, :, None], axis=2)[:, :, 0]
    s_hi = np.take_along_axis(s, hi[:, :, None], axis=2)[:, :, 0]
    curv = s_lo - 2.0 * peak + s_hi
    interior = (idx > 0) & (idx < n_t - 1) & (curv < 0)
    offset = np.zeros_like(peak)
    offset[interior] = 0.5 * (s_lo - s_hi)[interior] / curv[interior]
    return idx + np.clip(offset, -0.5, 0.5), conf


@dataclass(frozen=True, eq=False)
class DepthCalibration:
    """Frame-index to depth table, strictly increasing in frame index."""

    frames: np.ndarray
    depths: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64).ravel()
        d = np.asarray(self.depths, dtype=np.float64).ravel()
        if f.size < 2 or f.size != d.size:
            raise ValueError("a calibration table needs at least two (frame, depth) pairs")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(d))):
            raise ValueError("calibration entries must be finite")
        if np.any(np.diff(f) <= 0):
            raise ValueError("calibration frame indices must be strictly increasing")
        object.__setattr__(self, "frames", f)
        object.__setattr__(self, "depths", d)

    @classmethod
    def from_pairs(cls, pairs):
        pairs = list(pairs)
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    @classmethod
    def load(cls, path):
        """Read a two-column CSV ``frame_index, depth``; ``#`` lines and a text header are skipped."""
        rows = []
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise io.DataError(f"cannot read calibration {path}: {exc}") from exc
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except (ValueError, IndexError):
                if rows:
                    raise io.DataError(f"{path}: malformed calibration row {line!r}") from None
                # leading header row
        try:
            return cls.from_pairs(rows)
        except ValueError as exc:
            raise io.DataError(f"{path}: {exc}") from exc

    def save(self, path):
        io.write_csv(path, ["frame_index", "depth"], zip(self.frames, self.depths))

    @property
    def depth_range(self):
        return float(self.depths.min()), float(self.depths.max())


@dataclass(frozen=True, eq=False)
class DepthMap:
    """Per-pixel depth with confidence; ``valid`` is False where confidence is too low."""

    depth: np.ndarray
    confidence: np.ndarray
    valid: np.ndarray
    index: np.ndarray | None = None

    def write_pgm(self, path, depth_range):
        """16-bit PGM: 0 marks invalid pixels, 1..65535 spans ``depth_range`` linearly."""
        lo, hi = depth_range
        span = hi - lo if hi > lo else 1.0
        q = 1 + np.rint((self.depth - lo) / span * 65534.0)
        q = np.where(self.valid, np.clip(q, 1, 65535), 0).astype(np.int64)
        io.write_pnm(path, q, 65535)
        return q

    def region_rows(self):
        """One row per best-focus frame index plus an ``invalid`` row."""
        rows = []
        total = self.depth.size
        idx = np.rint(self.index).astype(int) if self.index is not None else None
        if idx is not None:
            for k in np.unique(idx[self.valid]):
                sel = self.valid & (idx == k)
                rows.append(
                    [int(k), int(sel.sum()), sel.sum() / total,
                     float(self.depth[sel].mean()), float(self.confidence[sel].mean())]
                )
        inv = ~self.valid
        rows.append(
            ["invalid", int(inv.sum()), inv.sum() / total, "",
             float(self.confidence[inv].mean()) if inv.any() else ""]
        )
        return rows

    def write_regions(self, path, depth_range):
        lo, hi = depth_range
        io.write_csv(
            path,
            ["frame_index", "pixels", "fraction", "mean_depth", "mean_confidence"],
            self.region_rows(),
            comment=f"pgm_depth_lo={lo!r} pgm_depth_hi={hi!r}",
        )


def depth_from_index(idx_map, cal, confidence=None, min_confidence=DEFAULT_MIN_CONFIDENCE):
    """Piecewise-linear depth lookup; indices outside the table are clamped.

    Pixels whose ``confidence`` falls below ``min_confidence`` are marked
    invalid (their depth value is still the lookup, but must not be used).
    """
    if not isinstance(cal, DepthCalibration):
        cal = DepthCalibration.from_pairs(cal)
    idx = np.asarray(idx_map, dtype=np.float64)
    depth = np.interp(idx, cal.frames, cal.depths)
    if confidence is None:
        confidence = np.ones_like(depth)
    confidence = np.asarray(confidence, dtype=np.float64)
    if confidence.shape != depth.shape:
        raise DimensionError("confidence must match the index map")
    valid = np.isfinite(confidence) & (confidence >= min_confidence)
    return DepthMap(depth, confidence, valid, idx)


def estimate_depth(x, cal, window=DEFAULT_WINDOW, min_confidence=DEFAULT_MIN_CONFIDENCE, refine=False):
    """Best-focus index followed by calibrated depth lookup."""
    idx, conf = best_focus_index(x, window, refine)
    return depth_from_index(idx, cal, conf, min_confidence)

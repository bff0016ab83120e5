"""Synthetic test scenes built from bundled natural photographs.

``natural_clip`` pans a camera over one photograph while a textured disk cut
from a second photograph moves along its own trajectory, which gives global
and local motion plus natural image statistics. ``plane_scene`` builds the
three-depth textured scene used for depth-from-focus checks.
"""
import numpy as np
from scipy.ndimage import map_coordinates, zoom

_SOURCES = ("astronaut", "coffee", "chelsea", "rocket")


def _photo(name):
    from skimage import data

    img = getattr(data, name)()
    img = np.asarray(img, dtype=np.float64) / 255.0
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    return img[:, :, :3]


def _sample(img, rows, cols):
    return np.stack(
        [map_coordinates(img[:, :, c], [rows, cols], order=1, mode="reflect") for c in range(3)],
        axis=-1,
    )


def natural_clip(n=256, n_frames=8, seed=0, color=True, speed=1.5):
    """A moving natural scene in [0, 1].

    Returns ``(n, n, 3, n_frames)`` when ``color`` else ``(n, n, n_frames)``
    (luminance). ``seed`` picks the photographs, start offsets and velocities.
    """
    rng = np.random.default_rng(seed)
    i_bg, i_fg = rng.choice(len(_SOURCES), 2, replace=False)
    bg = _photo(_SOURCES[i_bg])
    fg = _photo(_SOURCES[i_fg])
    # Scale so the view covers ~60% of the photo's shorter side.
    scale = 0.6 * min(bg.shape[:2]) / n
    room = np.array(bg.shape[:2]) - scale * n - 2 * scale * speed * n_frames - 2
    origin = rng.uniform(0, 1, 2) * np.maximum(room, 1) + scale * speed * n_frames
    angle = rng.uniform(0, 2 * np.pi)
    pan = speed * np.array([np.cos(angle), np.sin(angle)])

    radius = n * rng.uniform(0.18, 0.28)
    centre = n * rng.uniform(0.3, 0.7, 2)
    omega = rng.uniform(0.08, 0.16) * rng.choice([-1, 1])
    orbit = n * 0.12
    fg_scale = 0.5 * min(fg.shape[:2]) / (2 * radius)
    fg_origin = np.array(fg.shape[:2]) / 2.0

    r, c = np.meshgrid(np.arange(n, dtype=np.float64), np.arange(n, dtype=np.float64), indexing="ij")
    frames = []
    for k in range(n_frames):
        rows = origin[0] + scale * (r + pan[0] * k)
        cols = origin[1] + scale * (c + pan[1] * k)
        frame = _sample(bg, rows, cols)
        phase = omega * k
        cx = centre[0] + orbit * np.cos(phase)
        cy = centre[1] + orbit * np.sin(phase)
        d2 = (r - cx) ** 2 + (c - cy) ** 2
        alpha = np.clip(radius - np.sqrt(d2), 0.0, 1.0)[:, :, None]
        patch = _sample(fg, fg_origin[0] + fg_scale * (r - cx), fg_origin[1] + fg_scale * (c - cy))
        frames.append(alpha * patch + (1 - alpha) * frame)
    clip = np.clip(np.stack(frames, axis=-1), 0.0, 1.0)
    if color:
        return clip
    return luminance(clip)


def luminance(rgb):
    """Rec. 601 luma of an ``(..., 3, t)`` or ``(..., 3)`` array along the colour axis."""
    w = np.array([0.299, 0.587, 0.114])
    if rgb.ndim == 4:
        return np.einsum("xyct,c->xyt", rgb, w)
    return rgb @ w


def plane_scene(n=64, depths=(1.0, 2.0, 3.0), seed=0):
    """Sharp texture image plus a depth map made of vertical bands, one per depth."""
    rng = np.random.default_rng(seed)
    base = rng.random((n // 4, n // 4))
    texture = np.clip(zoom(base, 4, order=1), 0, 1)[:n, :n]
    texture = 0.5 * texture + 0.5 * rng.random((n, n))
    depth = np.empty((n, n))
    edges = np.linspace(0, n, len(depths) + 1).astype(int)
    for d, lo, hi in zip(depths, edges[:-1], edges[1:]):
        depth[:, lo:hi] = d
    return texture, depth

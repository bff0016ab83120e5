"""Command-line interface: ``simulate``, ``reconstruct``, ``compare-codes``, ``depth``.

Every command reads an optional flat ``key = value`` config file, applies
command-line overrides and writes its outputs plus a ``manifest.txt`` that
records every parameter. A manifest can be fed back as ``--config`` to re-run
the command. The manifest is written last, and only on success.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""
import argparse
import dataclasses
import logging
import sys
import typing
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__, io
from .coding import MODES, adjoint, focus_blur, forward, gram_diagonal, load_schedule, make_schedule, save_schedule
from .depth import DEFAULT_MIN_CONFIDENCE, DEFAULT_WINDOW, DepthCalibration, estimate_depth
from .gap import GapConfig
from .pipeline import (
    PATTERNS,
    ColorCube,
    demosaic_video,
    independent_reconstruct,
    mosaic_video,
    overlap_reconstruct,
)
from .tensor import DimensionError, framewise_psnr

log = logging.getLogger("codedsnap")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3
MANIFEST = "manifest.txt"
FRAME_SUFFIXES = (".pgm", ".ppm", ".png")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    """All parameters of a run; field names double as config-file keys."""

    input: str | None = None
    out: str | None = None
    scene: str | None = None  # natural | planes; synthetic input instead of frames
    scene_seed: int = 0
    size: int = 256
    n_t: int = 8
    snapshots: int = 1
    mask_mode: str = "shifted"
    mask_seed: int = 0
    mask_density: float = 0.5
    mask_dir: str | None = None
    noise_sigma: float = 0.0
    noise_seed: int = 0
    color: bool = False
    pattern: str = "RGGB"
    blur_gain: float = 1.0
    iters: int = 50
    m_star: int | None = None
    a: float = 1.5
    levels: int = 4
    b_x: int = 2
    b_y: int = 2
    b_t: int | None = None
    overlap: bool = False
    workers: int = 1
    format: str = "pgm"
    calibration: str | None = None
    window: int = DEFAULT_WINDOW
    min_confidence: float = DEFAULT_MIN_CONFIDENCE
    refine: bool = False
    truth_index: str | None = None

    def validate(self):
        if self.n_t < 1 or self.snapshots < 1 or self.size < 2:
            raise ConfigError("n_t, snapshots and size must be positive")
        if self.mask_mode not in MODES:
            raise ConfigError(f"mask_mode must be one of {MODES}")
        if not 0.0 < self.mask_density < 1.0:
            raise ConfigError("mask_density must lie in (0, 1)")
        if self.noise_sigma < 0 or self.blur_gain < 0:
            raise ConfigError("noise_sigma and blur_gain must be non-negative")
        if self.pattern not in PATTERNS:
            raise ConfigError(f"pattern must be one of {tuple(PATTERNS)}")
        if self.scene not in (None, "natural", "planes"):
            raise ConfigError("scene must be 'natural' or 'planes'")
        if self.iters < 0 or self.levels < 1 or self.a <= 0:
            raise ConfigError("iters >= 0, levels >= 1 and a > 0 required")
        if self.m_star is not None and self.m_star < 1:
            raise ConfigError("m_star must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.format not in ("pgm", "png"):
            raise ConfigError("format must be 'pgm' or 'png'")
        if self.window < 3 or self.window % 2 == 0:
            raise ConfigError("window must be an odd integer >= 3")
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ConfigError("min_confidence must lie in [0, 1]")
        for name in ("input", "mask_dir", "calibration", "truth_index"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{name} path does not exist: {path}")
        return self

    def gap_config(self):
        return GapConfig(
            max_iters=self.iters, m_star=self.m_star, a=self.a, levels=self.levels,
            b_x=self.b_x, b_y=self.b_y, b_t=self.b_t,
        )

    def items(self):
        return {f.name: _format_value(getattr(self, f.name)) for f in fields(self)}


def _format_value(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _field_types():
    """Scalar kind ("bool", "int", "float" or "str") of every config field."""
    hints = {}
    for f in fields(RunConfig):
        args = typing.get_args(f.type) or (f.type,)
        kind = next((t for t in (bool, int, float) if t in args), str)
        hints[f.name] = kind.__name__
    return hints


def _parse_value(key, text, kind):
    text = text.strip()
    if text.lower() in ("none", ""):
        return None
    try:
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind}") from None
    return text


def load_config(path=None, overrides=None):
    """Defaults, then the config file, then command-line overrides.

    Keys containing a dot (and ``command``/``version``) are manifest
    bookkeeping and are ignored, so a manifest can serve as a config file.
    """
    types = _field_types()
    values = {}
    if path is not None:
        try:
            raw = io.read_kv(path)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        for key, text in raw.items():
            if "." in key or key in ("command", "version"):
                continue
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _parse_value(key, text, types[key])
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    defaults = RunConfig()
    for key, value in list(values.items()):
        if value is None and getattr(defaults, key) is not None and types[key] != "str":
            values.pop(key)
    return RunConfig(**values).validate()


# ---------------------------------------------------------------------------
# frame sequences


def list_frames(directory):
    files = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() in FRAME_SUFFIXES)
    if not files:
        raise io.DataError(f"no PGM/PPM/PNG frames in {directory}")
    return files


def read_sequence(directory, count=None):
    """Frames stacked on the last axis: ``(n_x, n_y, T)`` or ``(n_x, n_y, 3, T)``."""
    files = list_frames(directory)
    if count is not None:
        if len(files) < count:
            raise io.DataError(f"{directory}: need {count} frames, found {len(files)}")
        files = files[:count]
    frames = [io.read_image(f) for f in files]
    if len({f.shape for f in frames}) != 1:
        raise io.DataError(f"{directory}: frames differ in size or channel count")
    return np.stack(frames, axis=-1)


def write_sequence(directory, video, fmt="pgm", bits=8):
    """Write frames; returns the quantized frames re-read as [0, 1] floats."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    color = video.ndim == 4
    suffix = ".png" if fmt == "png" else (".ppm" if color else ".pgm")
    maxval = (1 << bits) - 1
    out = []
    for k in range(video.shape[-1]):
        q = io.write_image(directory / f"frame_{k:03d}{suffix}", video[..., k], bits)
        out.append(q / maxval)
    return np.stack(out, axis=-1)


def _to_gray(video):
    from .scenes import luminance

    return luminance(video) if video.ndim == 4 else video


def _exact_bits(video):
    return 8 if np.array_equal(io.quantize(video, 8) / 255.0, video) else 16


# ---------------------------------------------------------------------------
# simulation


def _plane_depths(n_t):
    return tuple(float(d) for d in np.unique(np.rint(np.linspace(1, max(n_t - 2, 1), 3))))


def synthetic_video(cfg):
    """Synthetic sequence in [0, 1], quantized to 8 bits.

    Returns the video and, for the focus-sweep ``planes`` scene, the map of
    best-focus frame indices.
    """
    total = cfg.n_t * cfg.snapshots
    depth_index = None
    if cfg.scene == "natural":
        from .scenes import natural_clip

        video = natural_clip(cfg.size, total, cfg.scene_seed, color=cfg.color)
    else:
        from .scenes import plane_scene

        texture, depth_index = plane_scene(cfg.size, _plane_depths(cfg.n_t), cfg.scene_seed)
        focus = np.tile(np.arange(cfg.n_t, dtype=np.float64), cfg.snapshots)
        video = focus_blur(np.repeat(texture[:, :, None], total, axis=2), depth_index, focus, cfg.blur_gain)
        if cfg.color:
            video = np.stack([video] * 3, axis=2)
    return io.quantize(video, 8) / 255.0, depth_index


def _schedule_for(cfg, s, shape):
    if cfg.mask_dir is not None:
        sub = Path(cfg.mask_dir) / f"s{s:03d}"
        sched = load_schedule(sub if sub.is_dir() else cfg.mask_dir, cfg.n_t)
        if sched.shape != shape:
            raise DimensionError(f"masks are {sched.shape}, frames are {shape}")
        return sched
    return make_schedule(shape[0], shape[1], cfg.n_t, cfg.mask_mode, cfg.mask_seed + s, cfg.mask_density)


def _load_video(cfg):
    if cfg.scene is not None:
        return synthetic_video(cfg)
    if cfg.input is None:
        raise ConfigError("simulation needs either input frames or a synthetic scene")
    video = read_sequence(cfg.input, cfg.n_t * cfg.snapshots)
    if cfg.color and video.ndim != 4:
        raise ConfigError("color=true needs RGB input frames")
    if not cfg.color:
        video = _to_gray(video)
    return video, None


def _measured(video, cfg):
    """Gray video, or its Bayer mosaic for the colour path."""
    return mosaic_video(ColorCube.from_array(video), cfg.pattern) if cfg.color else video


def cmd_simulate(cfg):
    out = Path(cfg.out)
    video, depth_index = _load_video(cfg)
    shape = video.shape[:2]
    if cfg.color and (shape[0] % 2 or shape[1] % 2):
        raise DimensionError("Bayer mosaics need even frame dimensions")
    measured = _measured(video, cfg)
    manifest = {"command": "simulate", "version": __version__, **cfg.items()}

    truth_bits = _exact_bits(video)
    write_sequence(out / "truth", video, "pgm", truth_bits)
    manifest["truth.dir"] = "truth"
    manifest["truth.bits"] = str(truth_bits)
    manifest["truth.frames"] = str(video.shape[-1])
    if depth_index is not None:
        io.write_pnm(out / "truth" / "depth_index.pgm", depth_index.astype(np.int64), 255)
        manifest["truth.depth_index"] = "truth/depth_index.pgm"

    for s in range(cfg.snapshots):
        sched = _schedule_for(cfg, s, shape)
        block = measured[:, :, s * cfg.n_t : (s + 1) * cfg.n_t]
        snap = forward(block, sched, cfg.noise_sigma, cfg.noise_seed + s).y
        lo = min(0.0, float(snap.min()))
        hi = max(float(cfg.n_t), float(snap.max()))
        name = f"snapshot_{s:03d}.pgm"
        io.write_pnm(out / name, io.quantize((snap - lo) / (hi - lo), 16), 65535)
        save_schedule(out / "masks" / f"s{s:03d}", sched)
        manifest[f"snapshot.{s}.file"] = name
        manifest[f"snapshot.{s}.lo"] = repr(lo)
        manifest[f"snapshot.{s}.hi"] = repr(hi)
        manifest[f"snapshot.{s}.masks"] = f"masks/s{s:03d}"
        log.info("snapshot %d: %s", s, name)
    return manifest


def read_snapshot(directory, manifest, s):
    path = Path(directory) / manifest[f"snapshot.{s}.file"]
    data, maxval = io.read_pnm(path)
    lo, hi = float(manifest[f"snapshot.{s}.lo"]), float(manifest[f"snapshot.{s}.hi"])
    return lo + (hi - lo) * data / maxval


# ---------------------------------------------------------------------------
# reconstruction


def _read_manifest(directory):
    path = Path(directory) / MANIFEST
    if not path.exists():
        raise io.DataError(f"{directory} holds no {MANIFEST}; run simulate first")
    try:
        return io.read_kv(path)
    except ValueError as exc:
        raise io.DataError(str(exc)) from exc


def _sim_settings(manifest, keys):
    types = _field_types()
    return {k: _parse_value(k, manifest[k], types[k]) for k in keys if k in manifest}


def _write_trace(path, traces):
    rows = []
    for label, trace in traces:
        rows.extend(list(r) + [label] for r in trace.rows())
    io.write_csv(path, ["iter", "lambda", "residual", "rel_mse", "solve"], rows)


def _write_metrics(path, values, header=("frame", "psnr")):
    io.write_csv(path, list(header), ([k, repr(float(v))] for k, v in enumerate(values)))


def cmd_reconstruct(cfg):
    if cfg.input is None:
        raise ConfigError("reconstruct needs the simulation directory as input")
    src = Path(cfg.input)
    sim = _read_manifest(src)
    settings = _sim_settings(sim, ("n_t", "snapshots", "color", "pattern"))
    n_t, count = settings["n_t"], settings["snapshots"]
    color, pattern = settings["color"], settings["pattern"]
    if count is None or n_t is None:
        raise io.DataError("simulation manifest lacks n_t/snapshots")

    snaps, scheds = [], []
    for s in range(count):
        snaps.append(read_snapshot(src, sim, s))
        mask_dir = src / sim.get(f"snapshot.{s}.masks", f"masks/s{s:03d}")
        try:
            scheds.append(load_schedule(mask_dir, n_t))
        except FileNotFoundError as exc:
            raise io.DataError(f"missing mask schedule: {exc}") from exc
        if scheds[-1].shape != snaps[-1].shape:
            raise DimensionError(f"snapshot {s} is {snaps[-1].shape}, masks are {scheds[-1].shape}")

    truth = None
    if "truth.dir" in sim:
        truth = read_sequence(src / sim["truth.dir"], n_t * count)
    gap_cfg = cfg.gap_config()
    if truth is not None:
        gap_cfg = dataclasses.replace(gap_cfg, ground_truth=_measured(truth, RunConfig(color=color, pattern=pattern)))

    traces = []
    run = overlap_reconstruct if cfg.overlap else independent_reconstruct
    video = run(snaps, scheds, gap_cfg, color=color, pattern=pattern, workers=cfg.workers, traces=traces)
    if color:
        video = video.to_array()

    out = Path(cfg.out)
    written = write_sequence(out / "frames", video, cfg.format, 8)
    _write_trace(out / "trace.csv", traces)
    manifest = {"command": "reconstruct", "version": __version__, **cfg.items()}
    manifest["source.manifest"] = str(src / MANIFEST)
    manifest["output.frames"] = "frames"
    manifest["output.trace"] = "trace.csv"
    if truth is not None:
        values = framewise_psnr(written, truth)
        _write_metrics(out / "metrics.csv", values)
        manifest["output.metrics"] = "metrics.csv"
        manifest["result.mean_psnr"] = repr(float(np.mean(values)))
        log.info("mean PSNR %.2f dB over %d frames", np.mean(values), len(values))
    return manifest


# ---------------------------------------------------------------------------
# coding comparison


def zero_filled(y, schedule):
    """Least-norm measurement-consistent video ``Phi^T (Phi Phi^T)^-1 y``."""
    d = gram_diagonal(schedule)
    return adjoint(np.divide(y, d, out=np.zeros_like(y), where=d > 0), schedule)


def cmd_compare_codes(cfg):
    cfg = dataclasses.replace(cfg, snapshots=1)
    video, _ = _load_video(cfg)
    measured = _measured(video, cfg)
    shape = video.shape[:2]
    rows = []
    manifest = {"command": "compare-codes", "version": __version__, **cfg.items()}
    for mode in MODES:
        sched = make_schedule(shape[0], shape[1], cfg.n_t, mode, cfg.mask_seed, cfg.mask_density)
        y = forward(measured, sched, cfg.noise_sigma, cfg.noise_seed).y
        run_cfg = dataclasses.replace(cfg.gap_config(), ground_truth=measured)
        est = independent_reconstruct([y], sched, run_cfg, cfg.color, cfg.pattern, cfg.workers)
        base = zero_filled(y, sched)
        if cfg.color:
            est, base = est.to_array(), demosaic_video(base, cfg.pattern).to_array()
        p = framewise_psnr(np.clip(est, 0, 1), video)
        p0 = framewise_psnr(np.clip(base, 0, 1), video)
        rows.extend([mode, k, repr(float(a)), repr(float(b))] for k, (a, b) in enumerate(zip(p, p0)))
        manifest[f"result.{mode}.mean_psnr"] = repr(float(p.mean()))
        manifest[f"result.{mode}.zero_filled_psnr"] = repr(float(p0.mean()))
        log.info("%s: mean PSNR %.2f dB (zero-filled %.2f dB)", mode, p.mean(), p0.mean())
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_csv(out / "compare.csv", ["mode", "frame", "psnr", "zero_filled_psnr"], rows)
    manifest["output.compare"] = "compare.csv"
    return manifest


# ---------------------------------------------------------------------------
# depth


def cmd_depth(cfg):
    if cfg.input is None:
        raise ConfigError("depth needs a directory of focus-swept frames as input")
    if cfg.calibration is None:
        raise ConfigError("depth needs a calibration CSV")
    cal = DepthCalibration.load(cfg.calibration)
    video = _to_gray(read_sequence(cfg.input))
    dmap = estimate_depth(video, cal, cfg.window, cfg.min_confidence, cfg.refine)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = cal.depth_range
    dmap.write_pgm(out / "depth.pgm", rng)
    dmap.write_regions(out / "regions.csv", rng)
    manifest = {"command": "depth", "version": __version__, **cfg.items()}
    manifest["output.depth"] = "depth.pgm"
    manifest["output.depth_lo"] = repr(rng[0])
    manifest["output.depth_hi"] = repr(rng[1])
    manifest["output.regions"] = "regions.csv"
    manifest["result.valid_fraction"] = repr(float(dmap.valid.mean()))
    if cfg.truth_index is not None:
        truth, _ = io.read_pnm(cfg.truth_index)
        if truth.shape != dmap.depth.shape:
            raise DimensionError("truth index map does not match the frames")
        hit = np.abs(dmap.index - truth) <= 1
        frac = float(hit[dmap.valid].mean()) if dmap.valid.any() else 0.0
        manifest["result.within_one_frame"] = repr(frac)
        log.info("%.1f%% of confident pixels within one frame of truth", 100 * frac)
    return manifest


# ---------------------------------------------------------------------------
# entry point

COMMANDS = {
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "compare-codes": cmd_compare_codes,
    "depth": cmd_depth,
}


def _add_flags(parser):
    types = _field_types()
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        kind = types[f.name]
        if kind == "bool":
            parser.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            conv = {"int": int, "float": float, "str": str}[kind]
            parser.add_argument(flag, dest=f.name, type=conv, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="codedsnap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value config file (a manifest works too)")
        _add_flags(p)
    return parser


def main(argv=None):
    logging.basicConfig(stream=sys.stdout, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig)}
    out = None
    try:
        cfg = load_config(args.config, overrides)
        if cfg.out is None:
            raise ConfigError("an output directory (--out) is required")
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / MANIFEST).unlink(missing_ok=True)
        manifest = COMMANDS[args.command](cfg)
        io.write_kv(out / MANIFEST, manifest)
    except (io.DataError, OSError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except ValueError as exc:  # ConfigError, DimensionError and bad parameter values
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

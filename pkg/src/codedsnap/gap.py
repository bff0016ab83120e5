"""Generalized alternating projection (GAP) with a weighted group-l21 prior.

The unknown is the wavelet-DCT coefficient cube ``w`` of the video. GAP starts
at ``theta = 0`` and alternates

* a Euclidean projection onto ``{w : Phi w = y}``, cheap because
  ``Phi Phi^T`` is diagonal;
* block soft-thresholding of every coefficient group with threshold
  ``lambda * beta_k``, where ``lambda`` is the (m*+1)-th largest weighted
  group norm of the current projection.

Groups are contiguous ``b_x x b_y x b_t`` blocks of the coefficient cube. A
group's weight is ``a**(l-1) * a**(g_t-1)`` with ``l`` its spatial wavelet
level and ``g_t`` its (1-based) temporal block index, so fine scales and high
temporal frequencies are pushed harder towards zero.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import io
from .coding import MaskSchedule, SensingOperator
from .tensor import DimensionError, relative_mse
from .transforms import DctSpec, WaveletSpec, analyze, level_map, synthesize


def default_block_t(n_t):
    """Temporal group length: ``n_t / 4`` rounded to the nearest integer, at least 1."""
    return max(1, round(n_t / 4))


@dataclass(frozen=True, eq=False)
class GroupLayout:
    """Partition of an ``(n_x, n_y, n_t)`` coefficient cube into weighted blocks.

    Group ``(gx, gy, gt)`` covers coefficient rows ``gx*b_x ...``, columns
    ``gy*b_y ...`` and time indices ``gt*b_t ...`` (the last temporal block is
    shorter when ``b_t`` does not divide ``n_t``). Group ids run x-fastest:
    ``gx + G_x * (gy + G_y * gt)``.
    """

    shape: tuple
    block: tuple
    weights: np.ndarray = field(repr=False)
    levels: int = 4
    a: float = 1.5

    @property
    def grid(self):
        return self.weights.shape

    @property
    def n_groups(self):
        return self.weights.size

    def weight_vector(self):
        """Weights indexed by group id."""
        return self.weights.reshape(-1, order="F")

    def _blocks(self, w):
        gx, gy, gt = self.grid
        bx, by, bt = self.block
        nt = self.shape[2]
        if w.shape != tuple(self.shape):
            raise DimensionError(f"coefficient shape {w.shape} does not match layout {self.shape}")
        if gt * bt != nt:
            w = np.concatenate([w, np.zeros(w.shape[:2] + (gt * bt - nt,))], axis=2)
        return w.reshape(gx, bx, gy, by, gt, bt)

    def group_norms(self, w):
        """l2 norm of every group, shape ``(G_x, G_y, G_t)``."""
        b = self._blocks(np.asarray(w, dtype=np.float64))
        return np.sqrt(np.einsum("ijklmn,ijklmn->ikm", b, b))

    def scale(self, w, factors):
        """Multiply every coefficient by the factor of its group."""
        b = self._blocks(np.asarray(w, dtype=np.float64))
        out = b * factors[:, None, :, None, :, None]
        gx, gy, gt = self.grid
        bx, by, bt = self.block
        return out.reshape(gx * bx, gy * by, gt * bt)[:, :, : self.shape[2]]

    def labels(self):
        """Group id of every coefficient."""
        nx, ny, nt = self.shape
        bx, by, bt = self.block
        gx, gy, _ = self.grid
        ix = np.arange(nx) // bx
        iy = np.arange(ny) // by
        it = np.arange(nt) // bt
        return ix[:, None, None] + gx * (iy[None, :, None] + gy * it[None, None, :])

    def groups(self):
        """List of index arrays (into the x-fastest vectorization), one per group."""
        lab = self.labels().reshape(-1, order="F")
        order = np.argsort(lab, kind="stable")
        bounds = np.searchsorted(lab[order], np.arange(self.n_groups + 1))
        return [order[bounds[k] : bounds[k + 1]] for k in range(self.n_groups)]


def build_layout(n_x, n_y, n_t, levels=4, b_x=2, b_y=2, b_t=None, a=1.5):
    """Group layout and weights for wavelet-DCT coefficients.

    The spatial level of a block is read from its first coefficient; blocks
    never straddle subbands because every subband edge is a multiple of
    ``n / 2**levels``. The approximation band is weighted like level 1.
    """
    if b_t is None:
        b_t = default_block_t(n_t)
    for name, v in (("b_x", b_x), ("b_y", b_y), ("b_t", b_t), ("n_t", n_t)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer")
    if n_x % b_x or n_y % b_y:
        raise DimensionError(f"block {b_x}x{b_y} does not tile {n_x}x{n_y}")
    if not a > 0:
        raise ValueError("weight base a must be positive")
    spec = WaveletSpec(levels)
    lev = level_map(n_x, n_y, spec)[::b_x, ::b_y]
    if np.any(level_map(n_x, n_y, spec) != np.repeat(np.repeat(lev, b_x, 0), b_y, 1)):
        raise DimensionError("group blocks straddle wavelet subbands; use smaller blocks")
    n_gt = -(-n_t // b_t)
    spatial = a ** (np.maximum(lev, 1) - 1.0)
    temporal = a ** np.arange(n_gt, dtype=np.float64)
    weights = spatial[:, :, None] * temporal[None, None, :]
    weights.setflags(write=False)
    return GroupLayout((n_x, n_y, n_t), (b_x, b_y, b_t), weights, levels, float(a))


def default_m_star(layout, n_measurements=None):
    """Retained-group budget: groups holding about half as many coefficients as measurements.

    ``n_measurements`` defaults to one snapshot, ``n_x * n_y``. The result is
    clipped to ``[1, m - 1]``.
    """
    m = layout.n_groups
    if n_measurements is None:
        n_measurements = layout.shape[0] * layout.shape[1]
    per_group = layout.block[0] * layout.block[1] * layout.block[2]
    return int(min(max(math.ceil(n_measurements / (2.0 * per_group)), 1), m - 1))


def group_shrink(w, layout, lam):
    """Weighted block soft-thresholding (prox of ``lam * sum_k beta_k ||w_k||``)."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    w = np.asarray(w, dtype=np.float64)
    if lam == 0:
        return w.copy()
    # Compare ratios ||w_k|| / beta_k directly so that a group whose ratio
    # equals lambda (the one select_lambda picked) is zeroed exactly.
    ratios = layout.group_norms(w) / layout.weights
    safe = np.where(ratios > lam, ratios, 1.0)
    factors = np.where(ratios > lam, 1.0 - lam / safe, 0.0)
    return layout.scale(w, factors)


def select_lambda(w, layout, m_star):
    """The (m_star+1)-th largest ``||w_k|| / beta_k`` (stable order, lower id first on ties)."""
    m = layout.n_groups
    if int(m_star) != m_star or not 1 <= m_star < m:
        raise ValueError(f"m_star must satisfy 1 <= m_star < {m}, got {m_star}")
    ratios = (layout.group_norms(w) / layout.weights).reshape(-1, order="F")
    order = np.argsort(-ratios, kind="stable")
    return float(ratios[order[int(m_star)]])


def _operator(schedule):
    if isinstance(schedule, SensingOperator):
        return schedule
    if isinstance(schedule, MaskSchedule):
        return SensingOperator([schedule])
    return SensingOperator(schedule)


def _as_measurement(y, op):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2:
        y = y[:, :, None]
    if y.shape != op.measurement_shape:
        raise DimensionError(f"measurement shape {y.shape} does not match {op.measurement_shape}")
    return y


class _Problem:
    """Sensing operator composed with the wavelet-DCT synthesis."""

    def __init__(self, y, schedule, levels):
        self.op = _operator(schedule)
        self.y = _as_measurement(y, self.op)
        self.shape = self.op.video_shape
        self.wspec = WaveletSpec(levels)
        self.dspec = DctSpec(self.shape[2])
        diag = self.op.gram_diagonal()
        self.inv_diag = np.divide(1.0, diag, out=np.zeros_like(diag), where=diag > 0)

    def synth(self, theta):
        return synthesize(theta, self.wspec, self.dspec)

    def analyze(self, x):
        return analyze(x, self.wspec, self.dspec)

    def correction(self, residual):
        """Pixel-domain projection update ``Psi^T (Psi Psi^T)^-1 r``."""
        return self.op.adjoint(residual * self.inv_diag)

    def residual(self, theta):
        return self.y - self.op.forward(self.synth(theta))

    def project(self, theta, residual=None):
        r = self.residual(theta) if residual is None else residual
        return theta + self.analyze(self.correction(r))


def project_to_manifold(theta, y, schedule, levels=4):
    """Euclidean projection of coefficients onto ``{w : Phi w = y}``.

    Pixels whose Gram diagonal is zero (never exposed) carry no constraint and
    contribute nothing to the update.
    """
    theta = np.asarray(theta, dtype=np.float64)
    prob = _Problem(y, schedule, levels)
    if theta.shape != prob.shape:
        raise DimensionError(f"coefficient shape {theta.shape} does not match {prob.shape}")
    return prob.project(theta)


@dataclass
class GapConfig:
    max_iters: int = 50
    m_star: int | None = None
    a: float = 1.5
    levels: int = 4
    b_x: int = 2
    b_y: int = 2
    b_t: int | None = None
    ground_truth: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")

    def layout_for(self, n_x, n_y, n_t):
        return build_layout(n_x, n_y, n_t, self.levels, self.b_x, self.b_y, self.b_t, self.a)


@dataclass
class SolverTrace:
    """Per-iteration record: lambda, ``||y - Phi theta||_2`` and relative MSE."""

    lambdas: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    rel_mse: list = field(default_factory=list)

    def __len__(self):
        return len(self.lambdas)

    def append(self, lam, residual, rel):
        self.lambdas.append(float(lam))
        self.residuals.append(float(residual))
        self.rel_mse.append(None if rel is None else float(rel))

    def rows(self):
        for i, (lam, res, rel) in enumerate(zip(self.lambdas, self.residuals, self.rel_mse), 1):
            yield i, repr(lam), repr(res), "" if rel is None else repr(rel)

    def to_csv(self, path):
        io.write_csv(path, ["iter", "lambda", "residual", "rel_mse"], self.rows())

    @classmethod
    def from_csv(cls, path):
        trace = cls()
        for row in io.read_csv(path):
            rel = row["rel_mse"]
            trace.append(float(row["lambda"]), float(row["residual"]), float(rel) if rel else None)
        return trace


def _iterate(prob, layout, m_star, iters):
    theta = np.zeros(prob.shape)
    res = prob.y.copy()
    for t in range(1, iters + 1):
        w = theta + prob.analyze(prob.correction(res))
        lam = select_lambda(w, layout, m_star)
        theta = group_shrink(w, layout, lam)
        video = prob.synth(theta)
        res = prob.y - prob.op.forward(video)
        yield t, theta, lam, res, video


def gap_iterates(y, schedule, layout=None, config=None):
    """Generator over GAP iterations yielding ``(t, theta, lambda, residual, video)``.

    ``theta`` is the coefficient cube after shrinkage, ``video`` its synthesis
    and ``residual`` the measurement misfit ``y - Phi theta``. A consumer may
    stop at any time; :func:`gap_solve` turns the latest iterate into the
    returned estimate.
    """
    config = config or GapConfig()
    op = _operator(schedule)
    if layout is None:
        layout = config.layout_for(*op.video_shape)
    prob = _Problem(y, op, layout.levels)
    if tuple(layout.shape) != prob.shape:
        raise DimensionError(f"layout shape {layout.shape} does not match video {prob.shape}")
    m_star = config.m_star if config.m_star is not None else default_m_star(layout, prob.y.size)
    yield from _iterate(prob, layout, m_star, config.max_iters)


def gap_solve(y, schedule, layout=None, config=None, callback=None):
    """Reconstruct a video cube from a coded snapshot.

    Parameters
    ----------
    y : ndarray
        Measurement, ``(n_x, n_y)`` or ``(n_x, n_y, S)`` for ``S`` stacked
        snapshots.
    schedule : MaskSchedule, list of MaskSchedule or SensingOperator
    layout : GroupLayout, optional
        Built from ``config`` when omitted.
    config : GapConfig, optional
    callback : callable, optional
        Called as ``callback(t, video)`` after every iteration; returning
        ``True`` stops the solver early with the current estimate.

    Returns
    -------
    video : ndarray
        Projection of the last shrunk iterate back onto the measurement
        manifold, ``synthesize(theta) + Psi^T (Psi Psi^T)^-1 (y - Phi theta)``.
        It reproduces ``y`` exactly wherever a pixel was exposed at least once.
    trace : SolverTrace
    """
    config = config or GapConfig()
    op = _operator(schedule)
    if layout is None:
        layout = config.layout_for(*op.video_shape)
    prob = _Problem(y, op, layout.levels)
    if tuple(layout.shape) != prob.shape:
        raise DimensionError(f"layout shape {layout.shape} does not match video {prob.shape}")
    truth = config.ground_truth
    if truth is not None:
        truth = np.asarray(truth, dtype=np.float64)
        if truth.shape != prob.shape:
            raise DimensionError("ground truth shape does not match the video")
    m_star = config.m_star if config.m_star is not None else default_m_star(layout, prob.y.size)
    trace = SolverTrace()
    video = prob.correction(prob.y)
    for t, theta, lam, res, x_theta in _iterate(prob, layout, m_star, config.max_iters):
        video = x_theta + prob.correction(res)
        rel = relative_mse(video, truth) if truth is not None else None
        trace.append(lam, np.linalg.norm(res), rel)
        if callback is not None and callback(t, video):
            break
    return video, trace


def soft_threshold(w, lam):
    return np.sign(w) * np.maximum(np.abs(w) - lam, 0.0)


def ist_baseline(y, schedule, lambda_fixed, iters, levels=4, ground_truth=None):
    """Iterative soft-thresholding with the same projection step and a fixed threshold.

    Returns the video estimate and a :class:`SolverTrace` (lambda constant).
    """
    if lambda_fixed < 0:
        raise ValueError("lambda must be non-negative")
    prob = _Problem(y, schedule, levels)
    theta = np.zeros(prob.shape)
    res = prob.y.copy()
    trace = SolverTrace()
    for _ in range(iters):
        theta = soft_threshold(prob.project(theta, res), lambda_fixed)
        res = prob.residual(theta)
        rel = None
        if ground_truth is not None:
            rel = relative_mse(prob.synth(theta), ground_truth)
        trace.append(lambda_fixed, np.linalg.norm(res), rel)
    return prob.synth(theta), trace

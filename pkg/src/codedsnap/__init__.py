"""Coded-aperture snapshot video: simulation, GAP reconstruction, colour and depth."""
from .coding import MaskSchedule, SensingOperator, adjoint, focus_blur, forward, gram_diagonal, make_schedule
from .depth import DepthCalibration, best_focus_index, depth_from_index, sharpness
from .gap import GapConfig, SolverTrace, build_layout, gap_solve, group_shrink, ist_baseline, project_to_manifold
from .pipeline import demosaic, overlap_reconstruct, reconstruct_color
from .tensor import DimensionError, psnr
from .transforms import DctSpec, WaveletSpec, analyze, synthesize

__version__ = "0.1.0"

__all__ = [
    "DctSpec",
    "DepthCalibration",
    "DimensionError",
    "GapConfig",
    "MaskSchedule",
    "SensingOperator",
    "SolverTrace",
    "WaveletSpec",
    "adjoint",
    "analyze",
    "best_focus_index",
    "build_layout",
    "demosaic",
    "depth_from_index",
    "focus_blur",
    "forward",
    "gap_solve",
    "gram_diagonal",
    "group_shrink",
    "ist_baseline",
    "make_schedule",
    "overlap_reconstruct",
    "project_to_manifold",
    "psnr",
    "reconstruct_color",
    "sharpness",
    "synthesize",
]

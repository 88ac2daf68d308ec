"""Grayscale image denoising by an iterative cascade of a pluggable
local denoiser and a nonlocal group-shrinkage filter, plus a seeded
benchmark harness."""

from .block_matching import GroupTable, MatchConfig, build_group_table, match_distance
from .denoisers import (
    ANY_SIGMA,
    ContinuousGrid,
    DenoiseRequest,
    DenoiserSpec,
    DiscreteGrid,
    ExternalDenoiser,
    PRESET_GRIDS,
    denoise,
    external_denoise,
    get_spec,
    register_denoiser,
)
from .errors import (
    ConfigError,
    DimensionError,
    ExternalDenoiserError,
    FormatError,
    NN3DError,
)
from .framework import IterationTrace, RunConfig, bm_pilot_plane, level_match, run
from .haar import haar_forward, haar_inverse
from .image import extract_block, load_plane, quantize_u8, save_plane
from .nlf import Group, apply_nlf, extract_group, filter_group, shrink
from .noise import NoiseSpec, add_awgn, mse, psnr

__version__ = "0.1.0"

__all__ = [
    "ANY_SIGMA",
    "ConfigError",
    "ContinuousGrid",
    "DenoiseRequest",
    "DenoiserSpec",
    "DimensionError",
    "DiscreteGrid",
    "ExternalDenoiser",
    "ExternalDenoiserError",
    "FormatError",
    "Group",
    "GroupTable",
    "IterationTrace",
    "MatchConfig",
    "NN3DError",
    "NoiseSpec",
    "PRESET_GRIDS",
    "RunConfig",
    "add_awgn",
    "apply_nlf",
    "bm_pilot_plane",
    "build_group_table",
    "denoise",
    "external_denoise",
    "extract_block",
    "extract_group",
    "filter_group",
    "get_spec",
    "haar_forward",
    "haar_inverse",
    "level_match",
    "load_plane",
    "match_distance",
    "mse",
    "psnr",
    "quantize_u8",
    "register_denoiser",
    "run",
    "save_plane",
    "shrink",
]

"""Pluggable local denoisers: built-in baselines and a subprocess protocol.

A denoiser is identified by a DenoiserSpec (name plus the noise-level
grid it supports) and dispatched through a registry. Built-ins are pure
functions; pretrained networks attach through the external subprocess
protocol without this package embedding any inference runtime:

    <command> <input.npf> <output.npf> <sigma>

where both files are NN3D plane files and sigma is a decimal string
with 6 significant digits. The command must exit 0 on success.
"""

import math
import os
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigError, DimensionError, ExternalDenoiserError
from .image import load_plane, save_plane

WORKDIR_ENV = "NN3D_WORKDIR"


@dataclass(frozen=True)
class ContinuousGrid:
    """Closed interval of supported noise standard deviations."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ConfigError(f"continuous grid needs lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class DiscreteGrid:
    """Strictly increasing tuple of supported noise standard deviations."""

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ConfigError("discrete grid must be non-empty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError(f"discrete grid must be strictly increasing: {vals}")
        object.__setattr__(self, "values", vals)


SigmaGrid = Union[ContinuousGrid, DiscreteGrid]

ANY_SIGMA = ContinuousGrid(0.0, math.inf)

# noise-level grids of common pretrained networks, for use with the
# external protocol
PRESET_GRIDS = {
    "dncnn": DiscreteGrid(tuple(range(5, 80, 5))),
    "wdncnn": DiscreteGrid((15.0, 30.0, 50.0)),
    "ffdnet": ContinuousGrid(0.0, 75.0),
}


@dataclass(frozen=True)
class DenoiserSpec:
    name: str
    sigma_grid: SigmaGrid


@dataclass(frozen=True)
class DenoiseRequest:
    """A plane plus the noise standard deviation assumed to corrupt it."""

    input: np.ndarray
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")


_REGISTRY: dict = {}


def register_denoiser(spec: DenoiserSpec, fn: Callable) -> DenoiserSpec:
    """Register `fn(plane, sigma) -> plane` under spec.name."""
    _REGISTRY[spec.name] = (spec, fn)
    return spec


def get_spec(name: str) -> DenoiserSpec:
    try:
        return _REGISTRY[name][0]
    except KeyError:
        raise ConfigError(f"unknown denoiser {name!r}; registered: {sorted(_REGISTRY)}")


def denoise(spec: DenoiserSpec, req: DenoiseRequest) -> np.ndarray:
    """Run the registered denoiser for `spec` on the request."""
    if isinstance(spec.sigma_grid, DiscreteGrid) and req.sigma not in spec.sigma_grid.values:
        raise ConfigError(
            f"sigma {req.sigma} not in the discrete grid of {spec.name!r}"
        )
    try:
        _, fn = _REGISTRY[spec.name]
    except KeyError:
        raise ConfigError(f"denoiser {spec.name!r} is not registered")
    out = np.asarray(fn(req.input, req.sigma), dtype=np.float64)
    if out.shape != req.input.shape:
        raise DimensionError(
            f"denoiser {spec.name!r} returned {out.shape}, expected {req.input.shape}"
        )
    if not np.all(np.isfinite(out)):
        raise ExternalDenoiserError(f"denoiser {spec.name!r} produced non-finite samples")
    return out


def builtin_identity(plane, sigma: float) -> np.ndarray:
    return np.asarray(plane, dtype=np.float64)


def builtin_gauss(plane, sigma: float) -> np.ndarray:
    """Gaussian blur whose bandwidth widens with the noise level.

    Crude local baseline: spatial sigma = noise sigma / 20, reflected
    boundaries, normalized kernel (constants pass through unchanged).
    """
    arr = np.asarray(plane, dtype=np.float64)
    spatial = sigma / 20.0
    if spatial == 0.0:
        return arr.copy()
    return gaussian_filter(arr, sigma=spatial, mode="reflect")


DCT_BLOCK = 8
DCT_STRIDE = 4
DCT_THRESHOLD_FACTOR = 2.7


def _dct_matrix(n: int) -> np.ndarray:
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    c = np.cos(np.pi * (2 * j + 1) * k / (2 * n))
    c[0] *= np.sqrt(1.0 / n)
    c[1:] *= np.sqrt(2.0 / n)
    return c


_DCT8 = _dct_matrix(DCT_BLOCK)


def _tile_grid(extent: int, block: int, stride: int) -> np.ndarray:
    grid = list(range(0, extent - block + 1, stride))
    if grid[-1] != extent - block:
        grid.append(extent - block)
    return np.asarray(grid)


def builtin_dct8(plane, sigma: float) -> np.ndarray:
    """Sliding 8x8 DCT with hard thresholding of the non-DC coefficients.

    Blocks on a stride-4 grid over a symmetrically extended plane;
    coefficients below 2.7 * sigma are zeroed; overlapping
    reconstructions are averaged with uniform weights.
    """
    arr = np.asarray(plane, dtype=np.float64)
    h, w = arr.shape
    pad = DCT_STRIDE
    padded = np.pad(arr, pad, mode="symmetric")
    ph, pw = padded.shape
    rows = _tile_grid(ph, DCT_BLOCK, DCT_STRIDE)
    cols = _tile_grid(pw, DCT_BLOCK, DCT_STRIDE)
    win = np.lib.stride_tricks.sliding_window_view(padded, (DCT_BLOCK, DCT_BLOCK))
    blocks = win[rows[:, None], cols[None, :]].reshape(-1, DCT_BLOCK, DCT_BLOCK)

    coeffs = _DCT8 @ blocks @ _DCT8.T
    keep = np.abs(coeffs) >= DCT_THRESHOLD_FACTOR * sigma
    keep[:, 0, 0] = True  # DC is never thresholded
    coeffs *= keep
    recon = _DCT8.T @ coeffs @ _DCT8

    base = (rows[:, None] * pw + cols[None, :]).reshape(-1)
    offsets = (np.arange(DCT_BLOCK)[:, None] * pw + np.arange(DCT_BLOCK)).ravel()
    lin = base[:, None] + offsets[None, :]
    num = np.bincount(lin.ravel(), weights=recon.reshape(len(base), -1).ravel(),
                      minlength=ph * pw)
    cnt = np.bincount(lin.ravel(), minlength=ph * pw)
    out = (num / cnt).reshape(ph, pw)
    return out[pad : pad + h, pad : pad + w]


class ExternalDenoiser:
    """File-exchange adapter for an out-of-process denoiser."""

    def __init__(self, command, grid: SigmaGrid = ANY_SIGMA, name: str = "external",
                 workdir=None, timeout: float = 300.0):
        if isinstance(command, str):
            command = shlex.split(command)
        if not command:
            raise ConfigError("external denoiser command is empty")
        self.command = [str(c) for c in command]
        self.workdir = os.fspath(workdir) if workdir else None
        self.timeout = timeout
        self.spec = DenoiserSpec(name=name, sigma_grid=grid)

    def _resolve_workdir(self):
        if self.workdir:
            os.makedirs(self.workdir, exist_ok=True)
            return self.workdir
        env = os.environ.get(WORKDIR_ENV)
        if env:
            os.makedirs(env, exist_ok=True)
            return env
        return tempfile.mkdtemp(prefix="nn3d-ext-")

    def __call__(self, plane, sigma: float) -> np.ndarray:
        req = DenoiseRequest(input=np.asarray(plane, dtype=np.float64), sigma=sigma)
        return external_denoise(self.command, req, self._resolve_workdir(),
                                timeout=self.timeout)

    def register(self) -> DenoiserSpec:
        return register_denoiser(self.spec, self)


def external_denoise(command, req: DenoiseRequest, workdir, timeout: float = 300.0
                     ) -> np.ndarray:
    """Run one request through the subprocess file-exchange protocol."""
    if isinstance(command, str):
        command = shlex.split(command)
    workdir = os.fspath(workdir)
    os.makedirs(workdir, exist_ok=True)
    in_path = os.path.join(workdir, "in.npf")
    out_path = os.path.join(workdir, "out.npf")
    if os.path.exists(out_path):
        os.remove(out_path)
    save_plane(req.input, in_path, format="plane")
    argv = list(command) + [in_path, out_path, f"{req.sigma:.6g}"]
    try:
        proc = subprocess.run(argv, capture_output=True, timeout=timeout, text=True)
    except subprocess.TimeoutExpired as exc:
        raise ExternalDenoiserError(
            f"external denoiser timed out after {timeout} s: {argv}"
        ) from exc
    except OSError as exc:
        raise ExternalDenoiserError(f"cannot run external denoiser {argv}: {exc}") from exc
    if proc.returncode != 0:
        raise ExternalDenoiserError(
            f"external denoiser exited {proc.returncode}: {argv}", stderr=proc.stderr
        )
    try:
        out = load_plane(out_path)
    except Exception as exc:
        raise ExternalDenoiserError(
            f"external denoiser wrote an unreadable plane: {exc}", stderr=proc.stderr
        ) from exc
    if out.shape != req.input.shape:
        raise DimensionError(
            f"external denoiser returned {out.shape}, expected {req.input.shape}"
        )
    return out


register_denoiser(DenoiserSpec("identity", ANY_SIGMA), builtin_identity)
register_denoiser(DenoiserSpec("gauss", ANY_SIGMA), builtin_gauss)
register_denoiser(DenoiserSpec("dct8", ANY_SIGMA), builtin_dct8)

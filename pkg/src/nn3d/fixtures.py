"""Deterministic synthetic test images.

Desk-scale stand-ins for benchmark content: constants and ramps
(trivially smooth), periodic stripe and checker textures (strong
self-similarity), and fixed-seed low-pass noise textures (weak
self-similarity). All fixtures are written as 8-bit PGM so repeated
generation is byte-identical.
"""

import os

import numpy as np
from scipy.ndimage import gaussian_filter

from .image import save_plane

FIXTURE_SIZE = 128

STRIPE_PREFIX = "stripes_"
CHECKER_PREFIX = "checker_"
RANDOM_PREFIX = "random_"


def _stripes_sine(size, period):
    x = np.arange(size)
    row = 127.5 + 100.0 * np.sin(2.0 * np.pi * x / period)
    return np.tile(row, (size, 1))


def _stripes_square(size, period):
    x = np.arange(size)
    row = np.where((x // (period // 2)) % 2 == 0, 64.0, 192.0)
    return np.tile(row, (size, 1))


def _checker(size, period):
    y, x = np.mgrid[0:size, 0:size]
    return np.where(((y // period) + (x // period)) % 2 == 0, 64.0, 192.0)


def _ramp(size, axis):
    v = np.floor(np.arange(size) * 256.0 / size)
    return np.tile(v, (size, 1)) if axis == 1 else np.tile(v[:, None], (1, size))


def _lowpass_noise(size, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    tex = gaussian_filter(rng.standard_normal((size, size)), sigma=1.5, mode="wrap")
    tex = (tex - tex.mean()) / tex.std()
    return np.clip(128.0 + 40.0 * tex, 0.0, 255.0)


def fixture_planes(size: int = FIXTURE_SIZE) -> dict:
    """Name -> plane for the whole corpus, in a fixed order."""
    planes = {
        "constant": np.full((size, size), 128.0),
        "ramp_h": _ramp(size, axis=1),
        "ramp_v": _ramp(size, axis=0),
        "stripes_sine_p08": _stripes_sine(size, 8),
        "stripes_sine_p12": _stripes_sine(size, 12),
        "stripes_sine_p16": _stripes_sine(size, 16),
        "stripes_sine_p24": _stripes_sine(size, 24),
        "stripes_square_p08": _stripes_square(size, 8),
        "checker_p08": _checker(size, 8),
        "checker_p16": _checker(size, 16),
        "random_a": _lowpass_noise(size, seed=2001),
        "random_b": _lowpass_noise(size, seed=2002),
    }
    return planes


def make_fixtures(outdir, size: int = FIXTURE_SIZE) -> list:
    """Write the corpus to `outdir` as PGM files; returns the paths."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for name, plane in fixture_planes(size).items():
        path = os.path.join(outdir, f"{name}.pgm")
        save_plane(plane, path, format="pgm8")
        paths.append(path)
    return paths

"""Seeded additive white Gaussian noise and PSNR/MSE metrics.

Noise is generated with numpy's PCG64 generator (ziggurat normal
sampling), so identical (plane, spec) pairs always produce identical
output within this implementation. Noisy samples are not clamped.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError

PEAK = 255.0


@dataclass(frozen=True)
class NoiseSpec:
    """Noise standard deviation (on the [0, 255] scale) and RNG seed."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not (self.sigma > 0):
            raise ConfigError(f"noise sigma must be > 0, got {self.sigma}")
        if not (0 <= int(self.seed) < 2**64):
            raise ConfigError("seed must fit in an unsigned 64-bit integer")


def add_awgn(plane, spec: NoiseSpec) -> np.ndarray:
    """Return plane + i.i.d. zero-mean Gaussian noise of std spec.sigma."""
    arr = np.asarray(plane, dtype=np.float64)
    rng = np.random.Generator(np.random.PCG64(int(spec.seed)))
    return arr + spec.sigma * rng.standard_normal(arr.shape)


def mse(reference, estimate) -> float:
    ref = np.asarray(reference, dtype=np.float64)
    est = np.asarray(estimate, dtype=np.float64)
    if ref.shape != est.shape:
        raise DimensionError(f"shape mismatch: {ref.shape} vs {est.shape}")
    diff = ref - est
    return float(np.mean(diff * diff))


def psnr(reference, estimate) -> float:
    """Peak signal-to-noise ratio in dB; +inf when the planes are equal."""
    err = mse(reference, estimate)
    if err == 0.0:
        return float("inf")
    return float(10.0 * np.log10(PEAK * PEAK / err))

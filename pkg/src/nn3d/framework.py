"""The iterative denoising cascade and its schedules.

Each iteration k mixes the noisy input with the previous estimate,
z_bar_k = lambda_k * z + (1 - lambda_k) * y_hat_{k-1}, runs the local
denoiser at an effective noise level matched to its supported grid, and
regularizes the result with the nonlocal filter at threshold tau_k.
Block matching runs exactly once per run, on a configurable pilot plane
(the first local-denoiser output by default).

Level matching: denoisers trained only for a grid of noise levels get
the largest supported level not exceeding the requested one (or the
grid minimum), and the denoiser input is rescaled by alpha so that its
noise level lands exactly on the supported value.
"""

import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .block_matching import GroupTable, MatchConfig, build_group_table
from .denoisers import ContinuousGrid, DenoiseRequest, DenoiserSpec, DiscreteGrid, denoise, get_spec
from .errors import ConfigError, DimensionError
from .image import load_plane
from .nlf import apply_nlf

BM_PILOT_CHOICES = ("first_cnnf_output", "noisy_input", "external_file")
SCHEDULE_MODES = ("strict", "lab")


def level_match(grid, target: float):
    """Match the requested noise level to a supported one.

    Returns (sigma_eff, alpha) with alpha = sigma_eff / target. For a
    continuous grid sigma_eff clamps the target into [lo, hi]; for a
    discrete grid it is the largest value <= target, falling back to the
    grid minimum when no value qualifies.
    """
    if not (target > 0):
        raise ConfigError(f"level_match target must be > 0, got {target}")
    if isinstance(grid, ContinuousGrid):
        sigma_eff = min(max(target, grid.lo), grid.hi)
    elif isinstance(grid, DiscreteGrid):
        below = [v for v in grid.values if v <= target]
        sigma_eff = max(below) if below else grid.values[0]
    else:
        raise ConfigError(f"unsupported sigma grid: {grid!r}")
    return sigma_eff, sigma_eff / target


def default_lambda_schedule(iterations: int):
    return tuple(1.0 / k for k in range(1, iterations + 1))


def default_tau_schedule(sigma: float, lambdas):
    return tuple(sigma * lam / 4.0 for lam in lambdas)


@dataclass(frozen=True)
class RunConfig:
    """All schedule and geometry parameters of one denoising run.

    lambda_schedule / tau_schedule default to 1/k and sigma/(4k). In
    "strict" schedule mode the tau schedule must be positive and
    strictly decreasing; "lab" mode accepts any nonnegative values
    (e.g. an all-zero schedule for pipeline identity checks).
    """

    sigma: float
    iterations: int = 2
    lambda_schedule: Optional[tuple] = None
    tau_schedule: Optional[tuple] = None
    match: MatchConfig = MatchConfig()
    denoiser: Optional[DenoiserSpec] = None
    bm_pilot: str = "first_cnnf_output"
    bm_pilot_file: Optional[str] = None
    schedule_mode: str = "strict"
    keep_snapshots: bool = False
    threads: int = 1

    def __post_init__(self):
        if not (self.sigma > 0):
            raise ConfigError(f"sigma must be > 0, got {self.sigma}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.schedule_mode not in SCHEDULE_MODES:
            raise ConfigError(f"schedule_mode must be one of {SCHEDULE_MODES}")
        if self.bm_pilot not in BM_PILOT_CHOICES:
            raise ConfigError(f"bm_pilot must be one of {BM_PILOT_CHOICES}")
        if self.bm_pilot == "external_file" and not self.bm_pilot_file:
            raise ConfigError("bm_pilot=external_file requires bm_pilot_file")
        if self.denoiser is None:
            object.__setattr__(self, "denoiser", get_spec("dct8"))
        lambdas = self.lambda_schedule
        if lambdas is None:
            lambdas = default_lambda_schedule(self.iterations)
        lambdas = tuple(float(v) for v in lambdas)
        if len(lambdas) != self.iterations:
            raise ConfigError(
                f"lambda schedule length {len(lambdas)} != iterations {self.iterations}"
            )
        if lambdas[0] != 1.0:
            raise ConfigError(f"lambda_1 must be 1, got {lambdas[0]}")
        if any(b >= a for a, b in zip(lambdas, lambdas[1:])) or lambdas[-1] <= 0:
            raise ConfigError(f"lambda schedule must satisfy 1 > ... > 0: {lambdas}")
        object.__setattr__(self, "lambda_schedule", lambdas)
        taus = self.tau_schedule
        if taus is None:
            taus = default_tau_schedule(self.sigma, lambdas)
        taus = tuple(float(v) for v in taus)
        if len(taus) != self.iterations:
            raise ConfigError(
                f"tau schedule length {len(taus)} != iterations {self.iterations}"
            )
        if self.schedule_mode == "strict":
            if any(t <= 0 for t in taus):
                raise ConfigError(f"strict mode: tau schedule must be positive: {taus}")
            if any(b >= a for a, b in zip(taus, taus[1:])):
                raise ConfigError(
                    f"strict mode: tau schedule must be strictly decreasing: {taus}"
                )
        elif any(t < 0 for t in taus):
            raise ConfigError(f"tau schedule must be nonnegative: {taus}")
        object.__setattr__(self, "tau_schedule", taus)


@dataclass
class IterationRecord:
    k: int
    lam: float
    sigma_target: float
    sigma_eff: float
    alpha: float
    tau: float
    scaled_min: float
    scaled_max: float
    cnnf_seconds: float = 0.0
    nlf_seconds: float = 0.0
    bm_seconds: Optional[float] = None
    snapshots: Optional[dict] = None


@dataclass
class IterationTrace:
    records: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def bm_seconds(self) -> float:
        return sum(r.bm_seconds for r in self.records if r.bm_seconds is not None)

    @property
    def cnnf_seconds(self) -> float:
        return sum(r.cnnf_seconds for r in self.records)

    @property
    def nlf_seconds(self) -> float:
        return sum(r.nlf_seconds for r in self.records)

    def to_jsonl(self) -> str:
        """One JSON record per iteration (scalar fields only)."""
        lines = []
        for r in self.records:
            lines.append(
                json.dumps(
                    {
                        "k": r.k,
                        "lambda": r.lam,
                        "sigma_target": r.sigma_target,
                        "sigma_eff": r.sigma_eff,
                        "alpha": r.alpha,
                        "tau": r.tau,
                        "scaled_min": r.scaled_min,
                        "scaled_max": r.scaled_max,
                        "cnnf_seconds": r.cnnf_seconds,
                        "nlf_seconds": r.nlf_seconds,
                        "bm_seconds": r.bm_seconds,
                    }
                )
            )
        return "\n".join(lines) + "\n"


def bm_pilot_plane(z, y_tilde_1, cfg: RunConfig) -> np.ndarray:
    """Select the plane block matching runs on, per cfg.bm_pilot."""
    z = np.asarray(z, dtype=np.float64)
    y_tilde_1 = np.asarray(y_tilde_1, dtype=np.float64)
    if z.shape != y_tilde_1.shape:
        raise DimensionError(f"shape mismatch: {z.shape} vs {y_tilde_1.shape}")
    if cfg.bm_pilot == "first_cnnf_output":
        return y_tilde_1
    if cfg.bm_pilot == "noisy_input":
        return z
    pilot = load_plane(cfg.bm_pilot_file)
    if pilot.shape != z.shape:
        raise DimensionError(
            f"external pilot {pilot.shape} does not match input {z.shape}"
        )
    return pilot


def run(z, cfg: RunConfig, table: Optional[GroupTable] = None):
    """Execute the full cascade on noisy plane `z`.

    Returns (estimate, trace). A prebuilt GroupTable can be supplied to
    bypass block matching (e.g. when sweeping tau schedules).
    """
    z = np.asarray(z, dtype=np.float64)
    trace = IterationTrace()
    y_hat = None
    for k in range(1, cfg.iterations + 1):
        lam = cfg.lambda_schedule[k - 1]
        tau = cfg.tau_schedule[k - 1]
        if k == 1:
            z_bar = z  # lambda_1 = 1 and there is no previous estimate
        else:
            z_bar = lam * z + (1.0 - lam) * y_hat
        sigma_eff, alpha = level_match(cfg.denoiser.sigma_grid, lam * cfg.sigma)
        scaled = z_bar if alpha == 1.0 else alpha * z_bar
        t0 = time.perf_counter()
        denoised = denoise(cfg.denoiser, DenoiseRequest(input=scaled, sigma=sigma_eff))
        y_tilde = denoised if alpha == 1.0 else denoised / alpha
        t_cnnf = time.perf_counter() - t0

        bm_seconds = None
        if table is None:
            pilot = bm_pilot_plane(z, y_tilde, cfg)
            t0 = time.perf_counter()
            table = build_group_table(pilot, cfg.match)
            bm_seconds = time.perf_counter() - t0

        t0 = time.perf_counter()
        y_hat = apply_nlf(y_tilde, table, tau, threads=cfg.threads)
        t_nlf = time.perf_counter() - t0

        record = IterationRecord(
            k=k,
            lam=lam,
            sigma_target=lam * cfg.sigma,
            sigma_eff=sigma_eff,
            alpha=alpha,
            tau=tau,
            scaled_min=float(scaled.min()),
            scaled_max=float(scaled.max()),
            cnnf_seconds=t_cnnf,
            nlf_seconds=t_nlf,
            bm_seconds=bm_seconds,
        )
        if cfg.keep_snapshots:
            record.snapshots = {
                "z_bar": np.array(z_bar, copy=True),
                "y_tilde": np.array(y_tilde, copy=True),
                "y_hat": np.array(y_hat, copy=True),
            }
        trace.records.append(record)
    return y_hat, trace

"""Benchmark harness: seeded sweeps over an image directory, CSV report.

Every (image, sigma) pair gets its own deterministic noise seed derived
from the master seed and the file name, so results do not depend on
directory iteration order. Method labels:

* "noisy"     the corrupted input itself (baseline)
* "cnnf-only" one level-matched pass of the local denoiser
* "nlf-only"  nonlocal filter applied directly to the noisy input with
              threshold sigma/4 and a table built from it
* "nn3d"      the full iterative cascade

The CSV schema is versioned in a leading comment line. Timing columns
hold wall-clock seconds and therefore vary between runs; the data
columns are deterministic for a fixed (directory, sigmas, seed).
"""

import hashlib
import io
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .block_matching import MatchConfig, build_group_table
from .denoisers import DenoiseRequest, denoise, get_spec
from .errors import ConfigError, NN3DError
from .framework import RunConfig, level_match, run
from .image import load_plane
from .nlf import apply_nlf
from .noise import NoiseSpec, add_awgn, psnr

CSV_SCHEMA = "# nn3d bench csv v1"
CSV_COLUMNS = (
    "dataset",
    "image",
    "sigma",
    "method",
    "psnr_db",
    "bm_seconds",
    "cnnf_seconds",
    "nlf_seconds",
    "total_seconds",
)
TIMING_COLUMNS = ("bm_seconds", "cnnf_seconds", "nlf_seconds", "total_seconds")
METHODS = ("noisy", "cnnf-only", "nlf-only", "nn3d")
IMAGE_EXTENSIONS = (".pgm", ".png", ".npf")


def per_image_seed(master_seed: int, name: str) -> int:
    """Stable 64-bit noise seed for one image of a sweep."""
    digest = hashlib.blake2b(
        f"{master_seed}:{name}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


@dataclass
class BenchRow:
    dataset: str
    image: str
    sigma: float
    method: str
    psnr_db: float
    bm_seconds: float = 0.0
    cnnf_seconds: float = 0.0
    nlf_seconds: float = 0.0
    total_seconds: float = 0.0


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    def sorted_rows(self):
        return sorted(self.rows, key=lambda r: (r.image, r.sigma, r.method))

    def to_csv(self, include_timings: bool = True) -> str:
        cols = CSV_COLUMNS if include_timings else tuple(
            c for c in CSV_COLUMNS if c not in TIMING_COLUMNS
        )
        out = io.StringIO()
        out.write(CSV_SCHEMA + "\n")
        out.write(",".join(cols) + "\n")
        for r in self.sorted_rows():
            cells = {
                "dataset": r.dataset,
                "image": r.image,
                "sigma": f"{r.sigma:g}",
                "method": r.method,
                "psnr_db": f"{r.psnr_db:.6f}" if np.isfinite(r.psnr_db) else "inf",
                "bm_seconds": f"{r.bm_seconds:.6f}",
                "cnnf_seconds": f"{r.cnnf_seconds:.6f}",
                "nlf_seconds": f"{r.nlf_seconds:.6f}",
                "total_seconds": f"{r.total_seconds:.6f}",
            }
            out.write(",".join(cells[c] for c in cols) + "\n")
        return out.getvalue()

    def mean_psnrs(self) -> dict:
        """(dataset, sigma, method) -> mean PSNR over the images."""
        buckets = {}
        for r in self.rows:
            buckets.setdefault((r.dataset, r.sigma, r.method), []).append(r.psnr_db)
        return {k: float(np.mean(v)) for k, v in sorted(buckets.items())}


def list_images(directory) -> list:
    names = sorted(
        f
        for f in os.listdir(directory)
        if os.path.splitext(f)[1].lower() in IMAGE_EXTENSIONS
    )
    if not names:
        raise NN3DError(f"no images found in {directory}")
    return names


def _run_method(method, z, sigma, spec, match, bm_pilot, threads, run_overrides):
    t_start = time.perf_counter()
    bm_s = cnnf_s = nlf_s = 0.0
    if method == "noisy":
        estimate = z
    elif method == "cnnf-only":
        sigma_eff, alpha = level_match(spec.sigma_grid, sigma)
        scaled = z if alpha == 1.0 else alpha * z
        t0 = time.perf_counter()
        out = denoise(spec, DenoiseRequest(input=scaled, sigma=sigma_eff))
        cnnf_s = time.perf_counter() - t0
        estimate = out if alpha == 1.0 else out / alpha
    elif method == "nlf-only":
        t0 = time.perf_counter()
        table = build_group_table(z, match)
        bm_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        estimate = apply_nlf(z, table, sigma / 4.0, threads=threads)
        nlf_s = time.perf_counter() - t0
    elif method == "nn3d":
        cfg = RunConfig(
            sigma=sigma,
            match=match,
            denoiser=spec,
            bm_pilot=bm_pilot,
            threads=threads,
            **(run_overrides or {}),
        )
        estimate, trace = run(z, cfg)
        bm_s = trace.bm_seconds
        cnnf_s = trace.cnnf_seconds
        nlf_s = trace.nlf_seconds
    else:
        raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
    total = time.perf_counter() - t_start
    return estimate, bm_s, cnnf_s, nlf_s, total


def run_bench(
    image_dir,
    sigmas,
    master_seed: int,
    methods,
    denoiser: str = "dct8",
    match: MatchConfig = MatchConfig(),
    bm_pilot: str = "first_cnnf_output",
    threads: int = 1,
    run_overrides: dict = None,
) -> BenchReport:
    """Sweep every image in `image_dir` over `sigmas` x `methods`.

    run_overrides are extra RunConfig fields for the "nn3d" method, e.g.
    {"tau_schedule": (0, 0), "schedule_mode": "lab"}.
    """
    dataset = os.path.basename(os.path.normpath(os.fspath(image_dir)))
    names = list_images(image_dir)
    spec = get_spec(denoiser) if isinstance(denoiser, str) else denoiser
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {METHODS}")
    report = BenchReport()
    for name in names:
        clean = load_plane(os.path.join(image_dir, name))
        for sigma in sigmas:
            seed = per_image_seed(master_seed, name)
            z = add_awgn(clean, NoiseSpec(sigma=sigma, seed=seed))
            for method in methods:
                estimate, bm_s, cnnf_s, nlf_s, total = _run_method(
                    method, z, sigma, spec, match, bm_pilot, threads, run_overrides
                )
                report.rows.append(
                    BenchRow(
                        dataset=dataset,
                        image=name,
                        sigma=float(sigma),
                        method=method,
                        psnr_db=psnr(clean, estimate),
                        bm_seconds=bm_s,
                        cnnf_seconds=cnnf_s,
                        nlf_seconds=nlf_s,
                        total_seconds=total,
                    )
                )
    return report

"""Command-line front end.

Subcommands: denoise (single image), bench (seeded directory sweep with
CSV report), make-fixtures (synthetic corpus), bm-dump (group-table
sidecar). Run configuration comes from flags, optionally layered over a
flat "key = value" config file whose keys mirror the flag names.
"""

import argparse
import os
import sys

from . import bench as bench_mod
from .block_matching import MatchConfig, build_group_table
from .denoisers import (
    ANY_SIGMA,
    ContinuousGrid,
    DiscreteGrid,
    ExternalDenoiser,
    PRESET_GRIDS,
    get_spec,
)
from .errors import ConfigError, NN3DError
from .fixtures import make_fixtures
from .framework import RunConfig, run
from .image import load_plane, save_plane

CONFIG_KEYS = (
    "sigma",
    "iterations",
    "lambda_schedule",
    "tau_schedule",
    "n1",
    "n2",
    "search_radius",
    "ref_stride",
    "denoiser",
    "external_command",
    "external_grid",
    "bm_pilot",
    "bm_pilot_file",
    "schedule_mode",
    "threads",
)


def parse_config_file(path) -> dict:
    """Flat `key = value` lines; '#' starts a comment."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in CONFIG_KEYS:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = value
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return values


def _parse_floats(text):
    return tuple(float(v) for v in str(text).split(","))


def parse_grid(text):
    """"lo:hi" -> continuous, "a,b,c" -> discrete, preset name -> preset."""
    text = str(text).strip()
    if text in PRESET_GRIDS:
        return PRESET_GRIDS[text]
    if ":" in text:
        lo, hi = text.split(":", 1)
        return ContinuousGrid(float(lo), float(hi))
    return DiscreteGrid(_parse_floats(text))


def _setting(args, config, key, default=None):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in config:
        return config[key]
    return default


def _resolve_denoiser(args, config):
    name = _setting(args, config, "denoiser", "dct8")
    command = _setting(args, config, "external_command")
    grid_text = _setting(args, config, "external_grid")
    if command:
        grid = parse_grid(grid_text) if grid_text else ANY_SIGMA
        ext = ExternalDenoiser(
            command,
            grid=grid,
            name=name if name != "dct8" else "external",
            workdir=getattr(args, "workdir", None),
        )
        return ext.register()
    if grid_text:
        raise ConfigError("external_grid is only meaningful with external_command")
    return get_spec(name)


def _build_match(args, config):
    return MatchConfig(
        n1=int(_setting(args, config, "n1", 10)),
        n2=int(_setting(args, config, "n2", 32)),
        search_radius=int(_setting(args, config, "search_radius", 19)),
        ref_stride=int(_setting(args, config, "ref_stride", 5)),
    )


def _build_run_config(args, config) -> RunConfig:
    sigma = _setting(args, config, "sigma")
    if sigma is None:
        raise ConfigError("sigma is required (flag --sigma or config key)")
    lambdas = _setting(args, config, "lambda_schedule")
    taus = _setting(args, config, "tau_schedule")
    mode = _setting(args, config, "schedule_mode")
    if mode is None:
        # an explicit tau override is a lab experiment unless stated otherwise
        mode = "lab" if taus is not None else "strict"
    return RunConfig(
        sigma=float(sigma),
        iterations=int(_setting(args, config, "iterations", 2)),
        lambda_schedule=_parse_floats(lambdas) if lambdas is not None else None,
        tau_schedule=_parse_floats(taus) if taus is not None else None,
        match=_build_match(args, config),
        denoiser=_resolve_denoiser(args, config),
        bm_pilot=_setting(args, config, "bm_pilot", "first_cnnf_output"),
        bm_pilot_file=_setting(args, config, "bm_pilot_file"),
        schedule_mode=mode,
        threads=int(_setting(args, config, "threads", 1)),
    )


def _add_run_flags(p):
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--sigma", type=float, help="noise standard deviation (0-255 scale)")
    p.add_argument("--iterations", type=int, dest="iterations")
    p.add_argument("--lambda", dest="lambda_schedule", metavar="L1,L2,...",
                   help="iteration step schedule (default 1/k)")
    p.add_argument("--tau", dest="tau_schedule", metavar="T1,T2,...",
                   help="nonlocal threshold schedule (default sigma/(4k))")
    p.add_argument("--denoiser", help="identity | gauss | dct8 | name for external")
    p.add_argument("--external-command", dest="external_command",
                   help="external denoiser: <cmd> in.npf out.npf sigma")
    p.add_argument("--external-grid", dest="external_grid",
                   help="grid of the external denoiser: lo:hi, v1,v2,..., or preset "
                        "(dncnn, wdncnn, ffdnet)")
    p.add_argument("--bm-pilot", dest="bm_pilot",
                   choices=("first_cnnf_output", "noisy_input", "external_file"))
    p.add_argument("--bm-pilot-file", dest="bm_pilot_file")
    p.add_argument("--schedule-mode", dest="schedule_mode", choices=("strict", "lab"))
    p.add_argument("--threads", type=int, dest="threads")
    p.add_argument("--workdir", help="workdir for external denoiser file exchange")
    _add_match_flags(p)


def _add_match_flags(p):
    p.add_argument("--n1", type=int, help="block side (default 10)")
    p.add_argument("--n2", type=int, help="group size (default 32)")
    p.add_argument("--search-radius", type=int, dest="search_radius",
                   help="search window half-width (default 19)")
    p.add_argument("--ref-stride", type=int, dest="ref_stride",
                   help="reference grid stride (default 5)")


def cmd_denoise(args) -> int:
    config = parse_config_file(args.config) if args.config else {}
    cfg = _build_run_config(args, config)
    z = load_plane(args.input)
    estimate, trace = run(z, cfg)
    save_plane(estimate, args.output)
    if args.trace:
        sys.stderr.write(trace.to_jsonl())
    return 0


def cmd_bench(args) -> int:
    config = parse_config_file(args.config) if args.config else {}
    overrides = {}
    iterations = _setting(args, config, "iterations")
    if iterations is not None:
        overrides["iterations"] = int(iterations)
    lambdas = _setting(args, config, "lambda_schedule")
    if lambdas is not None:
        overrides["lambda_schedule"] = _parse_floats(lambdas)
    taus = _setting(args, config, "tau_schedule")
    if taus is not None:
        overrides["tau_schedule"] = _parse_floats(taus)
    mode = _setting(args, config, "schedule_mode")
    if mode is None and taus is not None:
        mode = "lab"
    if mode is not None:
        overrides["schedule_mode"] = mode
    report = bench_mod.run_bench(
        args.images,
        sigmas=_parse_floats(args.sigmas),
        master_seed=args.seed,
        methods=[m.strip() for m in args.methods.split(",")],
        denoiser=_resolve_denoiser(args, config),
        match=_build_match(args, config),
        bm_pilot=_setting(args, config, "bm_pilot", "first_cnnf_output"),
        threads=int(_setting(args, config, "threads", 1)),
        run_overrides=overrides or None,
    )
    csv_text = report.to_csv(include_timings=not args.no_timings)
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    for (dataset, sigma, method), value in report.mean_psnrs().items():
        print(f"mean dataset={dataset} sigma={sigma:g} method={method} "
              f"psnr_db={value:.4f}")
    return 0


def cmd_make_fixtures(args) -> int:
    paths = make_fixtures(args.outdir, size=args.size)
    for p in paths:
        print(p)
    return 0


def cmd_bm_dump(args) -> int:
    plane = load_plane(args.input)
    table = build_group_table(plane, _build_match(args, {}))
    table.save(args.output)
    print(f"{args.output}: {len(table)} groups")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nn3d",
        description="Grayscale denoising by a local-denoiser + nonlocal-filter cascade",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="denoise one image")
    p.add_argument("input")
    p.add_argument("output", help=".pgm or .npf")
    p.add_argument("--trace", action="store_true",
                   help="print per-iteration trace to stderr as JSON lines")
    _add_run_flags(p)
    p.set_defaults(fn=cmd_denoise)

    p = sub.add_parser("bench", help="seeded benchmark sweep over a directory")
    p.add_argument("--images", required=True, help="directory of clean images")
    p.add_argument("--sigmas", required=True, help="comma-separated sigma list")
    p.add_argument("--seed", type=int, default=0, help="master noise seed")
    p.add_argument("--methods", default="nn3d",
                   help="comma-separated: noisy, cnnf-only, nlf-only, nn3d")
    p.add_argument("--out", help="CSV path ('-' for stdout, the default)")
    p.add_argument("--no-timings", action="store_true",
                   help="omit wall-clock columns for byte-stable output")
    _add_run_flags(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("make-fixtures", help="generate the synthetic test corpus")
    p.add_argument("outdir")
    p.add_argument("--size", type=int, default=128)
    p.set_defaults(fn=cmd_make_fixtures)

    p = sub.add_parser("bm-dump", help="write the group-table sidecar for an image")
    p.add_argument("input")
    p.add_argument("output")
    _add_match_flags(p)
    p.set_defaults(fn=cmd_bm_dump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except NN3DError as exc:
        print(f"nn3d: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"nn3d: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands:
  simulate              render a scene, mosaic it, add noise, write PNG + layout
  demosaic              reconstruct full cubes from a mosaic PNG
  run                   full benchmark (scenes -> reconstructions -> metrics)
  validate-uncertainty  Monte-Carlo check of the dop noise law
  report                merge run summaries into one table
  dump-layout           print the 4x4 superpixel pattern as JSON

Exit codes: 0 success, 1 validation failure, 2 bad input or config.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .cpfa import CpfaMosaic, NoiseModel, add_noise, mosaic
from .demosaic import interpolate_initial, reconstruct_base, reconstruct_smooth, split_channels
from .errors import PolarBenchError, ValidationFailure
from .pipeline import (RunConfig, aggregate_runs, dump_json, resolve_layout,
                       run_many, run_scene, scene_noise_seed, single_descriptor,
                       suite_descriptors, tabulate_reports, validate_uncertainty,
                       write_cube_images, write_scene_outputs)
from .pngio import read_image01, write_gray16
from .scenes import load_scene


def _add_config_flags(p, need_scene: bool = True):
    p.add_argument("--config", help="JSON config file")
    if need_scene:
        p.add_argument("--scene", help="scene generator id or ingest directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--sigma", type=float,
                   help="Gaussian noise level on [0,1] intensities "
                        "(overrides config)")


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "sigma", None) is not None:
        overrides["sigma"] = args.sigma
    if overrides:
        config = config.replace(**overrides)
    return config


def _cmd_simulate(args) -> int:
    config = _load_config(args)
    sigma = config.require_sigma()
    layout = resolve_layout(config)
    scene_id, gt = load_scene(args.scene or "malus-ramp", args.height, args.width)
    noise_seed = scene_noise_seed(config.seed, scene_id)
    noisy = add_noise(mosaic(gt, layout), NoiseModel(sigma, noise_seed))

    out = Path(args.out)
    h = config.config_hash()
    # PNG storage clips to [0,1] and quantizes to 16 bits; the sidecar
    # records that so downstream numbers are interpreted correctly.
    write_gray16(out / "mosaic.png", noisy.values, h)
    (out / "layout.json").parent.mkdir(parents=True, exist_ok=True)
    (out / "layout.json").write_text(layout.to_json() + "\n")
    dump_json({"scene": scene_id, "config": config.canonical_dict(),
               "config_hash": h, "noise_seed": noise_seed,
               "mosaic": "mosaic.png", "layout": "layout.json",
               "quantization": "uint16, clipped to [0,1]"},
              out / "simulate.json")
    print(f"simulate: wrote {out / 'mosaic.png'} ({noisy.values.shape[0]}x"
          f"{noisy.values.shape[1]}, scene {scene_id}, hash {h})")
    return 0


def _cmd_demosaic(args) -> int:
    config = _load_config(args)
    mosaic_path = Path(args.input)
    if not mosaic_path.is_file():
        print(f"demosaic: mosaic image not found: {mosaic_path}", file=sys.stderr)
        return 2
    values = read_image01(mosaic_path)
    if values.ndim != 2:
        print("demosaic: mosaic image must be single-channel", file=sys.stderr)
        return 2
    if args.layout:
        layout_path = Path(args.layout)
        if not layout_path.is_file():
            print(f"demosaic: layout file not found: {layout_path}",
                  file=sys.stderr)
            return 2
        from .cpfa import CpfaLayout
        layout = CpfaLayout.from_json(layout_path.read_text())
    else:
        layout = resolve_layout(config)
    m = CpfaMosaic(values, layout)

    out = Path(args.out)
    h = config.config_hash()
    cubes = {
        "initial": interpolate_initial(split_channels(m)),
        "base": reconstruct_base(m, config.lambda_b),
        "smooth": reconstruct_smooth(m, config.lambda_b, config.sigma_r),
    }
    for method, cube in cubes.items():
        write_cube_images(cube, out / method, h, config.eps)
    dump_json({"input": str(mosaic_path), "config": config.canonical_dict(),
               "config_hash": h, "methods": sorted(cubes)},
              out / "demosaic.json")
    print(f"demosaic: wrote {', '.join(sorted(cubes))} under {out} (hash {h})")
    return 0


def _cmd_run(args) -> int:
    config = _load_config(args)
    config.require_sigma()
    if args.scene:
        descs = [single_descriptor(args.scene, args.height, args.width)]
    else:
        descs = suite_descriptors()
    summary = run_many(descs, config, out_dir=args.out, jobs=args.jobs)
    n_ok, n_fail = len(summary["scenes"]), len(summary["failures"])
    for scene_id, err in sorted(summary["failures"].items()):
        print(f"run: FAILED {scene_id}: {err}", file=sys.stderr)
    print(f"run: {n_ok} scene(s) complete, {n_fail} failed, outputs in "
          f"{args.out} (hash {summary['config_hash']})")
    return 1 if n_fail else 0


def _cmd_validate_uncertainty(args) -> int:
    result = validate_uncertainty(n_samples=args.samples, seed=args.seed or 0,
                                  self_test=args.self_test)
    for row in result["rows"]:
        if row.get("exact"):
            line = (f"dop={row['dop_true']:.2f} sigma={row['sigma']:.3f}  "
                    f"exact (no noise)")
        else:
            line = (f"dop={row['dop_true']:.2f} sigma={row['sigma']:.3f}  "
                    f"ks={row['ks_rice']:.5f} mean={row['mean']:.5f}"
                    f"/{row['quad_mean']:.5f} std={row['std']:.5f}"
                    f"/{row['quad_std']:.5f}  "
                    f"{'ok' if row['ks_pass'] and row['moments_pass'] else 'FAIL'}")
            if "ks_wrong_scale" in row:
                line += (f"  wrong-scale ks={row['ks_wrong_scale']:.4f} "
                         f"{'ok' if row['self_test_pass'] else 'FAIL'}")
        print(line)
    if args.out:
        dump_json(result, Path(args.out) / "validate.json")
    if not result["ok"]:
        print("validate-uncertainty: FAILED", file=sys.stderr)
        return 1
    print("validate-uncertainty: all grid points pass")
    return 0


def _cmd_report(args) -> int:
    merged = aggregate_runs(args.runs)
    csv_text, md_text = tabulate_reports(merged)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(csv_text)
        (out / "summary.md").write_text(md_text)
        dump_json(merged, out / "merged.json")
        print(f"report: wrote {out / 'metrics.csv'} and {out / 'summary.md'}")
    else:
        print(md_text)
    return 0


def _cmd_dump_layout(args) -> int:
    from .cpfa import default_layout
    layout = default_layout()
    print(layout.to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarbench",
        description="Synthetic benchmark for color-polarization mosaic "
                    "reconstruction with uncertainty-guided fusion.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a scene and write a noisy mosaic")
    _add_config_flags(p)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--width", type=int, default=128)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("demosaic", help="reconstruct cubes from a mosaic PNG")
    p.add_argument("--input", required=True, help="mosaic PNG path")
    p.add_argument("--layout", help="layout JSON path (default pattern otherwise)")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_demosaic)

    p = sub.add_parser("run", help="full benchmark over the scene suite")
    _add_config_flags(p)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel scene workers (default 1)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate-uncertainty",
                       help="Monte-Carlo check of the dop noise model")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="optional output directory for validate.json")
    p.add_argument("--self-test", action="store_true",
                   help="also run the wrong-scale negative control")
    p.set_defaults(func=_cmd_validate_uncertainty)

    p = sub.add_parser("report", help="merge run summaries into one table")
    p.add_argument("runs", nargs="+", help="run.json files to merge")
    p.add_argument("--out", help="output directory (prints to stdout if unset)")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("dump-layout", help="print the 4x4 superpixel pattern")
    p.set_defaults(func=_cmd_dump_layout)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationFailure as exc:
        print(f"{parser.prog}: validation failure: {exc}", file=sys.stderr)
        return 1
    except PolarBenchError as exc:
        print(f"{parser.prog}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

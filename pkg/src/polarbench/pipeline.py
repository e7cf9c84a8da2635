"""End-to-end benchmark pipeline and run configuration.

One scene run: ground truth -> mosaic -> noise -> three reconstructions
(initial / base / smooth) -> uncertainty map -> normalized weights ->
fused cube -> metric reports for all four methods.  Identical
(scene, config) pairs produce byte-identical output files; the config
hash is embedded in every emitted artifact.
"""

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .core import DEFAULT_EPS, PolarCube, compute_stokes
from .cpfa import CpfaLayout, NoiseModel, add_noise, default_layout, mosaic
from .demosaic import interpolate_initial, reconstruct_base, reconstruct_smooth, split_channels
from .errors import ConfigError, ValidationFailure
from .fusion import FusionWeights, fuse, normalize_log_uncertainty
from .metrics import MetricsReport, full_report
from .pngio import aop_to_rgb, write_gray16, write_rgb8
from .scenes import benchmark_suite, generate_scene, load_scene
from .uncertainty import (RiceParams, draw_dop_samples, monte_carlo_dop,
                          propagate_intensity_uncertainty, residual_uncertainty_map,
                          rice_cdf, rice_moments)

METHODS = ("initial", "base", "smooth", "fused")

KS_RICE_TOL = 0.01
KS_WRONG_SCALE_MIN = 0.05
MOMENT_RTOL = 0.02


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs beyond the scene itself.

    sigma has no default on purpose: the noise level defines the
    benchmark, so it must be stated explicitly (flag or config file).
    """

    sigma: float | None = None
    seed: int = 0
    layout: str = "default"
    lambda_b: float = 0.5
    sigma_r: float = 1.5
    uncertainty_source: str = "residual"
    residual_kind: str = "polarization"
    residual_window: int = 1
    lo_pct: float = 1.0
    hi_pct: float = 99.0
    nll_variant: str = "2s"
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if self.sigma is not None and (not np.isfinite(self.sigma) or self.sigma < 0):
            raise ConfigError(f"sigma must be finite and >= 0, got {self.sigma}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed}")
        if self.uncertainty_source not in ("propagated", "residual"):
            raise ConfigError("uncertainty_source must be 'propagated' or 'residual'")
        if self.residual_kind not in ("intensity", "s0", "polarization"):
            raise ConfigError(f"invalid residual_kind {self.residual_kind!r}")
        if self.nll_variant not in ("2s", "s"):
            raise ConfigError(f"invalid nll_variant {self.nll_variant!r}")
        if not (0.0 <= self.lo_pct < self.hi_pct <= 100.0):
            raise ConfigError("percentiles must satisfy 0 <= lo < hi <= 100")
        if self.lambda_b < 0 or not np.isfinite(self.lambda_b):
            raise ConfigError(f"lambda_b must be finite and >= 0, got {self.lambda_b}")
        if self.sigma_r < 0 or not np.isfinite(self.sigma_r):
            raise ConfigError(f"sigma_r must be finite and >= 0, got {self.sigma_r}")
        if not (self.eps > 0):
            raise ConfigError(f"eps must be positive, got {self.eps}")
        if self.residual_window < 1 or self.residual_window % 2 == 0:
            raise ConfigError("residual_window must be a positive odd integer")

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        known = {f.name for f in fields(RunConfig)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return RunConfig(**d)

    @staticmethod
    def from_file(path) -> "RunConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return RunConfig.from_dict(data)

    def replace(self, **kw) -> "RunConfig":
        d = asdict(self)
        d.update(kw)
        return RunConfig.from_dict(d)

    def require_sigma(self) -> float:
        if self.sigma is None:
            raise ConfigError("noise sigma is required (set --sigma or the "
                              "'sigma' key in the config file)")
        return float(self.sigma)

    def canonical_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True,
                          separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def resolve_layout(config: RunConfig) -> CpfaLayout:
    if config.layout == "default":
        return default_layout()
    p = Path(config.layout)
    if not p.is_file():
        raise ConfigError(f"layout file not found: {p}")
    return CpfaLayout.from_json(p.read_text())


def scene_noise_seed(seed: int, scene_id: str) -> int:
    """Stable per-scene noise key derived from the config seed."""
    digest = hashlib.sha256(f"{seed}:{scene_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def dump_json(obj, path=None) -> str:
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    text = json.dumps(obj, sort_keys=True, indent=1) + "\n"
    if path is not None:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    return text


# ---------------------------------------------------------------------------
# single-scene run
# ---------------------------------------------------------------------------

@dataclass
class SceneRun:
    scene_id: str
    gt: PolarCube
    cubes: dict           # method -> PolarCube
    weights: FusionWeights
    noise_seed: int
    reports: dict         # method -> MetricsReport

    def bundle(self, config: RunConfig) -> dict:
        return {
            "scene": self.scene_id,
            "config": self.config_json_safe(config),
            "config_hash": config.config_hash(),
            "noise_seed": self.noise_seed,
            "normalization": {
                "lo": self.weights.lo,
                "hi": self.weights.hi,
                "degenerate": self.weights.degenerate,
            },
            "reports": {m: r.to_dict() for m, r in self.reports.items()},
        }

    @staticmethod
    def config_json_safe(config: RunConfig) -> dict:
        return config.canonical_dict()


def run_scene(scene_id: str, gt: PolarCube, config: RunConfig) -> SceneRun:
    sigma = config.require_sigma()
    layout = resolve_layout(config)
    noise_seed = scene_noise_seed(config.seed, scene_id)
    noisy = add_noise(mosaic(gt, layout), NoiseModel(sigma, noise_seed))

    initial = interpolate_initial(split_channels(noisy))
    base = reconstruct_base(noisy, config.lambda_b)
    smooth = reconstruct_smooth(noisy, config.lambda_b, config.sigma_r)

    if config.uncertainty_source == "propagated":
        s0_map = compute_stokes(base, config.eps).s0.mean(axis=0)
        umap = propagate_intensity_uncertainty(sigma, s0_map, config.eps)
    else:
        umap = residual_uncertainty_map(base, gt, config.residual_kind,
                                        config.residual_window,
                                        config.nll_variant, config.eps)
    weights = normalize_log_uncertainty(umap.log_sigma, config.lo_pct, config.hi_pct)
    fused = fuse(smooth, base, weights)

    cubes = {"initial": initial, "base": base, "smooth": smooth, "fused": fused}
    h = config.config_hash()
    reports = {m: full_report(c, gt, method=m, scene=scene_id, config_hash=h,
                              eps=config.eps)
               for m, c in cubes.items()}
    return SceneRun(scene_id=scene_id, gt=gt, cubes=cubes, weights=weights,
                    noise_seed=noise_seed, reports=reports)


def write_cube_images(cube: PolarCube, out_dir, config_hash: str,
                      eps: float = DEFAULT_EPS):
    """One angle directory per polarizer angle with R/G/B 16-bit planes,
    plus derived dop/aop rasters (and the cyclic aop color rendering)."""
    out = Path(out_dir)
    for ai, adir in enumerate(("000", "045", "090", "135")):
        for ci, cname in enumerate(("R", "G", "B")):
            write_gray16(out / adir / f"{cname}.png", cube.values[ai, ci],
                         config_hash)
    st = compute_stokes(cube, eps)
    dop = st.dop.mean(axis=0)
    aop_deg = np.degrees(st.aop).mean(axis=0)
    write_gray16(out / "dop.png", dop, config_hash)
    write_gray16(out / "aop.png", (aop_deg + 90.0) / 180.0, config_hash)
    write_rgb8(out / "aop_viz.png", aop_to_rgb(aop_deg), config_hash)


def write_scene_outputs(run: SceneRun, config: RunConfig, scene_dir):
    scene_dir = Path(scene_dir)
    h = config.config_hash()
    for method, cube in run.cubes.items():
        write_cube_images(cube, scene_dir / method, h, config.eps)
    write_gray16(scene_dir / "s_bar.png", run.weights.s_bar, h)
    dump_json(run.bundle(config), scene_dir / "report.json")


# ---------------------------------------------------------------------------
# multi-scene run
# ---------------------------------------------------------------------------

def _scene_job(args):
    scene_id, generator, params, height, width, source, config_dict, out_str = args
    from .errors import PolarBenchError
    from .scenes import SceneDescriptor, ingest_scene

    config = RunConfig.from_dict(config_dict)
    try:
        if source:
            gt = ingest_scene(source)
        else:
            gt = generate_scene(SceneDescriptor(scene_id, generator, params,
                                                height, width))
        run = run_scene(scene_id, gt, config)
        if out_str:
            write_scene_outputs(run, config, Path(out_str) / scene_id)
        return scene_id, run.bundle(config), None
    except PolarBenchError as exc:
        return scene_id, None, f"{type(exc).__name__}: {exc}"


def run_many(descs, config: RunConfig, out_dir=None, jobs: int = 1) -> dict:
    """Run several scenes, isolating per-scene failures.  Results are
    ordered by the input descriptor order regardless of scheduling."""
    config.require_sigma()
    args = []
    for d in descs:
        args.append((d.scene_id, d.generator, dict(d.params), d.height,
                     d.width, d.source_dir, config.canonical_dict(),
                     str(out_dir) if out_dir else ""))
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_scene_job, args))
    else:
        results = [_scene_job(a) for a in args]

    bundles, failures = {}, {}
    for scene_id, bundle, err in results:
        if err is None:
            bundles[scene_id] = bundle
        else:
            failures[scene_id] = err
    summary = {
        "config": config.canonical_dict(),
        "config_hash": config.config_hash(),
        "scenes": bundles,
        "failures": failures,
    }
    if out_dir is not None:
        out = Path(out_dir)
        dump_json(summary, out / "run.json")
        csv_text, md_text = tabulate_reports(summary)
        (out / "metrics.csv").write_text(csv_text)
        (out / "summary.md").write_text(md_text)
    return summary


def suite_descriptors():
    return benchmark_suite()


def single_descriptor(scene: str, height: int = 128, width: int = 128):
    """Descriptor for one scene argument (generator id or directory)."""
    from .scenes import GENERATORS, SceneDescriptor
    p = Path(scene)
    if p.is_dir():
        return SceneDescriptor(p.name, source_dir=str(p))
    if scene in GENERATORS:
        return SceneDescriptor(scene, scene, {}, height, width)
    from .errors import IngestError
    raise IngestError(
        f"scene {scene!r} is neither a directory nor a known generator "
        f"(choices: {sorted(GENERATORS)})")


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def tabulate_reports(summary: dict) -> tuple:
    """CSV + markdown views of one run summary."""
    rows = []
    for scene_id in sorted(summary["scenes"]):
        bundle = summary["scenes"][scene_id]
        for method in METHODS:
            rep = bundle["reports"][method]
            rows.append([rep[name] for name in MetricsReport.CSV_FIELDS])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MetricsReport.CSV_FIELDS)
    writer.writerows(rows)

    metric_cols = ("psnr_mean", "psnr_s0", "psnr_dop", "mae_deg",
                   "ssim_mean", "ssim_s0", "ssim_dop", "psnr_aop")
    lines = ["| method | " + " | ".join(metric_cols) + " |",
             "|" + "---|" * (len(metric_cols) + 1)]
    scenes = sorted(summary["scenes"])
    for method in METHODS:
        if not scenes:
            break
        means = []
        for col in metric_cols:
            vals = [summary["scenes"][s]["reports"][method][col] for s in scenes]
            means.append(sum(vals) / len(vals))
        lines.append("| " + method + " | "
                     + " | ".join(f"{v:.4f}" for v in means) + " |")
    md = (f"# Benchmark means over {len(scenes)} scene(s)\n\n"
          f"config hash: `{summary['config_hash']}`\n\n"
          + "\n".join(lines) + "\n")
    return buf.getvalue(), md


def aggregate_runs(run_json_paths) -> dict:
    """Merge several run summaries; refuses mismatched config hashes."""
    merged = None
    for path in run_json_paths:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"run summary not found: {p}")
        data = json.loads(p.read_text())
        if merged is None:
            merged = {"config": data["config"],
                      "config_hash": data["config_hash"],
                      "scenes": dict(data["scenes"]),
                      "failures": dict(data.get("failures", {}))}
        else:
            if data["config_hash"] != merged["config_hash"]:
                raise ValidationFailure(
                    f"config hash mismatch: {p} has {data['config_hash']}, "
                    f"expected {merged['config_hash']}; refusing to aggregate")
            merged["scenes"].update(data["scenes"])
            merged["failures"].update(data.get("failures", {}))
    if merged is None:
        raise ConfigError("no run summaries given")
    return merged


# ---------------------------------------------------------------------------
# uncertainty validation gate
# ---------------------------------------------------------------------------

DEFAULT_VALIDATION_GRID = ((0.0, 0.01), (0.0, 0.02), (0.3, 0.01),
                           (0.3, 0.02), (0.7, 0.01), (0.7, 0.02))


def validate_uncertainty(grid=DEFAULT_VALIDATION_GRID, n_samples: int = 100_000,
                         seed: int = 0, self_test: bool = False,
                         aop_true: float = 0.3) -> dict:
    """Monte-Carlo gate: at every (dop_true, sigma) grid point the
    empirical dop distribution must match the Rice law (KS < 0.01) and
    its numeric-quadrature moments within 2%.

    With self_test=True a negative control also runs: testing the same
    samples against a Rice law with the wrong scale (sigma instead of
    sqrt(2)*sigma/s0) must yield KS > 0.05, proving the gate can fail.
    """
    s0 = 1.0
    rows = []
    ok = True
    for dop_true, sigma in grid:
        mc = monte_carlo_dop(s0, dop_true, aop_true, sigma, n_samples, seed)
        row = mc.to_dict()
        row["dop_true"] = float(dop_true)
        row["sigma"] = float(sigma)
        if mc.exact:
            row.update({"quad_mean": dop_true, "quad_std": 0.0,
                        "ks_pass": None, "moments_pass": None})
            rows.append(row)
            continue
        rp = RiceParams(nu=dop_true, sigma=math.sqrt(2.0) * sigma / s0)
        q_mean, q_std = rice_moments(rp)
        ks_pass = mc.ks_rice < KS_RICE_TOL
        moments_pass = (abs(mc.mean - q_mean) <= MOMENT_RTOL * q_mean
                        and abs(mc.std - q_std) <= MOMENT_RTOL * q_std)
        row.update({"quad_mean": q_mean, "quad_std": q_std,
                    "ks_pass": ks_pass, "moments_pass": moments_pass})
        if self_test:
            wrong = RiceParams(nu=dop_true, sigma=sigma / s0)
            samples = draw_dop_samples(s0, dop_true, aop_true, sigma,
                                       n_samples, seed)
            from scipy.stats import kstest
            ks_wrong = float(kstest(samples, rice_cdf(wrong)).statistic)
            row["ks_wrong_scale"] = ks_wrong
            row["self_test_pass"] = ks_wrong > KS_WRONG_SCALE_MIN
            ok = ok and row["self_test_pass"]
        ok = ok and ks_pass and moments_pass
        rows.append(row)
    return {"rows": rows, "ok": ok, "n_samples": n_samples, "seed": seed,
            "self_test": self_test}

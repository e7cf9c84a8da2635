"""polarbench: deterministic synthetic benchmark for color-polarization
mosaic reconstruction with Rice-law uncertainty and guided fusion."""

from .core import (ANGLES_DEG, COLORS, DEFAULT_EPS, PolarCube, StokesMap,
                   compute_stokes, mse_loss, synthesize_from_stokes)
from .cpfa import (CpfaLayout, CpfaMosaic, NoiseModel, add_noise,
                   default_layout, mosaic)
from .demosaic import (SparsePlanes, interpolate_initial, reconstruct_base,
                       reconstruct_smooth, split_channels)
from .errors import (ConfigError, DomainError, IngestError, PolarBenchError,
                     StructuralError, ValidationFailure)
from .fusion import FusionWeights, fuse, fusion_loss, normalize_log_uncertainty
from .metrics import MetricsReport, full_report, mae_aop, psnr, psnr_aop, ssim
from .pipeline import (RunConfig, aggregate_runs, run_many, run_scene,
                       scene_noise_seed, validate_uncertainty)
from .scenes import (GENERATORS, SceneDescriptor, benchmark_suite,
                     generate_scene, ingest_scene, load_scene)
from .uncertainty import (RiceParams, UncertaintyMap, draw_dop_samples,
                          fit_polarization_sigma, monte_carlo_dop,
                          polarization_nll, polarization_nll_grad,
                          propagate_intensity_uncertainty,
                          residual_uncertainty_map, rice_cdf,
                          rice_gaussian_approx_cdf, rice_moments, rice_pdf,
                          rice_pdf_gaussian_approx)

__version__ = "0.1.0"

__all__ = [
    "ANGLES_DEG", "COLORS", "DEFAULT_EPS", "PolarCube", "StokesMap",
    "compute_stokes", "synthesize_from_stokes", "mse_loss",
    "CpfaLayout", "CpfaMosaic", "NoiseModel", "default_layout", "mosaic",
    "add_noise",
    "SparsePlanes", "split_channels", "interpolate_initial",
    "reconstruct_base", "reconstruct_smooth",
    "PolarBenchError", "StructuralError", "DomainError", "ConfigError",
    "IngestError", "ValidationFailure",
    "FusionWeights", "normalize_log_uncertainty", "fuse", "fusion_loss",
    "MetricsReport", "full_report", "psnr", "psnr_aop", "mae_aop", "ssim",
    "RunConfig", "run_scene", "run_many", "scene_noise_seed",
    "validate_uncertainty", "aggregate_runs",
    "GENERATORS", "SceneDescriptor", "benchmark_suite", "generate_scene",
    "load_scene", "ingest_scene",
    "RiceParams", "UncertaintyMap", "rice_pdf", "rice_pdf_gaussian_approx",
    "rice_cdf", "rice_gaussian_approx_cdf", "rice_moments",
    "propagate_intensity_uncertainty", "residual_uncertainty_map",
    "polarization_nll", "polarization_nll_grad", "fit_polarization_sigma",
    "monte_carlo_dop", "draw_dop_samples",
    "__version__",
]

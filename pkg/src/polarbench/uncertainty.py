"""Noise propagation into the degree of polarization, and its validation.

Model: each of the four direction intensities carries additive Gaussian
noise of std eta.  Then s1 = x0 - x90 and s2 = x45 - x135 each carry
variance 2*eta^2, and with the total intensity treated at its estimated
value s0, the measured dop = sqrt(s1^2 + s2^2) / s0 follows a Rice
distribution with location equal to the true dop and scale

    sigma_p = sqrt(2) * eta / s0.

This module provides the Rice density (overflow-free via the
exponentially scaled Bessel I0), its Gaussian large-signal approximation,
a heteroscedastic negative log likelihood over dop with log-uncertainty
parameter s = ln(sigma_p), the closed-form maximum-likelihood sigma_p,
windowed residual-based uncertainty maps, and a Monte-Carlo validator.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.integrate import cumulative_trapezoid, quad
from scipy.special import i0e
from scipy.stats import kstest

from .core import DEFAULT_EPS, PolarCube, compute_stokes, synthesize_from_stokes, _as_readonly
from .errors import ConfigError, DomainError, StructuralError

SIGMA_P_FLOOR = 1e-8

NLL_VARIANTS = ("2s", "s")
RESIDUAL_KINDS = ("intensity", "s0", "polarization")


def _log_coef(variant: str) -> float:
    """Coefficient on the log-uncertainty term.  "2s" is the default
    objective form; "s" is the textbook Gaussian-NLL coefficient, exposed
    for side-by-side study."""
    if variant not in NLL_VARIANTS:
        raise ConfigError(f"nll variant must be one of {NLL_VARIANTS}, got {variant!r}")
    return 2.0 if variant == "2s" else 1.0


# ---------------------------------------------------------------------------
# Rice distribution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RiceParams:
    """Location nu (true dop) and scale sigma (propagated dop noise)."""

    nu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.nu) and self.nu >= 0):
            raise DomainError(f"nu must be finite and >= 0, got {self.nu}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"sigma must be finite and > 0, got {self.sigma}")


def rice_pdf(x, params: RiceParams) -> np.ndarray:
    """Rice probability density, evaluated overflow-free.

    pdf(x) = (x / sigma^2) * exp(-(x^2 + nu^2) / (2 sigma^2)) * I0(x nu / sigma^2)

    The Bessel factor is computed as i0e(z) * exp(z) folded into the main
    exponent, i.e. exp(-(x - nu)^2 / (2 sigma^2)) * i0e(z), which stays
    finite for arguments far beyond 1e6.  Negative x returns 0.
    """
    x = np.asarray(x, dtype=np.float64)
    nu, sigma = params.nu, params.sigma
    z = x * nu / sigma**2
    val = (x / sigma**2) * np.exp(-(x - nu) ** 2 / (2.0 * sigma**2)) * i0e(np.abs(z))
    return np.where(x > 0, val, 0.0)


def rice_pdf_gaussian_approx(x, params: RiceParams) -> np.ndarray:
    """Large-signal Gaussian approximation of the Rice density:

    pdf(x) ~= sqrt(x / (2 pi nu sigma^2)) * exp(-(x - nu)^2 / (2 sigma^2))

    Requires nu > 0 (the approximation degenerates at nu = 0).
    """
    if params.nu <= 0:
        raise DomainError("gaussian approximation requires nu > 0")
    x = np.asarray(x, dtype=np.float64)
    nu, sigma = params.nu, params.sigma
    pos = x > 0
    xp = np.where(pos, x, 0.0)
    val = np.sqrt(xp / (2.0 * np.pi * nu * sigma**2)) * np.exp(
        -(xp - nu) ** 2 / (2.0 * sigma**2))
    return np.where(pos, val, 0.0)


def _cdf_from_pdf(pdf_fn, params: RiceParams, n: int = 20001):
    hi = params.nu + 12.0 * params.sigma
    grid = np.linspace(0.0, hi, n)
    cdf = cumulative_trapezoid(pdf_fn(grid, params), grid, initial=0.0)

    def cdf_at(q):
        return np.interp(np.asarray(q, dtype=np.float64), grid, cdf)

    return cdf_at


def rice_cdf(params: RiceParams, n: int = 20001):
    """Vectorized CDF callable built by numeric integration of rice_pdf."""
    return _cdf_from_pdf(rice_pdf, params, n)


def rice_gaussian_approx_cdf(params: RiceParams, n: int = 20001):
    """CDF of the Gaussian approximation, integrated as printed (no
    renormalization: its deficit from 1 is part of the approximation)."""
    return _cdf_from_pdf(rice_pdf_gaussian_approx, params, n)


def rice_moments(params: RiceParams):
    """Mean and std of the Rice law by numeric quadrature."""
    hi = params.nu + 14.0 * params.sigma
    m1 = quad(lambda t: t * rice_pdf(t, params), 0.0, hi, limit=200)[0]
    m2 = quad(lambda t: t * t * rice_pdf(t, params), 0.0, hi, limit=200)[0]
    return m1, math.sqrt(max(m2 - m1 * m1, 0.0))


# ---------------------------------------------------------------------------
# Propagation and uncertainty maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UncertaintyMap:
    """Per-pixel uncertainty triplet.

    intensity_sigma    std of the direction-intensity noise (eta)
    polarization_sigma std of the dop estimate (sigma_p), floored at 1e-8
    log_sigma          ln(polarization_sigma)
    kind               "propagated", "intensity", "s0", or "polarization"
    floored            where polarization_sigma hit the numerical floor
    """

    intensity_sigma: np.ndarray
    polarization_sigma: np.ndarray
    log_sigma: np.ndarray
    kind: str
    floored: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.intensity_sigma, dtype=np.float64)
        sp = np.asarray(self.polarization_sigma, dtype=np.float64)
        ls = np.asarray(self.log_sigma, dtype=np.float64)
        fl = np.asarray(self.floored, dtype=bool)
        if not (eta.ndim == 2 and eta.shape == sp.shape == ls.shape == fl.shape):
            raise StructuralError("uncertainty map fields must share one (H, W) shape")
        if np.any(eta < 0) or not np.all(np.isfinite(eta)):
            raise DomainError("intensity_sigma must be finite and >= 0")
        if np.any(sp <= 0) or not np.all(np.isfinite(sp)):
            raise DomainError("polarization_sigma must be finite and > 0")
        if np.max(np.abs(ls - np.log(sp))) > 1e-12:
            raise DomainError("log_sigma must equal ln(polarization_sigma)")
        object.__setattr__(self, "intensity_sigma", _as_readonly(eta))
        object.__setattr__(self, "polarization_sigma", _as_readonly(sp))
        object.__setattr__(self, "log_sigma", _as_readonly(ls))
        flc = fl.copy()
        flc.setflags(write=False)
        object.__setattr__(self, "floored", flc)


def _finish_map(eta, sigma_p, kind) -> UncertaintyMap:
    floored = sigma_p < SIGMA_P_FLOOR
    sigma_p = np.maximum(sigma_p, SIGMA_P_FLOOR)
    return UncertaintyMap(intensity_sigma=eta, polarization_sigma=sigma_p,
                          log_sigma=np.log(sigma_p), kind=kind, floored=floored)


def propagate_intensity_uncertainty(intensity_sigma, s0,
                                    eps: float = DEFAULT_EPS) -> UncertaintyMap:
    """Propagate intensity noise std into dop noise std:
    sigma_p = sqrt(2) * eta / max(s0, eps).

    intensity_sigma is a scalar or an (H, W) raster; s0 is (H, W).
    """
    if not (eps > 0):
        raise DomainError(f"eps must be positive, got {eps}")
    s0 = np.asarray(s0, dtype=np.float64)
    if s0.ndim != 2:
        raise StructuralError(f"s0 must be 2-D, got shape {s0.shape}")
    eta = np.broadcast_to(np.asarray(intensity_sigma, dtype=np.float64), s0.shape)
    if np.any(eta < 0) or not np.all(np.isfinite(eta)):
        raise DomainError("intensity_sigma must be finite and >= 0")
    sigma_p = math.sqrt(2.0) * eta / np.maximum(s0, eps)
    return _finish_map(np.array(eta), sigma_p, "propagated")


def residual_uncertainty_map(recon: PolarCube, reference: PolarCube,
                             kind: str = "polarization", window: int = 11,
                             variant: str = "2s",
                             eps: float = DEFAULT_EPS) -> UncertaintyMap:
    """Windowed residual-based uncertainty estimate.

    kind selects the residual domain and its local ML estimator:

    * "intensity"    all 12 plane residuals, sigma = sqrt(mean r^2)
    * "s0"           per-color s0 residuals, sigma = sqrt(mean r^2)
    * "polarization" residuals of the color-mean dop raster (the same
      raster the metrics evaluate), estimator matched to the configured
      NLL variant: sqrt(mean r^2 / 2) for "2s", sqrt(mean r^2) for "s"

    The window is a uniform box (odd side, mirror boundary); residual
    planes pool into one (H, W) map.  window = 1 keeps the per-pixel
    residual magnitude itself, the sharpest fusion gate.  Intensity/s0
    estimates convert to dop units via sigma_p = sqrt(2) * eta / s0;
    polarization estimates convert back the other way.
    """
    if kind not in RESIDUAL_KINDS:
        raise ConfigError(f"kind must be one of {RESIDUAL_KINDS}, got {kind!r}")
    coef = _log_coef(variant)
    if recon.values.shape != reference.values.shape:
        raise StructuralError("recon and reference cubes differ in shape")
    h, w = recon.height, recon.width
    if window < 1 or window % 2 == 0 or window > min(h, w):
        raise StructuralError(
            f"window must be odd, >= 1, and <= min(H, W)={min(h, w)}, got {window}")

    st_r = compute_stokes(recon, eps)
    s0_map = np.maximum(st_r.s0.mean(axis=0), eps)

    if kind == "intensity":
        r = recon.values - reference.values          # (4, 3, H, W)
        planes = r.reshape(-1, h, w)
    elif kind == "s0":
        planes = st_r.s0 - compute_stokes(reference, eps).s0   # (3, H, W)
    else:
        d = st_r.dop.mean(axis=0) - compute_stokes(reference, eps).dop.mean(axis=0)
        planes = d[None]                              # (1, H, W)

    mean_sq = np.zeros((h, w), dtype=np.float64)
    for p in planes:
        mean_sq += ndimage.uniform_filter(p * p, size=window, mode="mirror")
    mean_sq = np.maximum(mean_sq / planes.shape[0], 0.0)

    if kind == "polarization":
        sigma_p = np.sqrt(mean_sq / coef)
        eta = sigma_p * s0_map / math.sqrt(2.0)
    else:
        eta = np.sqrt(mean_sq)
        sigma_p = math.sqrt(2.0) * eta / s0_map
    return _finish_map(eta, sigma_p, kind)


# ---------------------------------------------------------------------------
# Heteroscedastic dop likelihood
# ---------------------------------------------------------------------------

def polarization_nll(dop_pred, dop_true, log_sigma, variant: str = "2s",
                     eps: float = DEFAULT_EPS):
    """Heteroscedastic negative log likelihood over dop.

    Per pixel, with s = log_sigma and c the variant coefficient (2 or 1):

        0.5 * (ln dop_pred - ln dop_true) + c * s
            + 0.5 * exp(-2 s) * (dop_pred - dop_true)^2

    dop inputs are floored at eps before the logs.  Returns
    (mean, per_pixel_map).
    """
    coef = _log_coef(variant)
    if not (eps > 0):
        raise DomainError(f"eps must be positive, got {eps}")
    pred = np.asarray(dop_pred, dtype=np.float64)
    true = np.asarray(dop_true, dtype=np.float64)
    s = np.asarray(log_sigma, dtype=np.float64)
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(true))
            and np.all(np.isfinite(s))):
        raise DomainError("nll inputs must be finite")
    pred = np.maximum(pred, eps)
    true = np.maximum(true, eps)
    per_pixel = (0.5 * (np.log(pred) - np.log(true)) + coef * s
                 + 0.5 * np.exp(-2.0 * s) * (pred - true) ** 2)
    return float(np.mean(per_pixel)), per_pixel


def polarization_nll_grad(dop_pred, dop_true, log_sigma, variant: str = "2s",
                          eps: float = DEFAULT_EPS):
    """Analytic gradients of the per-pixel NLL w.r.t. dop_pred and s:

        d/d pred = 1 / (2 pred) + exp(-2 s) (pred - true)
        d/d s    = c - exp(-2 s) (pred - true)^2
    """
    coef = _log_coef(variant)
    pred = np.maximum(np.asarray(dop_pred, dtype=np.float64), eps)
    true = np.maximum(np.asarray(dop_true, dtype=np.float64), eps)
    s = np.asarray(log_sigma, dtype=np.float64)
    w = np.exp(-2.0 * s)
    g_pred = 0.5 / pred + w * (pred - true)
    g_s = coef - w * (pred - true) ** 2
    return g_pred, g_s


def fit_polarization_sigma(residuals, variant: str = "2s"):
    """Closed-form ML estimate of a shared sigma_p from dop residuals.

    For the "2s" objective the stationarity condition gives
    sigma_p = sqrt(sum r^2 / (2 N)); for "s" the textbook
    sqrt(sum r^2 / N).  Returns (sigma_p, degenerate) where degenerate
    marks an all-zero residual set floored at 1e-8.
    """
    coef = _log_coef(variant)
    r = np.asarray(residuals, dtype=np.float64).ravel()
    if r.size == 0:
        raise StructuralError("residual set is empty")
    if not np.all(np.isfinite(r)):
        raise DomainError("residuals must be finite")
    val = math.sqrt(float(np.sum(r * r)) / (coef * r.size))
    degenerate = val < SIGMA_P_FLOOR
    return max(val, SIGMA_P_FLOOR), degenerate


# ---------------------------------------------------------------------------
# Monte-Carlo validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloSummary:
    """Empirical dop distribution vs the Rice law for one parameter point."""

    params: dict
    mean: float
    std: float
    ks_rice: float | None
    ks_gauss: float | None
    hist_edges: tuple
    hist_counts: tuple
    exact: bool
    mode: str

    def to_dict(self) -> dict:
        return {
            "params": dict(self.params),
            "mean": self.mean,
            "std": self.std,
            "ks_rice": self.ks_rice,
            "ks_gauss": self.ks_gauss,
            "hist_edges": list(self.hist_edges),
            "hist_counts": list(self.hist_counts),
            "exact": self.exact,
            "mode": self.mode,
        }


def draw_dop_samples(s0: float, dop_true: float, aop_true: float, sigma: float,
                     n_samples: int, seed: int = 0) -> np.ndarray:
    """Direct-model dop draws: Gaussian noise on the four direction
    intensities, dop formed with the denominator fixed at the true s0."""
    s1_true = s0 * dop_true * np.cos(2.0 * aop_true)
    s2_true = s0 * dop_true * np.sin(2.0 * aop_true)
    clean = 0.5 * np.array([s0 + s1_true, s0 + s2_true,
                            s0 - s1_true, s0 - s2_true])
    rng = np.random.Generator(np.random.Philox(int(seed)))
    draws = clean[:, None] + sigma * rng.standard_normal((4, n_samples))
    s1 = draws[0] - draws[2]
    s2 = draws[1] - draws[3]
    return np.sqrt(s1 * s1 + s2 * s2) / s0


def _pipeline_samples(s0, dop_true, aop_true, sigma, n_samples, seed):
    # end-to-end realism: constant scene -> mosaic -> noise -> bilinear
    # demosaic -> per-pixel color-mean dop, interior-cropped
    from .cpfa import NoiseModel, add_noise, default_layout, mosaic
    from .demosaic import interpolate_initial, split_channels

    crop = 8
    side = 4 * int(np.ceil((np.sqrt(n_samples) + 2 * crop) / 4.0))
    ones = np.ones((side, side))
    cube = synthesize_from_stokes(s0 * ones, dop_true * ones, aop_true * ones)
    noisy = add_noise(mosaic(cube, default_layout()), NoiseModel(sigma, seed))
    recon = interpolate_initial(split_channels(noisy))
    dop = compute_stokes(recon).dop.mean(axis=0)
    return dop[crop:-crop, crop:-crop].ravel()[:n_samples]


def monte_carlo_dop(s0: float, dop_true: float, aop_true: float, sigma: float,
                    n_samples: int = 100_000, seed: int = 0,
                    mode: str = "direct") -> MonteCarloSummary:
    """Sample noisy dop measurements and compare them to the Rice law.

    In "direct" mode the four direction intensities receive i.i.d.
    Gaussian noise and dop is formed as sqrt(s1^2 + s2^2) / s0 with the
    denominator fixed at the true s0 — the same plug-in step the Rice
    derivation makes.  (Dividing by each draw's own noisy s0 widens the
    distribution by a dop-dependent factor and is exercised by the
    "pipeline" mode instead, which runs a full mosaic/demosaic cycle and
    carries no tight tolerance.)

    sigma = 0 collapses to an exact match: KS statistics are reported as
    None and `exact` is set.
    """
    if not (np.isfinite(s0) and s0 > 0):
        raise DomainError(f"s0 must be finite and > 0, got {s0}")
    if not (0.0 <= dop_true <= 1.0):
        raise DomainError(f"dop_true must be in [0, 1], got {dop_true}")
    if not (np.isfinite(sigma) and sigma >= 0):
        raise DomainError(f"sigma must be finite and >= 0, got {sigma}")
    if n_samples < 1:
        raise DomainError(f"n_samples must be >= 1, got {n_samples}")
    if mode not in ("direct", "pipeline"):
        raise ConfigError(f"mode must be 'direct' or 'pipeline', got {mode!r}")

    if mode == "direct":
        samples = draw_dop_samples(s0, dop_true, aop_true, sigma, n_samples, seed)
    else:
        samples = _pipeline_samples(s0, dop_true, aop_true, sigma, n_samples, seed)

    params = {"s0": float(s0), "dop_true": float(dop_true),
              "aop_true": float(aop_true), "sigma": float(sigma),
              "n_samples": int(n_samples), "seed": int(seed)}
    mean = float(np.mean(samples))
    std = float(np.std(samples))
    counts, edges = np.histogram(samples, bins=64)
    counts = tuple(int(c) for c in counts)
    edges = tuple(float(e) for e in edges)

    if sigma == 0:
        return MonteCarloSummary(params=params, mean=mean, std=std,
                                 ks_rice=None, ks_gauss=None,
                                 hist_edges=edges, hist_counts=counts,
                                 exact=True, mode=mode)

    rp = RiceParams(nu=dop_true, sigma=math.sqrt(2.0) * sigma / s0)
    ks_rice = float(kstest(samples, rice_cdf(rp)).statistic)
    if dop_true > 0:
        ks_gauss = float(kstest(samples, rice_gaussian_approx_cdf(rp)).statistic)
    else:
        ks_gauss = None   # approximation undefined at nu = 0
    return MonteCarloSummary(params=params, mean=mean, std=std,
                             ks_rice=ks_rice, ks_gauss=ks_gauss,
                             hist_edges=edges, hist_counts=counts,
                             exact=False, mode=mode)

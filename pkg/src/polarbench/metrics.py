"""Reconstruction quality metrics and the per-method report.

Conventions:

* psnr peaks: 1.0 for intensity planes, s0, and dop; 90 degrees for aop
  (half the 180-degree wrap period).  Zero MSE reports the 99 dB cap, and
  all psnr values are capped there so reports stay finite and sortable.
* aop metrics work in degrees with wraparound distance
  min(|d|, 180 - |d|).
* ssim: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, data
  range 1, population covariance, averaged over the valid interior.
* dop/aop are reduced to a single raster by an arithmetic mean over the
  three colors before any metric is computed.
"""

from dataclasses import dataclass, fields

import numpy as np
from scipy.signal import convolve2d

from .core import DEFAULT_EPS, PolarCube, compute_stokes
from .errors import DomainError, StructuralError

PSNR_CAP_DB = 99.0
AOP_PEAK_DEG = 90.0

_SSIM_WIN = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def _check_pair(a: np.ndarray, b: np.ndarray):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise StructuralError(f"metric inputs differ in shape: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at 99 dB."""
    if not (peak > 0):
        raise DomainError(f"peak must be positive, got {peak}")
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(peak * peak / mse))


def _aop_wrap_deg(a_deg: np.ndarray, b_deg: np.ndarray) -> np.ndarray:
    d = np.abs(a_deg - b_deg) % 180.0
    return np.minimum(d, 180.0 - d)


def psnr_aop(a_deg, b_deg) -> float:
    """PSNR over angles in degrees with 180-degree wraparound; peak 90."""
    a, b = _check_pair(a_deg, b_deg)
    d = _aop_wrap_deg(a, b)
    mse = float(np.mean(d * d))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(AOP_PEAK_DEG * AOP_PEAK_DEG / mse))


def mae_aop(a_deg, b_deg) -> float:
    """Mean absolute angular error in degrees with 180-degree wraparound."""
    a, b = _check_pair(a_deg, b_deg)
    return float(np.mean(_aop_wrap_deg(a, b)))


def _ssim_kernel() -> np.ndarray:
    half = (_SSIM_WIN - 1) // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * _SSIM_SIGMA**2))
    g /= g.sum()
    return np.outer(g, g)


_KERNEL = _ssim_kernel()


def ssim(a, b, data_range: float = 1.0) -> float:
    """Mean structural similarity of two 2-D rasters (valid interior)."""
    a, b = _check_pair(a, b)
    if a.ndim != 2:
        raise StructuralError(f"ssim expects 2-D rasters, got shape {a.shape}")
    if min(a.shape) < _SSIM_WIN:
        raise StructuralError(
            f"ssim needs sides >= {_SSIM_WIN}, got {a.shape}")
    c1 = (_SSIM_K1 * data_range) ** 2
    c2 = (_SSIM_K2 * data_range) ** 2
    k = _KERNEL
    mu1 = convolve2d(a, k, mode="valid")
    mu2 = convolve2d(b, k, mode="valid")
    v1 = convolve2d(a * a, k, mode="valid") - mu1 * mu1
    v2 = convolve2d(b * b, k, mode="valid") - mu2 * mu2
    cov = convolve2d(a * b, k, mode="valid") - mu1 * mu2
    num = (2.0 * mu1 * mu2 + c1) * (2.0 * cov + c2)
    den = (mu1 * mu1 + mu2 * mu2 + c1) * (v1 + v2 + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class MetricsReport:
    """Full metric set for one reconstruction against ground truth."""

    method: str
    scene: str
    psnr_mean: float
    psnr_s0: float
    psnr_dop: float
    mae_deg: float
    ssim_mean: float
    ssim_s0: float
    ssim_dop: float
    psnr_aop: float
    config_hash: str

    # column order of the CSV mirror; the four-column psnr/mae block first
    CSV_FIELDS = ("scene", "method", "psnr_mean", "psnr_s0", "psnr_dop",
                  "mae_deg", "ssim_mean", "ssim_s0", "ssim_dop", "psnr_aop",
                  "config_hash")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def csv_row(self) -> list:
        return [getattr(self, name) for name in self.CSV_FIELDS]


def full_report(recon: PolarCube, gt: PolarCube, method: str = "",
                scene: str = "", config_hash: str = "",
                eps: float = DEFAULT_EPS) -> MetricsReport:
    """Compute every metric of the report for one reconstruction.

    psnr_mean / ssim_mean average over the four per-angle RGB images;
    s0 metrics run on the per-color s0 stack; dop/aop metrics run on the
    color-averaged rasters (aop in degrees).
    """
    if recon.values.shape != gt.values.shape:
        raise StructuralError("recon and gt cubes differ in shape")
    st_r = compute_stokes(recon, eps)
    st_g = compute_stokes(gt, eps)

    psnr_mean = float(np.mean([psnr(recon.values[a], gt.values[a])
                               for a in range(4)]))
    ssim_mean = float(np.mean([ssim(recon.values[a, c], gt.values[a, c])
                               for a in range(4) for c in range(3)]))
    psnr_s0 = psnr(st_r.s0, st_g.s0)
    ssim_s0 = float(np.mean([ssim(st_r.s0[c], st_g.s0[c]) for c in range(3)]))

    dop_r = st_r.dop.mean(axis=0)
    dop_g = st_g.dop.mean(axis=0)
    aop_r = np.degrees(st_r.aop).mean(axis=0)
    aop_g = np.degrees(st_g.aop).mean(axis=0)

    return MetricsReport(
        method=method, scene=scene,
        psnr_mean=psnr_mean,
        psnr_s0=psnr_s0,
        psnr_dop=psnr(dop_r, dop_g),
        mae_deg=mae_aop(aop_r, aop_g),
        ssim_mean=ssim_mean,
        ssim_s0=ssim_s0,
        ssim_dop=ssim(dop_r, dop_g),
        psnr_aop=psnr_aop(aop_r, aop_g),
        config_hash=config_hash,
    )

"""Uncertainty-guided blending of two reconstruction branches.

The log-uncertainty map s is normalized per image to [0, 1] between its
1st and 99th percentiles; the normalized weight picks, per pixel, between
a detail-preserving branch (low uncertainty) and a noise-suppressing
branch (high uncertainty).  The blend is the closed-form minimizer of

    s_bar * |x - x_smooth|^2 + (1 - s_bar) * |x - x_base|^2.
"""

from dataclasses import dataclass

import numpy as np

from .core import PolarCube, _as_readonly
from .errors import ConfigError, StructuralError


@dataclass(frozen=True)
class FusionWeights:
    """Per-pixel blend weight in [0, 1], plus the percentile anchors that
    produced it.  `degenerate` marks a flat map normalized to 0.5."""

    s_bar: np.ndarray
    lo: float
    hi: float
    degenerate: bool

    def __post_init__(self):
        sb = np.asarray(self.s_bar, dtype=np.float64)
        if sb.ndim != 2:
            raise StructuralError(f"s_bar must be 2-D, got shape {sb.shape}")
        if np.any(sb < 0) or np.any(sb > 1) or not np.all(np.isfinite(sb)):
            raise StructuralError("s_bar must lie in [0, 1]")
        object.__setattr__(self, "s_bar", _as_readonly(sb))


def normalize_log_uncertainty(log_sigma, lo_pct: float = 1.0,
                              hi_pct: float = 99.0) -> FusionWeights:
    """Robust min-max normalization of a log-uncertainty map.

    Anchors are the lo_pct/hi_pct percentiles; values are affinely mapped
    and clipped to [0, 1].  Equal anchors (a constant map) normalize to
    0.5 everywhere and set the degenerate flag.
    """
    if not (0.0 <= lo_pct < hi_pct <= 100.0):
        raise ConfigError(
            f"percentiles must satisfy 0 <= lo < hi <= 100, got ({lo_pct}, {hi_pct})")
    s = np.asarray(log_sigma, dtype=np.float64)
    if s.ndim != 2:
        raise StructuralError(f"log_sigma must be 2-D, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise StructuralError("log_sigma must be finite")
    lo, hi = np.percentile(s, [lo_pct, hi_pct])
    if hi <= lo:
        return FusionWeights(s_bar=np.full(s.shape, 0.5), lo=float(lo),
                             hi=float(hi), degenerate=True)
    s_bar = np.clip((s - lo) / (hi - lo), 0.0, 1.0)
    return FusionWeights(s_bar=s_bar, lo=float(lo), hi=float(hi), degenerate=False)


def _check_shapes(a: PolarCube, b: PolarCube, weights: FusionWeights):
    if a.values.shape != b.values.shape:
        raise StructuralError("branch cubes differ in shape")
    if weights.s_bar.shape != a.values.shape[2:]:
        raise StructuralError(
            f"weights shape {weights.s_bar.shape} does not match cube planes "
            f"{a.values.shape[2:]}")


def fuse(smooth: PolarCube, base: PolarCube, weights: FusionWeights) -> PolarCube:
    """Per-pixel convex blend: s_bar * smooth + (1 - s_bar) * base,
    shared across all 12 planes.  s_bar = 0 returns base bit-for-bit and
    s_bar = 1 returns smooth bit-for-bit."""
    _check_shapes(smooth, base, weights)
    w = weights.s_bar[None, None]
    return PolarCube(w * smooth.values + (1.0 - w) * base.values)


def fusion_loss(fused: PolarCube, smooth: PolarCube, base: PolarCube,
                weights: FusionWeights) -> float:
    """Mean over all entries of the weighted two-sided squared error that
    `fuse` minimizes pointwise."""
    _check_shapes(smooth, base, weights)
    if fused.values.shape != base.values.shape:
        raise StructuralError("fused cube differs in shape")
    w = weights.s_bar[None, None]
    d_smooth = fused.values - smooth.values
    d_base = fused.values - base.values
    return float(np.mean(w * d_smooth * d_smooth + (1.0 - w) * d_base * d_base))

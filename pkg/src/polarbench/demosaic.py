"""Classical demosaicking branches for the 4x4 color-polarization mosaic.

Three reconstructions, in increasing order of smoothing:

* ``interpolate_initial`` -- per-plane bilinear interpolation on each
  plane's own sampling lattice.  Exact at sampled positions and exact on
  affine ramps away from the border.
* ``reconstruct_base`` -- initial interpolation plus a detail correction
  for R/B planes, transferred from the same-angle green plane (the
  densest lattice).  Sharper; still exact at sampled positions.
* ``reconstruct_smooth`` -- base reconstruction with Gaussian smoothing
  applied to the s1/s2 Stokes components only.  Trades edge fidelity for
  polarization noise suppression.

All boundary handling is mirror reflection.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import PolarCube, _as_readonly
from .cpfa import TILE, CpfaMosaic
from .errors import DomainError, StructuralError

_GREEN = 1

# 1-D tents: half-width 4 (period-4 lattices) and half-width 2.
_TENT4 = np.array([1, 2, 3, 4, 3, 2, 1], dtype=np.float64) / 4.0
_TENT2 = np.array([1, 2, 1], dtype=np.float64) / 2.0

# Single-phase lattice (R/B planes): separable bilinear.
_KERN_SINGLE = np.outer(_TENT4, _TENT4)

# Two phases offset by (2, 2) mod 4 (the default layout's green planes):
# bilinear on the 45-degree-rotated rectangular lattice.  Partitions unity
# on the union lattice and reproduces affine ramps.
_D = np.arange(-3, 4, dtype=np.float64)
_D1, _D2 = np.meshgrid(_D, _D, indexing="ij")
_KERN_QUINCUNX = (np.maximum(0.0, 1.0 - np.abs(_D1 + _D2) / 4.0)
                  * np.maximum(0.0, 1.0 - np.abs(_D1 - _D2) / 4.0))

# Two phases offset along one axis: anisotropic separable bilinear.
_KERN_ROWS2 = np.outer(_TENT2, _TENT4)   # offset (2, 0): period 2 in rows
_KERN_COLS2 = np.outer(_TENT4, _TENT2)   # offset (0, 2): period 2 in cols


@dataclass(frozen=True)
class SparsePlanes:
    """Mosaic samples routed to their 12 planes: zeros off-lattice plus a
    boolean sampling mask per plane.  Masks partition the sensor grid."""

    values: np.ndarray   # (4, 3, H, W) float64
    mask: np.ndarray     # (4, 3, H, W) bool

    def __post_init__(self):
        v = np.asarray(self.values)
        m = np.asarray(self.mask)
        if v.ndim != 4 or v.shape[:2] != (4, 3) or v.shape != m.shape:
            raise StructuralError(
                f"sparse planes need matching (4, 3, H, W) arrays, got {v.shape} / {m.shape}")
        object.__setattr__(self, "values", _as_readonly(v))
        mm = m.astype(bool).copy()
        mm.setflags(write=False)
        object.__setattr__(self, "mask", mm)


def split_channels(m: CpfaMosaic) -> SparsePlanes:
    """Route each mosaic pixel to its (angle, color) plane."""
    h, w = m.height, m.width
    values = np.zeros((4, 3, h, w), dtype=np.float64)
    mask = np.zeros((4, 3, h, w), dtype=bool)
    lay = m.layout
    for i in range(TILE):
        for j in range(TILE):
            a = lay.angle_idx[i, j]
            c = lay.color_idx[i, j]
            values[a, c, i::TILE, j::TILE] = m.values[i::TILE, j::TILE]
            mask[a, c, i::TILE, j::TILE] = True
    return SparsePlanes(values=values, mask=mask)


def _kernel_for_phases(phases) -> np.ndarray:
    if len(phases) == 1:
        return _KERN_SINGLE
    if len(phases) == 2:
        (i0, j0), (i1, j1) = phases
        di, dj = (i1 - i0) % TILE, (j1 - j0) % TILE
        if di in (0, 2) and dj in (0, 2):
            if di == 2 and dj == 2:
                return _KERN_QUINCUNX
            if di == 2 and dj == 0:
                return _KERN_ROWS2
            if di == 0 and dj == 2:
                return _KERN_COLS2
    # Irregular custom layouts: normalized tent fall-back.  Not
    # interpolating between samples in the bilinear sense, but smooth,
    # constant-preserving, and samples are re-imposed by the caller.
    return _KERN_SINGLE


def _interpolate_plane(values: np.ndarray, mask: np.ndarray,
                       kernel: np.ndarray) -> np.ndarray:
    """Mask-normalized convolution with mirror boundary, then exact
    re-imposition of the samples.

    The rotated-tent kernel has a zero set that can exactly hit a corner
    pixel of a two-phase plane (every in-image sample at rotated distance
    4, mirrored samples landing on the dual lattice).  Those rare pixels
    fall back to the radius-3 tent, which covers every pixel of any mask
    with at least one sample per tile.
    """
    fm = mask.astype(np.float64)
    num = ndimage.convolve(values, kernel, mode="mirror")
    den = ndimage.convolve(fm, kernel, mode="mirror")
    bad = den <= 1e-12
    out = np.divide(num, den, out=np.zeros_like(num), where=~bad)
    if bad.any():
        num2 = ndimage.convolve(values, _KERN_SINGLE, mode="mirror")
        den2 = ndimage.convolve(fm, _KERN_SINGLE, mode="mirror")
        out[bad] = num2[bad] / den2[bad]
    out[mask] = values[mask]
    return out


def interpolate_initial(planes: SparsePlanes, layout=None) -> PolarCube:
    """Bilinear interpolation of every plane on its own lattice.

    R/B planes live on a single-phase period-4 lattice; green planes on
    the union of their two phases.  Output passes exactly through the
    samples, preserves constants, and reproduces affine ramps at least
    4 px from the border.

    layout is optional; when omitted the phase geometry is read off the
    masks (which are tile-periodic by construction).
    """
    h, w = planes.values.shape[2:]
    out = np.empty((4, 3, h, w), dtype=np.float64)
    for a in range(4):
        for c in range(3):
            mask = planes.mask[a, c]
            tile = mask[:TILE, :TILE]
            phases = [(i, j) for i in range(TILE) for j in range(TILE) if tile[i, j]]
            if not phases:
                raise StructuralError(f"plane ({a}, {c}) has no samples")
            kernel = _kernel_for_phases(phases)
            out[a, c] = _interpolate_plane(planes.values[a, c], mask, kernel)
    return PolarCube(out)


def _green_detail(g_full: np.ndarray, phase) -> np.ndarray:
    """Detail a single-phase period-4 lattice cannot represent, measured
    on the full-resolution green plane: g - bilinear(subsample(g))."""
    pi, pj = phase
    mask = np.zeros(g_full.shape, dtype=bool)
    mask[pi::TILE, pj::TILE] = True
    sparse = np.where(mask, g_full, 0.0)
    sim = _interpolate_plane(sparse, mask, _KERN_SINGLE)
    return g_full - sim


def reconstruct_base(m: CpfaMosaic, lambda_b: float = 0.5) -> PolarCube:
    """Initial interpolation plus green-guided detail on the R/B planes.

    For each angle, the green plane (two samples per tile) retains detail
    that the single-phase R/B lattices lose.  The correction for an R or B
    plane is the green detail measured at that plane's own lattice phase,
    scaled by lambda_b and added.  Samples are re-imposed exactly, and
    lambda_b = 0 returns the initial interpolation bit-for-bit.
    """
    if not np.isfinite(lambda_b):
        raise DomainError(f"lambda_b must be finite, got {lambda_b}")
    planes = split_channels(m)
    initial = interpolate_initial(planes)
    if lambda_b == 0:
        return initial
    out = initial.values.copy()
    for a in range(4):
        g_full = initial.values[a, _GREEN]
        for c in (0, 2):
            phases = m.layout.phases(a, c)
            if len(phases) != 1:
                continue  # correction defined for single-phase planes only
            out[a, c] = out[a, c] + lambda_b * _green_detail(g_full, phases[0])
    out[planes.mask] = planes.values[planes.mask]
    return PolarCube(out)


def reconstruct_smooth(m: CpfaMosaic, lambda_b: float = 0.5,
                       sigma_r: float = 1.5) -> PolarCube:
    """Base reconstruction with Gaussian smoothing of s1/s2 only.

    The smoothing delta is applied in the Stokes domain and folded back
    onto the planes, so s0 and the four-plane consistency residual are
    untouched: the output's Stokes decomposition has exactly
    gaussian(s1), gaussian(s2), and the base reconstruction's s0.
    sigma_r = 0 returns the base reconstruction unchanged.
    """
    if not np.isfinite(sigma_r) or sigma_r < 0:
        raise DomainError(f"sigma_r must be finite and >= 0, got {sigma_r}")
    base = reconstruct_base(m, lambda_b)
    if sigma_r == 0:
        return base
    x = base.values
    s1 = x[0] - x[2]
    s2 = x[1] - x[3]
    spatial = (0, sigma_r, sigma_r)  # smooth H and W, never across colors
    d1 = ndimage.gaussian_filter(s1, spatial, mode="mirror") - s1
    d2 = ndimage.gaussian_filter(s2, spatial, mode="mirror") - s2
    out = x.copy()
    out[0] += 0.5 * d1
    out[2] -= 0.5 * d1
    out[1] += 0.5 * d2
    out[3] -= 0.5 * d2
    return PolarCube(out)

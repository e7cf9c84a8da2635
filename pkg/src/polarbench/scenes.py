"""Scene sources: procedural ground-truth generators and directory ingest.

Every generator is deterministic (fixed internal seeds, or a seed
parameter) and returns a PolarCube whose planes lie strictly in [0, 1].
The shipped benchmark suite mixes smooth and structured polarization
fields with flat, textured, and high-contrast intensity so the
reconstruction branches have genuinely different strengths.

Directory scenes hold four subdirectories 000/045/090/135, each with
either R/G/B grayscale PNGs or one 3-channel PNG.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import PolarCube, synthesize_from_stokes
from .errors import DomainError, IngestError
from .pngio import read_image01

_ANGLE_DIRS = ("000", "045", "090", "135")


@dataclass(frozen=True)
class SceneDescriptor:
    """Named scene: a registered generator with parameters, or a directory."""

    scene_id: str
    generator: str = ""
    params: dict = field(default_factory=dict)
    height: int = 128
    width: int = 128
    source_dir: str = ""


def _grid(h, w):
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return yy, xx


def _smooth_field(h, w, seed, blur, lo, hi):
    """Band-limited random field mapped to [lo, hi]."""
    rng = np.random.Generator(np.random.Philox(int(seed)))
    f = ndimage.gaussian_filter(rng.standard_normal((h, w)), blur, mode="mirror")
    fmin, fmax = f.min(), f.max()
    if fmax == fmin:
        return np.full((h, w), 0.5 * (lo + hi))
    return lo + (hi - lo) * (f - fmin) / (fmax - fmin)


def _aop_ramp_rad(h, w, axis):
    """(-90, 90] degree ramp along one axis, returned in radians."""
    n = h if axis == 0 else w
    ramp = -90.0 + 180.0 * (np.arange(n, dtype=np.float64) + 1.0) / n
    deg = ramp[:, None] * np.ones((1, w)) if axis == 0 else np.ones((h, 1)) * ramp[None, :]
    return np.radians(deg)


def _check_unit(cube: PolarCube, name: str) -> PolarCube:
    if cube.values.min() < 0.0 or cube.values.max() > 1.0:
        raise DomainError(f"generator {name!r} produced values outside [0, 1]")
    return cube


# ---------------------------------------------------------------------------
# generators: each returns (s0, dop, aop_rad) rasters
#
# Most structured scenes pair a bright zone carrying mid-frequency
# polarization detail (where smoothing costs real signal) with a dark
# zone whose polarization is noise-dominated (where smoothing pays),
# giving the two reconstruction branches genuinely different strengths.
# ---------------------------------------------------------------------------

def _dark_mix(h, w, frac, taper=6.0):
    """Vertical bright->dark transition: 1 in the top (1-frac) band,
    0 in the bottom dark band, linear over `taper` rows."""
    yy, _ = _grid(h, w)
    y0 = (1.0 - frac) * (h - 1)
    return np.clip((y0 - yy) / taper + 1.0, 0.0, 1.0)


def _zoned(bright_s0, bright_dop, aop_dev_rad, mix,
           s0_lo=0.15, dop_lo=0.12, aop_base_rad=0.0):
    """Blend bright-zone fields against a dark low-dop floor; the aop
    deviation fades to the base angle inside the dark zone."""
    s0 = s0_lo + (bright_s0 - s0_lo) * mix
    dop = dop_lo + (bright_dop - dop_lo) * mix
    aop = aop_base_rad + aop_dev_rad * mix
    return s0, dop, aop


def _gen_malus_ramp(h, w, params):
    # dop sweeps 0 -> 1 left to right, aop sweeps the full half-circle top
    # to bottom, s0 flat at 0.8
    yy, xx = _grid(h, w)
    dop = xx / (w - 1.0)
    aop = _aop_ramp_rad(h, w, axis=0)
    s0 = np.full((h, w), 0.8)
    return s0, dop, aop


def _gen_aop_waves(h, w, params):
    # bright field of smoothly rotating polarization angle over a dark
    # noise-dominated band
    period = params.get("period", 24.0)
    amp = np.radians(params.get("amp_deg", 40.0))
    yy, xx = _grid(h, w)
    dev = amp * np.sin(2.0 * np.pi * xx / period) * np.cos(
        2.0 * np.pi * yy / (1.7 * period))
    mix = _dark_mix(h, w, params.get("dark_frac", 0.32))
    return _zoned(0.85, params.get("dop", 0.55), dev, mix,
                  aop_base_rad=np.radians(params.get("aop_deg", 0.0)))


def _gen_aop_rings(h, w, params):
    # concentric angle oscillations inside a bright disc, dark corners
    period = params.get("period", 26.0)
    amp = np.radians(params.get("amp_deg", 32.0))
    yy, xx = _grid(h, w)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    r = np.hypot(yy - cy, xx - cx)
    dev = amp * np.sin(2.0 * np.pi * r / period)
    edge = 0.46 * min(h, w)
    mix = np.clip((edge - r) / 6.0 + 1.0, 0.0, 1.0)
    return _zoned(0.85, params.get("dop", 0.55), dev, mix,
                  aop_base_rad=np.radians(20.0))


def _gen_texture(h, w, params):
    # constant-dop scene: band-limited intensity texture under a gently
    # waving polarization angle
    seed = params.get("seed", 101)
    blur = params.get("blur", 6.0)
    yy, xx = _grid(h, w)
    s0 = _smooth_field(h, w, seed, blur, 0.3, 0.9)
    dop = np.full((h, w), params.get("dop", 0.5))
    amp = np.radians(params.get("amp_deg", 30.0))
    period = params.get("period", 20.0)
    aop = np.radians(25.0) + amp * np.sin(2.0 * np.pi * xx / period) * np.cos(
        2.0 * np.pi * yy / (1.6 * period))
    return s0, dop, aop


def _gen_dop_blobs(h, w, params):
    yy, xx = _grid(h, w)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    r2 = ((yy - cy) / h) ** 2 + ((xx - cx) / w) ** 2
    s0 = 0.9 - 0.72 * np.clip(r2 * 4.0, 0.0, 1.0)         # dark vignette
    dop = np.zeros((h, w))
    for (fy, fx, rho, amp) in ((0.3, 0.3, 0.12, 0.7), (0.7, 0.6, 0.18, 0.5),
                               (0.45, 0.8, 0.09, 0.8)):
        d2 = ((yy / h - fy) ** 2 + (xx / w - fx) ** 2) / rho**2
        dop += amp * np.exp(-0.5 * d2)
    dop = np.clip(dop, 0.0, 0.95)
    aop = 0.5 * np.arctan2(yy - cy, xx - cx)               # radial sweep
    return s0, dop, np.where(aop <= -0.5 * np.pi, aop + np.pi, aop)


def _gen_edge_chart(h, w, params):
    # sharp intensity bars over constant polarization, dark band below
    yy, xx = _grid(h, w)
    bars = ((xx // 8) % 2).astype(np.float64)
    s0 = 0.3 + 0.55 * bars
    dop = np.full((h, w), params.get("dop", 0.92))
    dev = np.full((h, w), 0.0)
    mix = _dark_mix(h, w, params.get("dark_frac", 0.25))
    return _zoned(s0, dop, dev, mix,
                  aop_base_rad=np.radians(params.get("aop_deg", 15.0)))


def _gen_text_chart(h, w, params):
    # glyph-like random blocks: dense high-frequency intensity structure
    seed = params.get("seed", 202)
    rng = np.random.Generator(np.random.Philox(int(seed)))
    cells = rng.random((h // 8 + 1, w // 8 + 1)) > 0.55
    block = np.kron(cells, np.ones((8, 8), dtype=bool))[:h, :w]
    s0 = np.where(block, 0.85, 0.3)
    dop = np.full((h, w), 0.5)
    dev = np.full((h, w), 0.0)
    mix = _dark_mix(h, w, params.get("dark_frac", 0.25))
    return _zoned(s0, dop, dev, mix, aop_base_rad=np.radians(-20.0))


def _gen_radial_vortex(h, w, params):
    yy, xx = _grid(h, w)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    r = np.hypot(yy - cy, xx - cx)
    r = r / r.max()
    s0 = 0.3 + 0.6 * r
    dop = 0.1 + 0.6 * (1.0 - r)
    aop = 0.5 * np.arctan2(yy - cy, xx - cx)
    return s0, dop, np.where(aop <= -0.5 * np.pi, aop + np.pi, aop)


def _gen_sine_stripes(h, w, params):
    # strong dop carrier wave: smoothing attenuates the dop signal itself
    yy, xx = _grid(h, w)
    s0 = np.full((h, w), 0.8)
    dop = 0.5 + 0.25 * np.sin(2.0 * np.pi * xx / params.get("period", 14.0))
    aop = np.radians(40.0) * (2.0 * yy / (h - 1.0) - 1.0)
    return s0, dop, aop


def _gen_dop_checker(h, w, params):
    # soft-edged dop checkerboard on flat intensity, dark band below
    yy, xx = _grid(h, w)
    cells = (((yy // 16) + (xx // 16)) % 2).astype(np.float64)
    soft = ndimage.gaussian_filter(cells, 2.0, mode="mirror")
    bright_dop = 0.35 + 0.3 * soft
    dev = np.full((h, w), 0.0)
    mix = _dark_mix(h, w, params.get("dark_frac", 0.25))
    return _zoned(0.8, bright_dop, dev, mix,
                  aop_base_rad=_aop_ramp_rad(h, w, axis=0) * 0.4)


def _gen_gradient_dark(h, w, params):
    # exercises the full brightness range; angle waves only where bright
    yy, xx = _grid(h, w)
    s0 = 0.12 + 0.83 * xx / (w - 1.0)
    dop = np.full((h, w), 0.35)
    gate = np.clip((s0 - 0.45) / 0.2, 0.0, 1.0)
    aop = np.radians(20.0) + np.radians(35.0) * gate * np.sin(
        2.0 * np.pi * xx / 22.0) * np.cos(2.0 * np.pi * yy / 30.0)
    return s0, dop, aop


def _gen_two_zone(h, w, params):
    # bright textured-polarization left half, dark smooth right half
    yy, xx = _grid(h, w)
    split = 0.55 * (w - 1)
    mix = np.clip((split - xx) / 8.0 + 1.0, 0.0, 1.0)
    amp = np.radians(45.0)
    dev = amp * np.sin(2.0 * np.pi * xx / 18.0) * np.cos(2.0 * np.pi * yy / 30.0)
    return _zoned(0.85, 0.6, dev, mix, aop_base_rad=np.radians(10.0))


def _gen_mixed_freq(h, w, params):
    s0 = _smooth_field(h, w, params.get("seed", 404), 2.5, 0.3, 0.9)
    dop = _smooth_field(h, w, params.get("seed", 404) + 1, 12.0, 0.1, 0.7)
    aop_deg = _smooth_field(h, w, params.get("seed", 404) + 2, 14.0, -80.0, 80.0)
    return s0, dop, np.radians(aop_deg)


def _gen_constant(h, w, params):
    s0 = np.full((h, w), params.get("s0", 0.8))
    dop = np.full((h, w), params.get("dop", 0.0))
    aop = np.full((h, w), np.radians(params.get("aop_deg", 0.0)))
    return s0, dop, aop


GENERATORS = {
    "malus-ramp": _gen_malus_ramp,
    "aop-waves": _gen_aop_waves,
    "aop-rings": _gen_aop_rings,
    "texture": _gen_texture,
    "dop-blobs": _gen_dop_blobs,
    "edge-chart": _gen_edge_chart,
    "text-chart": _gen_text_chart,
    "radial-vortex": _gen_radial_vortex,
    "sine-stripes": _gen_sine_stripes,
    "dop-checker": _gen_dop_checker,
    "gradient-dark": _gen_gradient_dark,
    "two-zone": _gen_two_zone,
    "mixed-freq": _gen_mixed_freq,
    "constant": _gen_constant,
}


def generate_scene(desc: SceneDescriptor) -> PolarCube:
    """Instantiate a procedural scene (identical across colors, so the
    per-color Stokes description matches the generator fields exactly)."""
    if desc.generator not in GENERATORS:
        raise IngestError(f"unknown scene generator {desc.generator!r}")
    if desc.height % 4 or desc.width % 4:
        raise DomainError("scene dimensions must be multiples of 4")
    s0, dop, aop = GENERATORS[desc.generator](desc.height, desc.width, desc.params)
    cube = synthesize_from_stokes(s0, dop, aop)
    return _check_unit(cube, desc.generator)


def benchmark_suite() -> list:
    """The shipped 12-scene noisy benchmark."""
    mk = SceneDescriptor
    return [
        mk("malus-ramp", "malus-ramp"),
        mk("aop-waves-fine", "aop-waves", {"period": 16.0}),
        mk("aop-waves", "aop-waves", {"period": 24.0}),
        mk("aop-rings", "aop-rings"),
        mk("texture-flat-dop", "texture", {"seed": 101}),
        mk("edge-chart", "edge-chart"),
        mk("text-chart", "text-chart", {"seed": 202}),
        mk("dop-blobs", "dop-blobs"),
        mk("gradient-dark", "gradient-dark"),
        mk("two-zone", "two-zone"),
        mk("dop-checker", "dop-checker"),
        mk("sine-stripes", "sine-stripes"),
    ]


def load_scene(scene: str, height: int = 128, width: int = 128) -> tuple:
    """Resolve a scene argument (generator id or directory path) into
    (scene_id, PolarCube)."""
    p = Path(scene)
    if p.is_dir():
        return p.name, ingest_scene(p)
    if scene in GENERATORS:
        desc = SceneDescriptor(scene, scene, {}, height, width)
        return scene, generate_scene(desc)
    raise IngestError(
        f"scene {scene!r} is neither a directory nor a known generator "
        f"(choices: {sorted(GENERATORS)})")


def ingest_scene(root) -> PolarCube:
    """Read a captured scene from `root`/000|045|090|135/[R|G|B].png.

    Each angle directory holds either three grayscale PNGs named
    R/G/B (any case, .png) or a single 3-channel PNG.  All planes must
    agree in size, with sides divisible by 4.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestError(f"scene directory not found: {root}")
    planes = np.zeros(0)
    shape = None
    stack = []
    for adir in _ANGLE_DIRS:
        sub = root / adir
        if not sub.is_dir():
            raise IngestError(f"missing angle directory {adir!r} in {root}")
        rgb = _read_angle_dir(sub)
        if shape is None:
            shape = rgb.shape[1:]
            if shape[0] % 4 or shape[1] % 4:
                raise IngestError(
                    f"scene dimensions must be multiples of 4, got {shape}")
        elif rgb.shape[1:] != shape:
            raise IngestError(
                f"angle {adir!r} size {rgb.shape[1:]} differs from {shape}")
        stack.append(rgb)
    planes = np.stack(stack)          # (4, 3, H, W)
    return PolarCube(planes)


def _read_angle_dir(sub: Path) -> np.ndarray:
    named = {}
    for f in sorted(sub.iterdir()):
        if f.suffix.lower() != ".png":
            continue
        stem = f.stem.upper()
        if stem in ("R", "G", "B"):
            named[stem] = f
    if len(named) == 3:
        arrs = [read_image01(named[c]) for c in ("R", "G", "B")]
        shapes = [a.shape for a in arrs]
        if any(a.ndim != 2 for a in arrs) or len(set(shapes)) != 1:
            raise IngestError(
                f"{sub} needs three equally sized grayscale planes, got {shapes}")
        return np.stack(arrs)
    pngs = sorted(f for f in sub.iterdir() if f.suffix.lower() == ".png")
    if len(pngs) == 1:
        arr = read_image01(pngs[0])
        if arr.ndim == 3 and arr.shape[2] == 3:
            return np.moveaxis(arr, 2, 0)
        raise IngestError(f"{pngs[0]} is not a 3-channel image")
    raise IngestError(
        f"{sub} must contain R/G/B grayscale PNGs or one 3-channel PNG")

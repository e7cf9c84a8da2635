"""Color-polarization filter array: sensor layout, mosaicking, noise.

The sensor samples one (color, angle) pair per pixel following a 4x4
superpixel tile: four 2x2 color blocks in RGGB order, and inside every
color block the four polarizer angles arranged

    90  45
    135  0

so each superpixel observes every color at every angle, with green twice.
"""

import json
import re
from dataclasses import dataclass

import numpy as np

from .core import ANGLES_DEG, COLORS, PolarCube, _as_readonly
from .errors import DomainError, StructuralError

TILE = 4

_CODE_RE = re.compile(r"^([RGB])(0|45|90|135)$")

# exact once per angle for R and B, twice for G: 16 cells total
_EXPECTED_PAIR_COUNTS = {"R": 1, "G": 2, "B": 1}


@dataclass(frozen=True)
class CpfaLayout:
    """4x4 tile assigning a color index (0=R, 1=G, 2=B) and an angle index
    (into 0/45/90/135 degrees) to every sensor cell."""

    color_idx: np.ndarray
    angle_idx: np.ndarray

    def __post_init__(self):
        ci = np.asarray(self.color_idx, dtype=np.int64)
        ai = np.asarray(self.angle_idx, dtype=np.int64)
        if ci.shape != (TILE, TILE) or ai.shape != (TILE, TILE):
            raise StructuralError("layout index grids must both be 4x4")
        if ci.min() < 0 or ci.max() > 2 or ai.min() < 0 or ai.max() > 3:
            raise StructuralError("layout indices out of range")
        counts = np.zeros((3, 4), dtype=np.int64)
        for i in range(TILE):
            for j in range(TILE):
                counts[ci[i, j], ai[i, j]] += 1
        for c, letter in enumerate(COLORS):
            want = _EXPECTED_PAIR_COUNTS[letter]
            for a in range(4):
                if counts[c, a] != want:
                    raise StructuralError(
                        f"layout must contain ({letter}, {ANGLES_DEG[a]}deg) "
                        f"exactly {want}x, found {counts[c, a]}")
        for name, arr in (("color_idx", ci), ("angle_idx", ai)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def to_codes(self) -> list:
        """4x4 nested list of cell codes like 'R90' or 'G45'."""
        return [[f"{COLORS[self.color_idx[i, j]]}{ANGLES_DEG[self.angle_idx[i, j]]}"
                 for j in range(TILE)] for i in range(TILE)]

    @staticmethod
    def from_codes(codes) -> "CpfaLayout":
        if not (isinstance(codes, (list, tuple)) and len(codes) == TILE
                and all(isinstance(r, (list, tuple)) and len(r) == TILE for r in codes)):
            raise StructuralError("layout codes must be a 4x4 array")
        ci = np.zeros((TILE, TILE), dtype=np.int64)
        ai = np.zeros((TILE, TILE), dtype=np.int64)
        for i in range(TILE):
            for j in range(TILE):
                m = _CODE_RE.match(str(codes[i][j]))
                if m is None:
                    raise StructuralError(
                        f"invalid layout code {codes[i][j]!r} at cell ({i}, {j})")
                ci[i, j] = COLORS.index(m.group(1))
                ai[i, j] = ANGLES_DEG.index(int(m.group(2)))
        return CpfaLayout(color_idx=ci, angle_idx=ai)

    def to_json(self) -> str:
        return json.dumps(self.to_codes(), indent=1)

    @staticmethod
    def from_json(text: str) -> "CpfaLayout":
        try:
            codes = json.loads(text)
        except json.JSONDecodeError as exc:
            raise StructuralError(f"layout file is not valid JSON: {exc}") from exc
        return CpfaLayout.from_codes(codes)

    def phases(self, angle_i: int, color_i: int) -> list:
        """Tile positions (i, j) observing this (angle, color) plane."""
        return [(i, j) for i in range(TILE) for j in range(TILE)
                if self.angle_idx[i, j] == angle_i and self.color_idx[i, j] == color_i]


def default_layout() -> CpfaLayout:
    return CpfaLayout.from_codes([
        ["R90", "R45", "G90", "G45"],
        ["R135", "R0", "G135", "G0"],
        ["G90", "G45", "B90", "B45"],
        ["G135", "G0", "B135", "B0"],
    ])


@dataclass(frozen=True)
class CpfaMosaic:
    """Single-channel sensor readout plus the layout that produced it.
    Height and width must be multiples of the 4x4 tile."""

    values: np.ndarray
    layout: CpfaLayout

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise StructuralError(f"mosaic must be 2-D, got shape {v.shape}")
        if v.shape[0] % TILE or v.shape[1] % TILE or v.shape[0] == 0 or v.shape[1] == 0:
            raise StructuralError(
                f"mosaic dimensions must be positive multiples of {TILE}, got {v.shape}")
        v = _as_readonly(v)
        if not np.all(np.isfinite(v)):
            raise DomainError("mosaic contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class NoiseModel:
    """Additive i.i.d. Gaussian sensor noise: std `sigma`, RNG key `seed`.

    The generator is counter-based (Philox) so the noise field for a given
    (seed, shape) is reproducible and independent of evaluation order.
    """

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise DomainError(f"sigma must be finite and >= 0, got {self.sigma}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise DomainError(f"seed must be a non-negative integer, got {self.seed}")


def mosaic(cube: PolarCube, layout: CpfaLayout) -> CpfaMosaic:
    """Sample one plane per pixel according to the layout tile."""
    h, w = cube.height, cube.width
    if h % TILE or w % TILE:
        raise StructuralError(
            f"cube dimensions must be multiples of {TILE} to mosaic, got {(h, w)}")
    out = np.zeros((h, w), dtype=np.float64)
    for i in range(TILE):
        for j in range(TILE):
            a = layout.angle_idx[i, j]
            c = layout.color_idx[i, j]
            out[i::TILE, j::TILE] = cube.values[a, c, i::TILE, j::TILE]
    return CpfaMosaic(values=out, layout=layout)


def add_noise(m: CpfaMosaic, model: NoiseModel) -> CpfaMosaic:
    """Additive Gaussian noise on the raw mosaic.  Values are NOT clipped:
    the statistical model downstream assumes symmetric noise, and clipping
    would bias dark pixels.  sigma = 0 returns the input bit-for-bit."""
    if model.sigma == 0:
        return CpfaMosaic(values=m.values, layout=m.layout)
    rng = np.random.Generator(np.random.Philox(int(model.seed)))
    noisy = m.values + model.sigma * rng.standard_normal(m.values.shape)
    return CpfaMosaic(values=noisy, layout=m.layout)

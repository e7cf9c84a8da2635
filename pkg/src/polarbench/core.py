"""Containers and Stokes math for 4-angle, 3-color polarization stacks.

A full observation is a stack of 12 planes: four linear-polarizer angles
(0, 45, 90, 135 degrees) times three color channels (R, G, B).  Per pixel
and per color the linear Stokes description is

    s0 = 0.5 * (x0 + x45 + x90 + x135)
    s1 = x0 - x90
    s2 = x45 - x135

with degree of linear polarization  dop = sqrt(s1^2 + s2^2) / s0  and
angle of linear polarization  aop = 0.5 * atan2(s2, s1), kept in
(-pi/2, pi/2].  The inverse map is x(theta) = 0.5 * (s0 + s1*cos(2*theta)
+ s2*sin(2*theta)).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, StructuralError

ANGLES_DEG = (0, 45, 90, 135)
COLORS = ("R", "G", "B")

ANGLE_INDEX = {a: i for i, a in enumerate(ANGLES_DEG)}
COLOR_INDEX = {c: i for i, c in enumerate(COLORS)}

DEFAULT_EPS = 1e-6


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PolarCube:
    """Dense 12-plane stack, shape (4, 3, H, W): axis 0 is the polarizer
    angle in the order 0/45/90/135 degrees, axis 1 is color R/G/B.

    Values are float64 and must be finite.  The wrapped array is a
    read-only copy so cubes can be shared across workers safely.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 4 or v.shape[:2] != (4, 3):
            raise StructuralError(f"cube must have shape (4, 3, H, W), got {v.shape}")
        if v.shape[2] < 1 or v.shape[3] < 1:
            raise StructuralError(f"cube planes must be non-empty, got {v.shape}")
        v = _as_readonly(v)
        if not np.all(np.isfinite(v)):
            raise DomainError("cube contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[2]

    @property
    def width(self) -> int:
        return self.values.shape[3]

    def plane(self, angle_deg: int, color: str) -> np.ndarray:
        """Single (H, W) plane for one polarizer angle and color letter."""
        try:
            return self.values[ANGLE_INDEX[angle_deg], COLOR_INDEX[color]]
        except KeyError as exc:
            raise DomainError(f"unknown angle or color: {angle_deg!r}, {color!r}") from exc

    @staticmethod
    def constant(height: int, width: int, value: float) -> "PolarCube":
        return PolarCube(np.full((4, 3, height, width), float(value)))


@dataclass(frozen=True)
class StokesMap:
    """Per-color Stokes rasters, each shape (3, H, W).

    dop is clamped to [0, 1]; aop is in radians in (-pi/2, pi/2] and is 0
    by convention where s1 = s2 = 0.
    """

    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    dop: np.ndarray
    aop: np.ndarray

    def __post_init__(self):
        fields = {"s0": self.s0, "s1": self.s1, "s2": self.s2,
                  "dop": self.dop, "aop": self.aop}
        shape = None
        for name, arr in fields.items():
            a = np.asarray(arr)
            if a.ndim != 3 or a.shape[0] != 3:
                raise StructuralError(f"{name} must have shape (3, H, W), got {a.shape}")
            if shape is None:
                shape = a.shape
            elif a.shape != shape:
                raise StructuralError("stokes fields have mismatched shapes")
            object.__setattr__(self, name, _as_readonly(a))


def compute_stokes(cube: PolarCube, eps: float = DEFAULT_EPS) -> StokesMap:
    """Stokes parameters, dop, and aop per pixel and color.

    Parameters
    ----------
    cube : PolarCube
        12-plane intensity stack.
    eps : float
        Floor applied to s0 in the dop denominator; must be positive.
        Raising eps never increases the reported dop.
    """
    if not (eps > 0):
        raise DomainError(f"eps must be positive, got {eps}")
    x0, x45, x90, x135 = cube.values
    s0 = 0.5 * (x0 + x45 + x90 + x135)
    s1 = x0 - x90
    s2 = x45 - x135
    dop = np.sqrt(s1 * s1 + s2 * s2) / np.maximum(s0, eps)
    dop = np.clip(dop, 0.0, 1.0)
    aop = 0.5 * np.arctan2(s2, s1)
    # atan2 returns -pi when s2 is a negative zero; fold that edge back
    # into (-pi/2, pi/2].
    aop = np.where(aop <= -0.5 * np.pi, aop + np.pi, aop)
    return StokesMap(s0=s0, s1=s1, s2=s2, dop=dop, aop=aop)


def _as_color_stack(raster: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(raster, dtype=np.float64)
    if a.ndim == 2:
        a = np.broadcast_to(a, (3,) + a.shape)
    if a.ndim != 3 or a.shape[0] != 3:
        raise StructuralError(f"{name} must be (H, W) or (3, H, W), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains non-finite values")
    return a


def synthesize_from_stokes(s0, dop, aop) -> PolarCube:
    """Build the 12-plane cube realizing given s0/dop/aop rasters.

    Each input is (H, W), shared across colors, or (3, H, W) per color.
    aop is in radians.  Exact coefficients are used for the four angles
    (cos/sin of 0, 90, 180, 270 degrees), so a round trip through
    compute_stokes recovers s0/dop/aop to float precision wherever
    dop > 0.

    Raises
    ------
    DomainError
        If dop falls outside [0, 1] or any input is non-finite.
    """
    s0 = _as_color_stack(s0, "s0")
    dop = _as_color_stack(dop, "dop")
    aop = _as_color_stack(aop, "aop")
    if not (s0.shape == dop.shape == aop.shape):
        raise StructuralError("s0, dop, aop shapes do not match")
    if np.any(dop < 0.0) or np.any(dop > 1.0):
        raise DomainError("dop must lie in [0, 1]")
    s1 = s0 * dop * np.cos(2.0 * aop)
    s2 = s0 * dop * np.sin(2.0 * aop)
    x0 = 0.5 * (s0 + s1)
    x45 = 0.5 * (s0 + s2)
    x90 = 0.5 * (s0 - s1)
    x135 = 0.5 * (s0 - s2)
    return PolarCube(np.stack([x0, x45, x90, x135]))


def mse_loss(a: PolarCube, b: PolarCube) -> float:
    """Mean squared error over all 12 planes of two equally sized cubes."""
    if a.values.shape != b.values.shape:
        raise StructuralError(
            f"cube shapes differ: {a.values.shape} vs {b.values.shape}")
    d = a.values - b.values
    return float(np.mean(d * d))

"""Deterministic PNG I/O.

Data rasters travel as 16-bit grayscale PNGs mapping [0, 1] to [0, 65535]
(values clipped on write).  The angle-of-polarization color rendering is
an 8-bit RGB PNG using a cyclic hue map with a 180-degree period.  Every
file carries the run's config hash as a tEXt chunk.
"""

from pathlib import Path

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from .errors import IngestError


def _png_info(config_hash: str | None) -> PngInfo | None:
    if not config_hash:
        return None
    info = PngInfo()
    info.add_text("config_hash", config_hash)
    return info


def write_gray16(path, raster01: np.ndarray, config_hash: str | None = None):
    """Write a [0, 1] raster as 16-bit grayscale PNG (clipped + quantized)."""
    arr = np.asarray(raster01, dtype=np.float64)
    q = np.round(np.clip(arr, 0.0, 1.0) * 65535.0).astype(np.uint16)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(q).save(path, pnginfo=_png_info(config_hash))


def write_rgb8(path, rgb01: np.ndarray, config_hash: str | None = None):
    """Write an (H, W, 3) [0, 1] array as 8-bit RGB PNG."""
    arr = np.asarray(rgb01, dtype=np.float64)
    q = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(q, mode="RGB").save(path, pnginfo=_png_info(config_hash))


def read_image01(path) -> np.ndarray:
    """Read a PNG as float64 in [0, 1].

    Returns (H, W) for grayscale or (H, W, 3) for RGB.  8- and 16-bit
    grayscale and 8-bit RGB are supported; anything else raises
    IngestError.
    """
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"image not found: {path}")
    with Image.open(path) as img:
        mode = img.mode
        arr = np.asarray(img)
    if mode == "L":
        return arr.astype(np.float64) / 255.0
    if mode in ("I;16", "I"):
        return arr.astype(np.float64) / 65535.0
    if mode == "RGB":
        return arr.astype(np.float64) / 255.0
    raise IngestError(f"unsupported bit depth or mode {mode!r} in {path}")


def aop_to_rgb(aop_deg: np.ndarray) -> np.ndarray:
    """Cyclic color rendering of angles in (-90, 90]: hue runs once around
    the wheel per 180 degrees, full saturation and value."""
    h = ((np.asarray(aop_deg, dtype=np.float64) + 90.0) / 180.0) % 1.0
    # manual HSV->RGB with s = v = 1
    k = (h * 6.0) % 6.0
    i = np.floor(k)
    f = k - i
    p = np.zeros_like(h)
    q = 1.0 - f
    t = f
    one = np.ones_like(h)
    lut = [
        (one, t, p), (q, one, p), (p, one, t),
        (p, q, one), (t, p, one), (one, p, q),
    ]
    rgb = np.zeros(h.shape + (3,), dtype=np.float64)
    for idx, (r, g, b) in enumerate(lut):
        m = i == idx
        rgb[m, 0] = r[m]
        rgb[m, 1] = g[m]
        rgb[m, 2] = b[m]
    return rgb

"""Shared raster helpers: PNG I/O and bilinear affine sampling.

Raster arrays are 2-D uint8 grayscale, indexed [row, col]; the continuous
coordinate frame puts the center of pixel (r, c) at (x, y) = (c + 0.5,
r + 0.5), matching the geometry module's conventions.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

WHITE = 255


def load_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.uint8)


def save_png(path: str | Path, image: np.ndarray) -> None:
    if image.dtype != np.uint8:
        raise ValueError("expected a uint8 grayscale raster")
    Image.fromarray(image, mode="L").save(path, format="PNG")


def to_uint8(values: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(values, 0, 255)).astype(np.uint8)


def sample_affine(
    image: np.ndarray,
    matrix: tuple[float, float, float, float],
    translation: tuple[float, float],
    out_h: int,
    out_w: int,
    fill: float = WHITE,
) -> np.ndarray:
    """Bilinear-resample ``image`` under an affine output->input map.

    The center (x', y') of each output pixel is sent to the input position
    M @ (x', y') + t; samples outside the input raster read ``fill``.
    Returns float64 values; callers quantize with :func:`to_uint8`.
    """
    m00, m01, m10, m11 = matrix
    tx, ty = translation
    xs = np.arange(out_w, dtype=np.float64) + 0.5
    ys = np.arange(out_h, dtype=np.float64) + 0.5
    in_x = m00 * xs[None, :] + m01 * ys[:, None] + tx
    in_y = m10 * xs[None, :] + m11 * ys[:, None] + ty
    coords = np.stack([in_y - 0.5, in_x - 0.5])
    return ndimage.map_coordinates(
        image.astype(np.float64), coords, order=1, mode="constant", cval=float(fill)
    )

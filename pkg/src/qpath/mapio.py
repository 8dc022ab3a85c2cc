"""Map image ingestion: grayscale rasters to occupancy masks.

Accepts PGM (P2/P5) and grayscale PNG. A snapshot image is binned onto the
requested grid; a cell becomes an obstacle when more than half of its source
pixels are darker than the threshold.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DegenerateDimsError, UnreadableImageError

_SUPPORTED = {".pgm", ".png"}


def load_image(path: str | Path) -> np.ndarray:
    """Read a map image as a (H, W) uint8 luminance array."""
    p = Path(path)
    if p.suffix.lower() not in _SUPPORTED:
        raise UnreadableImageError(f"{p}: unsupported image format {p.suffix!r}")
    try:
        with Image.open(p) as img:
            return np.asarray(img.convert("L"), dtype=np.uint8)
    except FileNotFoundError:
        raise UnreadableImageError(f"{p}: no such file")
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise UnreadableImageError(f"{p}: {exc}")


def ingest_map_image(
    image: np.ndarray, threshold: int, out_dims: tuple[int, int]
) -> np.ndarray:
    """Bin a grayscale raster onto a W x H boolean obstacle mask.

    A target cell is an obstacle iff the fraction of its source pixels with
    luminance < ``threshold`` exceeds 0.5. Bins partition the image when
    downscaling and fall back to single nearest pixels when upscaling, so
    ingesting an already binary W x H image reproduces its mask exactly.
    """
    out_w, out_h = int(out_dims[0]), int(out_dims[1])
    if out_w < 1 or out_h < 1:
        raise DegenerateDimsError(f"out_dims must be >= 1, got {out_dims}")
    img = np.asarray(image)
    if img.ndim != 2 or img.size == 0:
        raise UnreadableImageError("expected a nonempty 2-D grayscale array")
    src_h, src_w = img.shape

    dark = (img < threshold).astype(np.int64)
    # Integral image makes every bin a rectangle sum, including the
    # single-pixel bins produced when upscaling.
    integral = np.zeros((src_h + 1, src_w + 1), dtype=np.int64)
    integral[1:, 1:] = dark.cumsum(axis=0).cumsum(axis=1)

    def edges(n_out: int, n_src: int) -> tuple[np.ndarray, np.ndarray]:
        lo = (np.arange(n_out) * n_src) // n_out
        hi = np.maximum(lo + 1, ((np.arange(n_out) + 1) * n_src) // n_out)
        return lo, np.minimum(hi, n_src)

    x0, x1 = edges(out_w, src_w)
    y0, y1 = edges(out_h, src_h)

    dark_counts = (
        integral[np.ix_(y1, x1)]
        - integral[np.ix_(y0, x1)]
        - integral[np.ix_(y1, x0)]
        + integral[np.ix_(y0, x0)]
    )
    totals = np.outer(y1 - y0, x1 - x0)
    return dark_counts * 2 > totals

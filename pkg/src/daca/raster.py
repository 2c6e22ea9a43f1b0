"""Low-level raster kernels on ``(H, W, 3)`` arrays.

Float inputs are converted back to 8 bits with :func:`to_uint8`
(round half away from zero, then clamp), so every kernel produces the
same bytes on every platform.
"""

from __future__ import annotations

import numpy as np

from .model import Image

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def to_uint8(values: np.ndarray) -> np.ndarray:
    # clamping first leaves only non-negative values, where half-away-from-zero
    # rounding is floor(x + 0.5)
    return np.floor(np.clip(values, 0.0, 255.0) + 0.5).astype(np.uint8)


def as_float(image: Image) -> np.ndarray:
    return image.pixels.astype(np.float64)


def from_float(values: np.ndarray) -> Image:
    return Image(to_uint8(values))


def _sample_axis(n_in: int, n_out: int):
    """Source indices and weights for half-pixel-centred linear sampling."""
    pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    return lo, hi, frac


def resize_float(values: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize with edge clamping; input and output are float arrays."""
    h_in, w_in = values.shape[:2]
    if (w_in, h_in) == (width, height):
        return values.copy()
    lo, hi, frac = _sample_axis(w_in, width)
    f = frac[None, :, None]
    rows = values[:, lo] * (1.0 - f) + values[:, hi] * f
    lo, hi, frac = _sample_axis(h_in, height)
    f = frac[:, None, None]
    return rows[lo] * (1.0 - f) + rows[hi] * f


def resize(image: Image, width: int, height: int) -> Image:
    if image.dims == (width, height):
        return image
    return from_float(resize_float(as_float(image), width, height))


def crop(image: Image, x0: int, y0: int, x1: int, y1: int) -> Image:
    if not (0 <= x0 < x1 <= image.width and 0 <= y0 < y1 <= image.height):
        raise ValueError(f"crop rectangle {(x0, y0, x1, y1)} outside {image.dims}")
    return Image(image.pixels[y0:y1, x0:x1])


def box_filter(values: np.ndarray, k: int) -> np.ndarray:
    """Mean over a ``k x k`` window with replicated borders (odd ``k``)."""
    r = k // 2
    padded = np.pad(values, ((r, r), (r, r), (0, 0)), mode="edge")
    # window sums via cumulative sums; integer-valued inputs stay exact
    c = np.cumsum(padded, axis=0)
    c = np.concatenate([np.zeros_like(c[:1]), c], axis=0)
    rows = c[k:] - c[:-k]
    c = np.cumsum(rows, axis=1)
    c = np.concatenate([np.zeros_like(c[:, :1]), c], axis=1)
    sums = c[:, k:] - c[:, :-k]
    return sums / (k * k)


def luma(values: np.ndarray) -> np.ndarray:
    return values @ LUMA_WEIGHTS


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """RGB in [0, 1] to HSV with hue as a fraction of the full circle."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    delta = maxc - minc
    v = maxc
    s = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    safe = np.where(delta > 0, delta, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0)
    return np.stack([h, s, v], axis=-1)


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    h6 = (h % 1.0) * 6.0
    i = np.floor(h6)
    f = h6 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(np.intp) % 6
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def draw_rectangle(
    canvas: np.ndarray, x0: int, y0: int, x1: int, y1: int, color, thickness: int = 2
) -> None:
    """Draw an outline inside the half-open pixel rectangle ``[x0, x1) x [y0, y1)``.

    Mutates ``canvas`` in place; coordinates are clipped to the canvas.
    """
    h, w = canvas.shape[:2]
    x0, x1 = max(0, x0), min(w, x1)
    y0, y1 = max(0, y0), min(h, y1)
    if x0 >= x1 or y0 >= y1:
        return
    t = thickness
    canvas[y0 : min(y0 + t, y1), x0:x1] = color
    canvas[max(y1 - t, y0) : y1, x0:x1] = color
    canvas[y0:y1, x0 : min(x0 + t, x1)] = color
    canvas[y0:y1, max(x1 - t, x0) : x1] = color

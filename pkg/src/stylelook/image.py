"""Float RGB image primitives: file I/O, resampling, blur, compositing, diagnostics.

Images are numpy float64 arrays of shape (height, width, 3) with values in
[0, 1]. All operations are pure functions; none mutate their inputs.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import cv2
import numpy as np

__all__ = [
    "ImageError",
    "UnsupportedFormatError",
    "CorruptImageError",
    "Rect",
    "check_image",
    "load_image",
    "save_image",
    "resize",
    "crop",
    "composite_block",
    "cross_dissolve",
    "gaussian_blur",
    "hf_energy",
    "style_image_report",
]


class ImageError(Exception):
    """Base class for image I/O and validation failures."""


class UnsupportedFormatError(ImageError):
    """File extension or pixel layout we do not handle."""


class CorruptImageError(ImageError):
    """File exists but cannot be decoded."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle with non-negative offsets."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError(f"rect offsets must be >= 0, got ({self.x}, {self.y})")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"rect size must be > 0, got ({self.w}, {self.h})")

    def check_within(self, img: np.ndarray) -> None:
        h, w = img.shape[:2]
        if self.x + self.w > w or self.y + self.h > h:
            raise ValueError(
                f"rect {self} exceeds image bounds {w}x{h}"
            )


def check_image(img: np.ndarray) -> np.ndarray:
    """Validate the (H, W, 3) float-in-[0,1] contract; returns the image."""
    if not isinstance(img, np.ndarray) or img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) array, got shape {getattr(img, 'shape', None)}")
    if img.shape[0] <= 0 or img.shape[1] <= 0:
        raise ValueError("image dimensions must be positive")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values outside [0, 1]")
    return img


def _read_ppm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    i = 0
    # P6 header: magic, width, height, maxval, separated by whitespace/comments
    while len(tokens) < 4 and i < len(data):
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    if len(tokens) < 4 or tokens[0] != b"P6":
        raise CorruptImageError(f"{path}: not a binary P6 PPM")
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise CorruptImageError(f"{path}: bad PPM header") from exc
    if maxval != 255:
        raise UnsupportedFormatError(f"{path}: only 8-bit PPM supported (maxval {maxval})")
    i += 1  # single whitespace after maxval
    raster = data[i : i + w * h * 3]
    if len(raster) < w * h * 3:
        raise CorruptImageError(f"{path}: truncated PPM raster")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(h, w, 3)
    return arr.astype(np.float64) / 255.0


def _write_ppm(img: np.ndarray, path: str) -> None:
    h, w = img.shape[:2]
    codes = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(codes.tobytes())


def load_image(path: str) -> np.ndarray:
    """Load a PNG or binary PPM as float RGB in [0, 1].

    8-bit codes map to v/255, 16-bit to v/65535. Grayscale is expanded to
    RGB; an alpha channel is dropped.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such image file: {path}")
    ext = os.path.splitext(path)[1].lower()
    if ext == ".ppm":
        return _read_ppm(path)
    if ext != ".png":
        raise UnsupportedFormatError(f"{path}: unsupported extension {ext!r}")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise CorruptImageError(f"{path}: failed to decode PNG")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise UnsupportedFormatError(f"{path}: unsupported sample type {raw.dtype}")
    if raw.ndim == 2:
        raw = np.stack([raw] * 3, axis=-1)
    elif raw.shape[2] == 4:
        raw = raw[:, :, :3]
    elif raw.shape[2] != 3:
        raise UnsupportedFormatError(f"{path}: unsupported channel count {raw.shape[2]}")
    rgb = raw[:, :, ::-1]  # cv2 decodes BGR
    return rgb.astype(np.float64) / scale


def save_image(img: np.ndarray, path: str, depth: int = 8) -> None:
    """Write PNG (8- or 16-bit) or binary PPM (8-bit). Round-half-up quantization."""
    check_image(img)
    ext = os.path.splitext(path)[1].lower()
    if ext == ".ppm":
        if depth != 8:
            raise UnsupportedFormatError("PPM output is 8-bit only")
        _write_ppm(img, path)
        return
    if ext != ".png":
        raise UnsupportedFormatError(f"{path}: unsupported extension {ext!r}")
    if depth == 8:
        codes = np.floor(img * 255.0 + 0.5).astype(np.uint8)
    elif depth == 16:
        codes = np.floor(img * 65535.0 + 0.5).astype(np.uint16)
    else:
        raise ValueError(f"depth must be 8 or 16, got {depth}")
    bgr = np.ascontiguousarray(codes[:, :, ::-1])
    if not cv2.imwrite(path, bgr):
        raise OSError(f"could not write image to {path}")


def resize(img: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """Bilinear resample to exactly (new_w, new_h), half-pixel centers, edge clamp."""
    if new_w <= 0 or new_h <= 0:
        raise ValueError(f"target size must be positive, got {new_w}x{new_h}")
    h, w = img.shape[:2]
    if (new_w, new_h) == (w, h):
        return img.copy()

    def axis_coords(n_src, n_dst):
        c = (np.arange(n_dst) + 0.5) * (n_src / n_dst) - 0.5
        lo = np.clip(np.floor(c).astype(np.int64), 0, n_src - 1)
        hi = np.clip(lo + 1, 0, n_src - 1)
        frac = np.clip(c - lo, 0.0, 1.0)
        return lo, hi, frac

    x0, x1, fx = axis_coords(w, new_w)
    y0, y1, fy = axis_coords(h, new_h)
    top = img[y0][:, x0] * (1 - fx)[None, :, None] + img[y0][:, x1] * fx[None, :, None]
    bot = img[y1][:, x0] * (1 - fx)[None, :, None] + img[y1][:, x1] * fx[None, :, None]
    out = top * (1 - fy)[:, None, None] + bot * fy[:, None, None]
    return np.clip(out, 0.0, 1.0)


def crop(img: np.ndarray, r: Rect) -> np.ndarray:
    r.check_within(img)
    return img[r.y : r.y + r.h, r.x : r.x + r.w].copy()


def composite_block(base: np.ndarray, patch: np.ndarray, at: Rect) -> np.ndarray:
    """Paste `patch` over `base` inside the rect; everything else untouched."""
    if (at.h, at.w) != patch.shape[:2]:
        raise ValueError(
            f"rect {at.w}x{at.h} does not match patch {patch.shape[1]}x{patch.shape[0]}"
        )
    at.check_within(base)
    out = base.copy()
    out[at.y : at.y + at.h, at.x : at.x + at.w] = patch
    return out


def cross_dissolve(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Per-pixel convex blend (1-t)*a + t*b."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"blend weight must be in [0, 1], got {t}")
    if t == 0.0:
        return a.copy()
    if t == 1.0:
        return b.copy()
    return (1.0 - t) * a + t * b


def _gauss_kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian, kernel truncated at ceil(3*sigma), edge clamp.

    sigma = 0 returns a bit-identical copy.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img.copy()
    k = _gauss_kernel(sigma)
    radius = len(k) // 2
    padded = np.pad(img, ((radius, radius), (0, 0), (0, 0)), mode="edge")
    out = np.zeros_like(img)
    h, w = img.shape[:2]
    for i, kv in enumerate(k):
        out += kv * padded[i : i + h]
    padded = np.pad(out, ((0, 0), (radius, radius), (0, 0)), mode="edge")
    out = np.zeros_like(img)
    for i, kv in enumerate(k):
        out += kv * padded[:, i : i + w]
    return np.clip(out, 0.0, 1.0)


def hf_energy(img: np.ndarray, sigma: float) -> float:
    """Mean squared residual against the Gaussian-blurred image."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    diff = img - gaussian_blur(img, sigma)
    return float(np.mean(diff * diff))


def style_image_report(img: np.ndarray) -> dict:
    """Quality diagnostics for a candidate style image.

    Blown-out highlights (all channels >= 0.99) and crushed shadows
    (all channels <= 0.01) are reported as pixel fractions, together with
    the high-frequency energy at sigma = 2.
    """
    check_image(img)
    highlights = np.all(img >= 0.99, axis=2)
    shadows = np.all(img <= 0.01, axis=2)
    return {
        "clipped_highlight_fraction": float(np.mean(highlights)),
        "clipped_shadow_fraction": float(np.mean(shadows)),
        "hf_energy": hf_energy(img, 2.0),
    }

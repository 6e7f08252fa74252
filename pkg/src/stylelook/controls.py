"""Creative-control layer: unrealness mapping, resolution scaling, sweeps, review sheets.

The style transfer ratio (the weight on the style loss) is parameterized as
10^u, where u is the "unrealness" exponent. The ratio scales near-linearly
with working width, so previews at reduced resolution use a shifted u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "LookSpec",
    "SweepSpec",
    "ratio_from_u",
    "scaled_ratio",
    "scaled_u",
    "validate",
    "memory_estimate",
    "make_sweep",
    "contact_sheet",
    "DEFAULT_WIDTH_CAP",
]

DEFAULT_WIDTH_CAP = 1024  # px; mirrors the practical single-frame limit


@dataclass(frozen=True)
class LookSpec:
    """One renderable look: unrealness, iterations, resolution, seed."""

    u: float = 0.0
    iterations: int = 256
    working_width: int = 512
    preview_scale: float = 1.0
    finish: object = None  # FinishSpec, resolved by the pipeline
    seed: int = 0

    def __post_init__(self):
        if self.working_width <= 0:
            raise ValueError("working_width must be > 0")
        if not 0.0 < self.preview_scale <= 1.0:
            raise ValueError("preview_scale must be in (0, 1]")


@dataclass(frozen=True)
class SweepSpec:
    """A one-axis parameter sweep over a base look."""

    axis: str
    values: tuple
    base: LookSpec

    def __post_init__(self):
        if self.axis not in ("u", "iterations"):
            raise ValueError(f"sweep axis must be 'u' or 'iterations', got {self.axis!r}")
        vals = tuple(self.values)
        if not vals:
            raise ValueError("sweep values must be non-empty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("sweep values must be strictly increasing")
        object.__setattr__(self, "values", vals)


def ratio_from_u(u: float) -> float:
    """Style transfer ratio 10^u."""
    if not math.isfinite(u):
        raise ValueError(f"u must be finite, got {u}")
    return 10.0 ** u


def scaled_ratio(full_ratio: float, full_width: int, work_width: int) -> float:
    """Linear-in-width rescaling of the style transfer ratio."""
    if full_width <= 0 or work_width <= 0:
        raise ValueError("widths must be > 0")
    return full_ratio * (work_width / full_width)


def scaled_u(u_full: float, full_width: int, work_width: int) -> float:
    """The u that reproduces scaled_ratio in exponent form: u + log10(w'/w)."""
    if full_width <= 0 or work_width <= 0:
        raise ValueError("widths must be > 0")
    return u_full + math.log10(work_width / full_width)


def validate(spec: LookSpec, width_cap: int = DEFAULT_WIDTH_CAP) -> list:
    """Check a look against iteration guidance and the memory-guard width cap.

    Returns structured diagnostics as "level:code:message" strings; an empty
    list means the look is clean.
    """
    issues = []
    if spec.iterations < 128:
        issues.append(
            f"warning:low-iterations:{spec.iterations} iterations is below 128; "
            "expect noticeable artifacts in the content"
        )
    elif spec.iterations > 1024:
        issues.append(
            f"warning:high-iterations:{spec.iterations} iterations; past 1024 the "
            "improvement is negligible"
        )
    if spec.working_width > width_cap:
        issues.append(
            f"error:width-cap:working width {spec.working_width} exceeds the "
            f"memory-guard cap of {width_cap}px"
        )
    return issues


def memory_estimate(width: int, height: int, cfg) -> int:
    """Closed-form working-set estimate in bytes for one optimization.

    Formula (float64 scalars, 8 bytes):

        bytes = 8 * (3 * W * H * 3                     image x, gradient, scratch
                     + sum_i 3 * C_i * W_i * H_i)      per-conv activation,
                                                       gradient and workspace

    where block i (0-based) runs at W_i = W / 2^i, H_i = H / 2^i (conv output
    resolution before that block's pool). `cfg` may be a NetConfig or a bare
    sequence of per-block channel counts; an empty sequence gives the
    image-only terms.
    """
    channels = getattr(cfg, "block_channels", cfg)
    total = 3 * width * height * 3
    for i, c in enumerate(channels):
        total += 3 * c * (width // (2 ** i)) * (height // (2 ** i))
    return 8 * total


def make_sweep(s: SweepSpec) -> list:
    """Expand a sweep into LookSpecs differing only on the chosen axis."""
    if s.axis == "u":
        return [replace(s.base, u=float(v)) for v in s.values]
    return [replace(s.base, iterations=int(v)) for v in s.values]


# 5x7 bitmap glyphs for contact-sheet labels; '#' marks a lit pixel.
_GLYPHS = {
    "0": ".###.|#...#|#..##|#.#.#|##..#|#...#|.###.",
    "1": "..#..|.##..|..#..|..#..|..#..|..#..|.###.",
    "2": ".###.|#...#|....#|...#.|..#..|.#...|#####",
    "3": ".###.|#...#|....#|..##.|....#|#...#|.###.",
    "4": "...#.|..##.|.#.#.|#..#.|#####|...#.|...#.",
    "5": "#####|#....|####.|....#|....#|#...#|.###.",
    "6": "..##.|.#...|#....|####.|#...#|#...#|.###.",
    "7": "#####|....#|...#.|..#..|..#..|..#..|..#..",
    "8": ".###.|#...#|#...#|.###.|#...#|#...#|.###.",
    "9": ".###.|#...#|#...#|.####|....#|...#.|.##..",
    "-": ".....|.....|.....|#####|.....|.....|.....",
    "+": ".....|..#..|..#..|#####|..#..|..#..|.....",
    ".": ".....|.....|.....|.....|.....|.##..|.##..",
    "=": ".....|.....|#####|.....|#####|.....|.....",
    "u": ".....|.....|#...#|#...#|#...#|#..##|.##.#",
    "i": "..#..|.....|.##..|..#..|..#..|..#..|.###.",
    "t": ".#...|.#...|####.|.#...|.#...|.#..#|..##.",
    "e": ".....|.....|.###.|#...#|#####|#....|.###.",
    "r": ".....|.....|#.##.|##..#|#....|#....|#....",
    "a": ".....|.....|.###.|....#|.####|#...#|.####",
    "o": ".....|.....|.###.|#...#|#...#|#...#|.###.",
    "n": ".....|.....|#.##.|##..#|#...#|#...#|#...#",
    "s": ".....|.....|.####|#....|.###.|....#|####.",
    " ": ".....|.....|.....|.....|.....|.....|.....",
}

_LABEL_BAND = 11  # px: 2 top pad + 7 glyph rows + 2 bottom pad
_GLYPH_ADVANCE = 6


def _draw_label(band: np.ndarray, text: str) -> None:
    x = 2
    for ch in text:
        glyph = _GLYPHS.get(ch, _GLYPHS[" "])
        if x + 5 > band.shape[1]:
            break
        for row, line in enumerate(glyph.split("|")):
            for col, bit in enumerate(line):
                if bit == "#":
                    band[2 + row, x + col, :] = 1.0
        x += _GLYPH_ADVANCE


def contact_sheet(images: list, labels: list) -> np.ndarray:
    """Horizontal review strip with a bitmap-font label band under each cell."""
    if not images:
        raise ValueError("contact sheet needs at least one image")
    if len(labels) != len(images):
        raise ValueError(f"{len(images)} images but {len(labels)} labels")
    h, w = images[0].shape[:2]
    for img in images[1:]:
        if img.shape[:2] != (h, w):
            raise ValueError("all contact-sheet images must share dimensions")
    sheet = np.zeros((h + _LABEL_BAND, w * len(images), 3))
    for i, (img, label) in enumerate(zip(images, labels)):
        sheet[:h, i * w : (i + 1) * w] = img
        _draw_label(sheet[h:, i * w : (i + 1) * w], label)
    return sheet

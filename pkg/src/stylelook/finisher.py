"""Finishing chain: upscale to delivery width, denoise, cross-dissolve scheduling.

Stylized frames are computed below delivery resolution, upscaled, then blurred;
the pair acts as a bandpass that suppresses both upscaling blockiness and
high-frequency transfer noise. Delivery frames are blended back into the
original footage on a linear in/out dissolve ramp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import image

__all__ = ["FinishSpec", "DissolveCurve", "finish_frame", "dissolve_weight", "finish_sequence"]


@dataclass(frozen=True)
class DissolveCurve:
    """Piecewise-linear blend schedule: ramp up, plateau at 1, ramp down."""

    in_start: int
    in_end: int
    out_start: int
    out_end: int

    def __post_init__(self):
        if not self.in_start <= self.in_end <= self.out_start <= self.out_end:
            raise ValueError(
                "dissolve frames must satisfy in_start <= in_end <= out_start <= out_end, "
                f"got {self}"
            )


@dataclass(frozen=True)
class FinishSpec:
    """Delivery width, denoise strength, and the dissolve schedule.

    denoise_sigma None means 0.5 x the upscale factor, so the denoise gets
    more aggressive the further the frame is pushed past compute resolution.
    """

    delivery_width: int
    denoise_sigma: float | None = None
    dissolve: DissolveCurve = DissolveCurve(0, 0, 1 << 30, 1 << 30)

    def __post_init__(self):
        if self.delivery_width <= 0:
            raise ValueError("delivery_width must be > 0")
        if self.denoise_sigma is not None and self.denoise_sigma < 0:
            raise ValueError("denoise_sigma must be >= 0")


def finish_frame(stylized: np.ndarray, spec: FinishSpec) -> np.ndarray:
    """Upscale (aspect preserved, height rounded to nearest even) then denoise."""
    h, w = stylized.shape[:2]
    if spec.delivery_width < w:
        raise ValueError(
            f"delivery width {spec.delivery_width} is smaller than source width {w}"
        )
    factor = spec.delivery_width / w
    if spec.delivery_width == w:
        out = stylized.copy()
    else:
        new_h = max(2, int(round(h * factor / 2.0)) * 2)
        out = image.resize(stylized, spec.delivery_width, new_h)
    sigma = 0.5 * factor if spec.denoise_sigma is None else spec.denoise_sigma
    return image.gaussian_blur(out, sigma)


def dissolve_weight(frame: int, curve: DissolveCurve) -> float:
    """Blend weight in [0, 1]: 0 outside, 1 on the plateau, linear ramps."""
    if frame < curve.in_start:
        return 0.0
    if frame < curve.in_end:
        return (frame - curve.in_start) / (curve.in_end - curve.in_start)
    if frame <= curve.out_start:
        return 1.0
    if frame < curve.out_end:
        return 1.0 - (frame - curve.out_start) / (curve.out_end - curve.out_start)
    return 0.0


def finish_sequence(stylized_frames, original_frames, spec: FinishSpec, start_frame: int = 0):
    """Finish each stylized frame and dissolve it over the matching original.

    Originals must already be at delivery resolution. Frame i uses the
    dissolve weight at index start_frame + i.
    """
    if len(stylized_frames) != len(original_frames):
        raise ValueError(
            f"{len(stylized_frames)} stylized frames vs {len(original_frames)} originals"
        )
    out = []
    for i, (sty, orig) in enumerate(zip(stylized_frames, original_frames)):
        finished = finish_frame(sty, spec)
        if finished.shape != orig.shape:
            raise ValueError(
                f"frame {i}: finished {finished.shape} vs original {orig.shape}"
            )
        t = dissolve_weight(start_frame + i, spec.dissolve)
        out.append(image.cross_dissolve(orig, finished, t))
    return out

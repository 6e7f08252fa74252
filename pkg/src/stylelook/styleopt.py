"""Losses and the iterative loop that redraws a content image in a style.

Loss normalization used throughout: content loss is the mean over taps of the
mean-squared feature difference; a Gram matrix is F F^T / (H*W) for the
C x (H*W) unrolled activation; style loss is the weighted sum of mean-squared
Gram differences. The total is

    L = L_content + ratio * L_style,    ratio = 10^u.

Gram accumulation runs spatial-major (ascending spatial index), which fixes
the summation order so results are bit-reproducible and match a naive
double-loop computation exactly.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import featurenet, image
from .controls import ratio_from_u

__all__ = [
    "TransferParams",
    "TraceRow",
    "TransferAborted",
    "gram",
    "content_loss",
    "style_loss",
    "style_targets",
    "content_targets",
    "total_loss_and_grad",
    "AdamState",
    "adam_step",
    "run_transfer",
    "trace_to_csv",
]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class TransferParams:
    """Creative and technical knobs for one transfer run."""

    u: float = 0.0
    iterations: int = 256
    content_taps: tuple = ("block2",)
    style_taps: tuple = ("block1", "block2", "block3")
    style_tap_weights: tuple = ()  # empty = equal weights
    learning_rate: float = 0.02
    seed: int = 0
    init_mode: str = "content-copy"
    snapshot_every: int = 0  # 0 = no snapshots

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.init_mode not in ("content-copy", "seeded-noise"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")
        weights = tuple(self.style_tap_weights)
        if not weights:
            weights = (1.0 / len(self.style_taps),) * len(self.style_taps)
        if len(weights) != len(self.style_taps):
            raise ValueError("style_tap_weights length must match style_taps")
        if any(w < 0 for w in weights):
            raise ValueError("style tap weights must be >= 0")
        total = sum(weights)
        if total <= 0:
            raise ValueError("style tap weights must not all be zero")
        weights = tuple(w / total for w in weights)
        object.__setattr__(self, "style_tap_weights", weights)
        object.__setattr__(self, "content_taps", tuple(self.content_taps))
        object.__setattr__(self, "style_taps", tuple(self.style_taps))


@dataclass(frozen=True)
class TraceRow:
    step: int
    content_loss: float
    style_loss: float
    total_loss: float


class TransferAborted(RuntimeError):
    """Raised when the optimization hits a non-finite loss or gradient."""

    def __init__(self, step: int, message: str, last_good: np.ndarray | None = None):
        super().__init__(f"step {step}: {message}")
        self.step = step
        self.last_good = last_good


def gram(activation: np.ndarray) -> np.ndarray:
    """Channel Gram matrix F F^T / (H*W), accumulated spatial-major."""
    c, h, w = activation.shape
    cols = activation.reshape(c, h * w)
    g = np.zeros((c, c))
    for k in range(h * w):
        col = cols[:, k]
        g += np.outer(col, col)
    return g / (h * w)


def content_targets(features: dict, taps) -> dict:
    return {t: features[t].copy() for t in taps}


def style_targets(features: dict, taps) -> dict:
    return {t: gram(features[t]) for t in taps}


def content_loss(features: dict, targets: dict, taps) -> float:
    total = 0.0
    for t in taps:
        f, tgt = features[t], targets[t]
        if f.shape != tgt.shape:
            raise ValueError(f"content tap {t}: shape {f.shape} vs target {tgt.shape}")
        total += float(np.mean((f - tgt) ** 2))
    return total / len(taps)


def style_loss(features: dict, targets: dict, taps, weights) -> float:
    total = 0.0
    for t, w in zip(taps, weights):
        g = gram(features[t])
        tgt = targets[t]
        if g.shape != tgt.shape:
            raise ValueError(f"style tap {t}: Gram {g.shape} vs target {tgt.shape}")
        total += w * float(np.mean((g - tgt) ** 2))
    return total


def _loss_and_cotangents(features, content_t, style_t, p: TransferParams):
    c_loss = content_loss(features, content_t, p.content_taps)
    s_loss = style_loss(features, style_t, p.style_taps, p.style_tap_weights)
    ratio = ratio_from_u(p.u)

    cots = {}
    for t in p.content_taps:
        f = features[t]
        cots[t] = (2.0 / (f.size * len(p.content_taps))) * (f - content_t[t])
    for t, w in zip(p.style_taps, p.style_tap_weights):
        f = features[t]
        c, h, wid = f.shape
        g = gram(f)
        s = (2.0 * w / (c * c)) * (g - style_t[t])
        # d/dF of mean((G - G*)^2): ((S + S^T) F) / (H W)
        df = ((s + s.T) @ f.reshape(c, h * wid)) / (h * wid)
        df = ratio * df.reshape(c, h, wid)
        cots[t] = cots[t] + df if t in cots else df
    total = c_loss + ratio * s_loss
    return c_loss, s_loss, total, cots


def total_loss_and_grad(
    x: np.ndarray,
    content_t: dict,
    style_t: dict,
    p: TransferParams,
    weights: featurenet.Weights,
    cfg: featurenet.NetConfig,
):
    """Total loss at image x and its exact pixel gradient.

    One forward pass feeds both loss terms; one reverse pass accumulates the
    gradient of content + 10^u * style.
    """
    taps, cache = featurenet._forward_cached(x, weights, cfg)
    c_loss, s_loss, total, cots = _loss_and_cotangents(taps, content_t, style_t, p)
    grad = featurenet._backward(cache, weights, cfg, cots)
    return total, grad


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, shape) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape), 0)


def adam_step(x: np.ndarray, g: np.ndarray, state: AdamState, lr: float):
    """One Adam update (beta1 0.9, beta2 0.999, eps 1e-8) with [0,1] clamp."""
    if x.shape != g.shape:
        raise ValueError(f"shape mismatch: x {x.shape} vs g {g.shape}")
    if not np.all(np.isfinite(g)):
        raise TransferAborted(state.t, "non-finite gradient")
    t = state.t + 1
    m = ADAM_BETA1 * state.m + (1 - ADAM_BETA1) * g
    v = ADAM_BETA2 * state.v + (1 - ADAM_BETA2) * g * g
    m_hat = m / (1 - ADAM_BETA1 ** t)
    v_hat = v / (1 - ADAM_BETA2 ** t)
    x_new = np.clip(x - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS), 0.0, 1.0)
    return x_new, AdamState(m, v, t)


def _init_image(content: np.ndarray, p: TransferParams) -> np.ndarray:
    if p.init_mode == "content-copy":
        return content.copy()
    rng = np.random.Generator(np.random.Philox(key=p.seed))
    return rng.uniform(0.0, 1.0, size=content.shape)


def run_transfer(
    content: np.ndarray,
    style: np.ndarray,
    p: TransferParams,
    cfg: featurenet.NetConfig,
    weights: featurenet.Weights | None = None,
):
    """Optimize an image toward the style targets; deterministic for fixed seeds.

    The style image is resized to the content dimensions before target
    computation. Returns (stylized image, trace rows, snapshots); the trace
    has one row per step plus a final row after the last update, and
    snapshots is a list of (step, image) pairs when snapshot_every > 0.
    """
    image.check_image(content)
    image.check_image(style)
    if weights is None:
        weights = featurenet.init_weights(cfg)
    h, w = content.shape[:2]
    style_sized = image.resize(style, w, h)

    content_t = content_targets(featurenet.forward(content, weights, cfg), p.content_taps)
    style_t = style_targets(featurenet.forward(style_sized, weights, cfg), p.style_taps)

    x = _init_image(content, p)
    state = AdamState.zeros(x.shape)
    trace: list[TraceRow] = []
    snapshots: list[tuple[int, np.ndarray]] = []

    def record(step):
        taps, cache = featurenet._forward_cached(x, weights, cfg)
        c_loss, s_loss, total, cots = _loss_and_cotangents(taps, content_t, style_t, p)
        if not (np.isfinite(c_loss) and np.isfinite(s_loss) and np.isfinite(total)):
            last = snapshots[-1][1] if snapshots else None
            raise TransferAborted(step, f"non-finite loss (total={total})", last)
        trace.append(TraceRow(step, c_loss, s_loss, total))
        return featurenet._backward(cache, weights, cfg, cots)

    for step in range(p.iterations):
        grad = record(step)
        try:
            x, state = adam_step(x, grad, state, p.learning_rate)
        except TransferAborted as exc:
            exc.last_good = snapshots[-1][1] if snapshots else None
            raise
        if p.snapshot_every and (step + 1) % p.snapshot_every == 0:
            snapshots.append((step + 1, x.copy()))
    record(p.iterations)
    return x, trace, snapshots


def trace_to_csv(trace) -> str:
    """CSV with header step,content_loss,style_loss,total_loss."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "content_loss", "style_loss", "total_loss"])
    for row in trace:
        writer.writerow([row.step, repr(row.content_loss), repr(row.style_loss), repr(row.total_loss)])
    return buf.getvalue()

"""Compact deterministic convolutional feature extractor with exact input gradients.

Each block is a 3x3 stride-1 zero-padded convolution followed by relu and a
2x2 average pool. Tap activations are the pooled block outputs. Weights are
regenerated from a seed with a counter-based Philox stream, so a (seed,
config) pair always yields bit-identical weights; there are no weight files.

Convolutions accumulate kernel-major (a fixed loop over the nine kernel
offsets), which pins the floating-point summation order and makes forward
and gradient outputs bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["NetConfig", "Weights", "init_weights", "forward", "input_gradient"]

DEFAULT_BLOCKS = (16, 32, 64)


@dataclass(frozen=True)
class NetConfig:
    """Architecture: per-block conv output channels, exposed taps, weight seed."""

    block_channels: tuple = DEFAULT_BLOCKS
    tap_names: tuple = ()
    seed: int = 0

    def __post_init__(self):
        blocks = tuple(int(c) for c in self.block_channels)
        if len(blocks) < 1:
            raise ValueError("need at least one block")
        if any(c < 1 for c in blocks):
            raise ValueError(f"block channels must be >= 1, got {blocks}")
        taps = tuple(self.tap_names) or tuple(self.block_names())
        valid = set(f"block{i + 1}" for i in range(len(blocks)))
        for t in taps:
            if t not in valid:
                raise ValueError(f"unknown tap {t!r}; blocks define {sorted(valid)}")
        object.__setattr__(self, "block_channels", blocks)
        object.__setattr__(self, "tap_names", taps)

    def block_names(self):
        return [f"block{i + 1}" for i in range(len(self.block_channels))]

    @property
    def num_pools(self) -> int:
        return len(self.block_channels)

    def tap_shape(self, name: str, in_w: int, in_h: int) -> tuple:
        """(channels, height, width) of a tap for a given input size."""
        i = self.block_names().index(name)
        f = 2 ** (i + 1)
        return (self.block_channels[i], in_h // f, in_w // f)


@dataclass(frozen=True)
class Weights:
    """Per-layer (out x in x 3 x 3) kernels and bias vectors."""

    kernels: tuple
    biases: tuple


def init_weights(config: NetConfig) -> Weights:
    """He-scaled kernels (std = sqrt(2 / (in*9))) from a Philox stream; zero biases."""
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    kernels, biases = [], []
    c_in = 3
    for c_out in config.block_channels:
        std = math.sqrt(2.0 / (c_in * 9))
        kernels.append(rng.standard_normal((c_out, c_in, 3, 3)) * std)
        biases.append(np.zeros(c_out))
        c_in = c_out
    return Weights(tuple(kernels), tuple(biases))


def _conv3x3(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Same-padded 3x3 conv, kernel-major accumulation over the 9 offsets."""
    c_in, h, w = x.shape
    xp = np.zeros((c_in, h + 2, w + 2))
    xp[:, 1:-1, 1:-1] = x
    out = np.zeros((kernel.shape[0], h, w))
    for dy in range(3):
        for dx in range(3):
            out += np.tensordot(kernel[:, :, dy, dx], xp[:, dy : dy + h, dx : dx + w], axes=(1, 0))
    return out + bias[:, None, None]


def _conv3x3_input_grad(g: np.ndarray, kernel: np.ndarray, h: int, w: int) -> np.ndarray:
    """Gradient of _conv3x3 w.r.t. its input, same fixed offset order."""
    gp = np.zeros((kernel.shape[1], h + 2, w + 2))
    for dy in range(3):
        for dx in range(3):
            gp[:, dy : dy + h, dx : dx + w] += np.tensordot(
                kernel[:, :, dy, dx], g, axes=(0, 0)
            )
    return gp[:, 1:-1, 1:-1]


def _avgpool2(x: np.ndarray) -> np.ndarray:
    c, h, w = x.shape
    return x.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))


def _avgpool2_grad(g: np.ndarray) -> np.ndarray:
    c, h, w = g.shape
    return np.repeat(np.repeat(g, 2, axis=1), 2, axis=2) * 0.25


def _check_dims(img: np.ndarray, config: NetConfig) -> None:
    h, w = img.shape[:2]
    f = 2 ** config.num_pools
    if h % f or w % f:
        raise ValueError(
            f"input {w}x{h} not divisible by 2^{config.num_pools} (pool count)"
        )


def _forward_cached(img: np.ndarray, weights: Weights, config: NetConfig):
    """Run the net; returns (taps, cache) where cache holds pre-relu maps."""
    _check_dims(img, config)
    x = np.ascontiguousarray(img.transpose(2, 0, 1)).astype(np.float64, copy=False)
    taps = {}
    pre_relu = []
    for i, name in enumerate(config.block_names()):
        z = _conv3x3(x, weights.kernels[i], weights.biases[i])
        pre_relu.append(z)
        x = _avgpool2(np.maximum(z, 0.0))
        if name in config.tap_names:
            taps[name] = x
    # preserve tap_names order in the output map
    taps = {name: taps[name] for name in config.tap_names if name in taps}
    return taps, pre_relu


def forward(img: np.ndarray, weights: Weights, config: NetConfig) -> dict:
    """FeatureMaps: tap name -> (C, H, W) post-relu pooled activation."""
    taps, _ = _forward_cached(img, weights, config)
    return taps


def _backward(pre_relu, weights: Weights, config: NetConfig, cotangents: dict) -> np.ndarray:
    names = config.block_names()
    g = None
    for i in range(len(names) - 1, -1, -1):
        ct = cotangents.get(names[i])
        if ct is not None:
            c, zh, zw = pre_relu[i].shape
            expected = (c, zh // 2, zw // 2)
            if ct.shape != expected:
                raise ValueError(
                    f"cotangent for {names[i]} has shape {ct.shape}, expected {expected}"
                )
            g = ct.copy() if g is None else g + ct
        if g is None:
            continue
        g = _avgpool2_grad(g)
        g = g * (pre_relu[i] > 0)
        h, w = g.shape[1:]
        g = _conv3x3_input_grad(g, weights.kernels[i], h, w)
    if g is None:
        raise ValueError("no cotangents supplied")
    return g.transpose(1, 2, 0)


def input_gradient(
    img: np.ndarray, weights: Weights, config: NetConfig, cotangents: dict
) -> np.ndarray:
    """Vector-Jacobian product of `forward` at `img`, summed over taps.

    `cotangents` maps tap names to arrays shaped like the corresponding tap;
    taps without a cotangent contribute nothing. Returns an (H, W, 3) array.
    """
    unknown = set(cotangents) - set(config.tap_names)
    if unknown:
        raise ValueError(f"cotangents for unknown taps: {sorted(unknown)}")
    _, pre_relu = _forward_cached(img, weights, config)
    return _backward(pre_relu, weights, config, cotangents)

import numpy as np
import pytest

from stylelook import featurenet, styleopt
from stylelook.controls import ratio_from_u

FIXTURE_SEED = 2017


def fixture_pair(size=64, seed=FIXTURE_SEED):
    """Deterministic procedurally generated content/style pair.

    Content: smooth RGB gradients plus a soft disc. Style: blocky color
    noise with fine speckle, both from a Philox stream keyed by `seed`.
    """
    rng = np.random.Generator(np.random.Philox(key=seed))
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    r = np.hypot(xx - 0.35, yy - 0.4)
    disc = np.clip(1.0 - r / 0.25, 0.0, 1.0)
    content = np.stack([0.2 + 0.6 * xx, 0.3 + 0.5 * yy, 0.5 + 0.4 * disc], axis=-1)
    content = np.clip(content, 0.0, 1.0)
    block = size // 8
    coarse = rng.uniform(0.0, 1.0, (block, block, 3))
    style = np.repeat(np.repeat(coarse, 8, axis=0), 8, axis=1)
    style = np.clip(style + 0.15 * rng.standard_normal((size, size, 3)), 0.0, 1.0)
    return content, style


def total_loss_at(x, content_t, style_t, p, weights, cfg):
    """Loss value only, for finite-difference oracles."""
    taps = featurenet.forward(x, weights, cfg)
    c = styleopt.content_loss(taps, content_t, p.content_taps)
    s = styleopt.style_loss(taps, style_t, p.style_taps, p.style_tap_weights)
    return c + ratio_from_u(p.u) * s


def central_diff(f, x, step=1e-4):
    """Central finite differences of a scalar function over every element."""
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        d = np.zeros_like(x)
        d[idx] = step
        g[idx] = (f(x + d) - f(x - d)) / (2 * step)
    return g


@pytest.fixture(scope="session")
def pair64():
    return fixture_pair()


@pytest.fixture(scope="session")
def cfg_default():
    return featurenet.NetConfig()


@pytest.fixture(scope="session")
def cfg_tiny():
    """1-block net for gradient-check speed."""
    return featurenet.NetConfig((6,), seed=3)

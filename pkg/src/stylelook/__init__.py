"""stylelook: a look-development engine and batch CLI for neural style transfer.

Core pieces: float RGB image ops (`image`), a compact deterministic feature
network with exact input gradients (`featurenet`), Gram-matrix losses and the
Adam transfer loop (`styleopt`), the unrealness/resolution creative controls
(`controls`), the upscale/denoise/dissolve finishing chain (`finisher`), and
the manifest-driven batch CLI (`cli`).
"""

from .controls import LookSpec, SweepSpec, ratio_from_u, scaled_ratio, scaled_u
from .featurenet import NetConfig, Weights, forward, init_weights, input_gradient
from .finisher import DissolveCurve, FinishSpec, dissolve_weight, finish_frame, finish_sequence
from .image import Rect, load_image, save_image
from .styleopt import TransferParams, gram, run_transfer, total_loss_and_grad

__version__ = "0.1.0"

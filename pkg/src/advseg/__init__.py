"""Adversarial + cross-entropy building segmentation on a small numpy autodiff engine."""

from .tensor import Tensor, backward, grad_check, no_grad

__all__ = ["Tensor", "backward", "grad_check", "no_grad"]
__version__ = "0.1.0"

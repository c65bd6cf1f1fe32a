from . import layers, losses, optim, tensor, training
from .tensor import Tensor, no_grad

__all__ = ["layers", "losses", "optim", "tensor", "training", "Tensor", "no_grad"]

"""
Numerics Package

Small reverse-mode autodiff engine used by the autoencoder networks.
"""

from . import ops
from .checkpoint import load_arrays, save_arrays
from .optim import Adam, OptimizerState, adam_step
from .tensor import Parameter, Tape, Tensor, backward, get_tape, no_grad

__all__ = [
    'ops',
    'Tensor',
    'Parameter',
    'Tape',
    'backward',
    'get_tape',
    'no_grad',
    'Adam',
    'OptimizerState',
    'adam_step',
    'save_arrays',
    'load_arrays',
]

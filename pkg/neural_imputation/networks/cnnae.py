"""
CNNAE

Participant-specific masked autoencoder. Input rows are the zero-filled
signal and derivative channels of K electrodes (2K x T); outputs are four
K x T heads (signal mean / raw variance, derivative mean / raw variance)
and the latent sequence of length T / 8.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Union

import numpy as np

from ..exceptions import ShapeMismatchError
from ..numerics.tensor import Tensor, as_tensor
from ..services.masking import ElectrodeRole
from .config import CnnaeConfig
from .layers import Backbone, Module, OutputHeads

logger = logging.getLogger(__name__)


@dataclass
class ModelOutput:
    signal_mean: Tensor
    signal_raw_var: Tensor
    derivative_mean: Tensor
    derivative_raw_var: Tensor
    latent: Tensor

    @classmethod
    def from_heads(cls, heads: Dict[str, Tensor], latent: Tensor) -> 'ModelOutput':
        return cls(latent=latent, **heads)


@dataclass
class ImputationResult:
    """Signal-mean estimates with one scoring label per electrode."""

    series: np.ndarray  # (n, K, T) or (K, T)
    labels: List[str]


def check_length(length: int, config: CnnaeConfig) -> None:
    if length % config.temporal_reduction:
        raise ShapeMismatchError(
            f"Instance length {length} is not a multiple of {config.temporal_reduction}; "
            "the encoder reduces time by that factor"
        )


def check_input(x: Tensor, channels: int, config: CnnaeConfig) -> None:
    if x.ndim not in (2, 3) or x.shape[-2] != channels:
        raise ShapeMismatchError(f"Expected input with {channels} channel rows, got shape {x.shape}")
    check_length(x.shape[-1], config)


class CnnaeModel(Module):
    """
    Usage:
        model = CnnaeModel(n_electrodes=32, config=CnnaeConfig(), seed=0)
        out = model.forward(masked.model_input())
    """

    KIND = 'cnnae'

    def __init__(self, n_electrodes: int, config: Optional[CnnaeConfig] = None, seed: int = 0):
        self.config = (config or CnnaeConfig()).validate()
        self.n_electrodes = n_electrodes
        self.backbone = Backbone(2 * n_electrodes, self.config, np.random.default_rng([seed, 0]))
        self.heads = OutputHeads(self.config.units, n_electrodes, np.random.default_rng([seed, 1]))

    def forward(self, x: Union[np.ndarray, Tensor]) -> ModelOutput:
        x = as_tensor(x)
        check_input(x, 2 * self.n_electrodes, self.config)
        features, latent = self.backbone(x)
        return ModelOutput.from_heads(self.heads(features), latent)

    __call__ = forward

    def describe(self) -> Dict:
        return {'kind': self.KIND, 'config': self.config.to_dict(), 'n_electrodes': self.n_electrodes}


def forward_cnnae(model: CnnaeModel, masked_instance: Union[np.ndarray, Tensor]) -> ModelOutput:
    return model.forward(masked_instance)


def extract_imputations(output: ModelOutput, roles: np.ndarray) -> ImputationResult:
    """
    Take the signal-mean head as the estimate for every electrode.

    Electrodes observed in the input are reconstructions, masked ones are
    imputations and naturally-missing ones have no ground truth.
    """
    series = output.signal_mean.numpy().astype(np.float32)
    if series.shape[-2] != len(roles):
        raise ShapeMismatchError(f"{len(roles)} role flags for {series.shape[-2]} output rows")
    labels = [ElectrodeRole(int(r)).output_label for r in roles]
    return ImputationResult(series=series, labels=labels)

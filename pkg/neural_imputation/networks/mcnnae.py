"""
M-CNNAE

Joint multi-participant autoencoder: a per-participant 1x1 input head maps
2K_i rows to a shared width, one backbone is shared by everyone, and a
per-participant set of output heads restores K_i rows.
"""

import logging
from typing import Dict, List, Mapping, Optional, Union

import numpy as np

from ..exceptions import UnregisteredParticipantError
from ..numerics.tensor import Tensor, as_tensor
from .cnnae import ModelOutput, check_input
from .config import CnnaeConfig
from .layers import Backbone, Conv1d, Module, OutputHeads

logger = logging.getLogger(__name__)


class ParticipantHead(Module):
    def __init__(self, n_electrodes: int, config: CnnaeConfig, rng: np.random.Generator):
        self.n_electrodes = n_electrodes
        self.input = Conv1d(2 * n_electrodes, config.shared_width, 1, rng)
        self.heads = OutputHeads(config.units, n_electrodes, rng)


class McnnaeModel(Module):
    """
    Usage:
        model = McnnaeModel({0: 64, 1: 96}, CnnaeConfig(), seed=0)
        out = model.forward(1, masked.model_input())
    """

    KIND = 'mcnnae'

    def __init__(self, electrode_counts: Mapping[int, int], config: Optional[CnnaeConfig] = None, seed: int = 0):
        self.config = (config or CnnaeConfig()).validate()
        self.backbone = Backbone(self.config.shared_width, self.config, np.random.default_rng([seed, 0]))
        self.participant: Dict[str, ParticipantHead] = {}
        for participant in sorted(electrode_counts):
            self.register(participant, electrode_counts[participant], seed)

    def register(self, participant: int, n_electrodes: int, seed: int = 0) -> ParticipantHead:
        head = ParticipantHead(n_electrodes, self.config, np.random.default_rng([seed, 1, participant]))
        self.participant[str(participant)] = head
        logger.debug("Registered participant %s with %d electrodes", participant, n_electrodes)
        return head

    @property
    def participants(self) -> List[int]:
        return sorted(int(p) for p in self.participant)

    @property
    def electrode_counts(self) -> Dict[int, int]:
        return {int(p): head.n_electrodes for p, head in self.participant.items()}

    def head_for(self, participant: int) -> ParticipantHead:
        head = self.participant.get(str(participant))
        if head is None:
            raise UnregisteredParticipantError(
                f"Participant {participant} has no heads. Registered participants: "
                f"{', '.join(str(p) for p in self.participants) or 'none'}"
            )
        return head

    def shared_input(self, participant: int, x: Union[np.ndarray, Tensor]) -> Tensor:
        """Participant-independent representation fed to the backbone."""
        head = self.head_for(participant)
        x = as_tensor(x)
        check_input(x, 2 * head.n_electrodes, self.config)
        return head.input(x)

    def forward(self, participant: int, x: Union[np.ndarray, Tensor]) -> ModelOutput:
        head = self.head_for(participant)
        features, latent = self.backbone(self.shared_input(participant, x))
        return ModelOutput.from_heads(head.heads(features), latent)

    __call__ = forward

    def describe(self) -> Dict:
        return {
            'kind': self.KIND,
            'config': self.config.to_dict(),
            'electrode_counts': {str(p): k for p, k in sorted(self.electrode_counts.items())},
        }


def forward_mcnnae(model: McnnaeModel, participant: int, masked_instance: Union[np.ndarray, Tensor]) -> ModelOutput:
    return model.forward(participant, masked_instance)

"""
Autoencoder Imputers

Wrap CNNAE (one model per participant) and M-CNNAE (one joint model) behind
the imputer interface. fit() trains any participant that has no model yet;
impute() runs a no-grad forward pass and keeps the signal-mean head.
"""

import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from ..exceptions import UnregisteredParticipantError
from ..networks import CnnaeConfig, CnnaeModel, McnnaeModel, ModelOutput, extract_imputations, load_model, save_model
from ..numerics.tensor import no_grad
from ..services.masking import ElectrodeRole, MaskedInstances
from ..services.ragged_store import ElectrodeGeometry
from ..services.signal_pipeline import PreparedDataset
from ..training import TrainConfig, Trainer, TrainingResult
from .base import BaseImputer, ImputerOutput
from .registry import ImputerRegistry

logger = logging.getLogger(__name__)


def predict(forward: Callable[[np.ndarray], ModelOutput], masked: MaskedInstances, batch_size: int) -> ImputerOutput:
    """Batched inference without tape recording."""
    inputs = masked.model_input()
    chunks = []
    with no_grad():
        for start in range(0, len(inputs), batch_size):
            output = forward(inputs[start:start + batch_size])
            chunks.append(extract_imputations(output, masked.roles).series)
    n_electrodes = len(masked.roles)
    series = np.concatenate(chunks) if chunks else np.zeros((0, n_electrodes, inputs.shape[-1]), dtype=np.float32)
    return ImputerOutput(
        series=series,
        labels=[ElectrodeRole(int(r)).output_label for r in masked.roles],
        unimputable=np.zeros(n_electrodes, dtype=bool),
    )


@ImputerRegistry.register
class CnnaeImputer(BaseImputer):
    """
    Usage:
        imputer = CnnaeImputer(train_config=TrainConfig(epochs=20), out_dir='runs/x/train')
        imputer.fit(prepared)
        output = imputer.impute(0, masked)
    """

    IMPUTER_NAME = "cnnae"
    IMPUTER_DESCRIPTION = "Participant-specific masked convolutional autoencoder"

    def __init__(
        self,
        models: Optional[Dict[int, CnnaeModel]] = None,
        model_config: Optional[CnnaeConfig] = None,
        train_config: Optional[TrainConfig] = None,
        out_dir: Optional[str] = None,
        seed: int = 0,
        participants: Optional[List[int]] = None,
    ):
        self.models: Dict[int, CnnaeModel] = dict(models or {})
        self.model_config = model_config or CnnaeConfig()
        self.train_config = train_config or TrainConfig.for_model('cnnae', seed=seed)
        self.out_dir = Path(out_dir) if out_dir else None
        self.seed = seed
        self.participants = participants
        self.results: Dict[int, TrainingResult] = {}

    def fit(self, dataset: PreparedDataset, geometry: Optional[ElectrodeGeometry] = None,
            resume_from: Optional[str] = None) -> 'CnnaeImputer':
        for participant in self.participants or dataset.participants():
            if participant in self.models:
                continue
            model = CnnaeModel(dataset.electrode_count(participant), self.model_config, seed=self.seed)
            out = self.out_dir / f"p{participant}" if self.out_dir else None
            trainer = Trainer(model, self.train_config, str(out) if out else None)
            self.results[participant] = trainer.train(dataset, participant=participant, resume_from=resume_from)
            self.models[participant] = model
        return self

    def impute(self, participant: int, masked: MaskedInstances) -> ImputerOutput:
        model = self.models.get(participant)
        if model is None:
            raise UnregisteredParticipantError(
                f"No CNNAE for participant {participant}. Trained participants: "
                f"{', '.join(str(p) for p in sorted(self.models)) or 'none'}"
            )
        return predict(model.forward, masked, self.model_config.predict_batch_size)

    def save(self, out_dir: str) -> List[Path]:
        paths = []
        for participant, model in sorted(self.models.items()):
            paths.extend(save_model(model, str(Path(out_dir) / f"p{participant}" / 'model')))
        return paths

    @classmethod
    def load(cls, out_dir: str) -> 'CnnaeImputer':
        models = {}
        for arch in sorted(Path(out_dir).glob('p*/model.arch.json')):
            participant = int(arch.parent.name[1:])
            models[participant] = load_model(str(arch.parent / 'model'))
        config = next(iter(models.values())).config if models else None
        return cls(models=models, model_config=config)


@ImputerRegistry.register
class McnnaeImputer(BaseImputer):
    """Joint model over every participant with participant-specific heads."""

    IMPUTER_NAME = "mcnnae"
    IMPUTER_DESCRIPTION = "Multi-participant masked autoencoder with per-participant heads"

    def __init__(
        self,
        model: Optional[McnnaeModel] = None,
        model_config: Optional[CnnaeConfig] = None,
        train_config: Optional[TrainConfig] = None,
        out_dir: Optional[str] = None,
        seed: int = 0,
    ):
        self.model = model
        self.model_config = model.config if model else (model_config or CnnaeConfig())
        self.train_config = train_config or TrainConfig.for_model('mcnnae', seed=seed)
        self.out_dir = Path(out_dir) if out_dir else None
        self.seed = seed
        self.result: Optional[TrainingResult] = None

    def fit(self, dataset: PreparedDataset, geometry: Optional[ElectrodeGeometry] = None,
            resume_from: Optional[str] = None) -> 'McnnaeImputer':
        if self.model is None:
            counts = {p: dataset.electrode_count(p) for p in dataset.participants()}
            self.model = McnnaeModel(counts, self.model_config, seed=self.seed)
            trainer = Trainer(self.model, self.train_config, str(self.out_dir) if self.out_dir else None)
            self.result = trainer.train(dataset, resume_from=resume_from)
        return self

    def impute(self, participant: int, masked: MaskedInstances) -> ImputerOutput:
        if self.model is None:
            raise UnregisteredParticipantError("M-CNNAE has not been trained or loaded")
        return predict(
            lambda x: self.model.forward(participant, x), masked, self.model_config.predict_batch_size,
        )

    def save(self, out_dir: str) -> List[Path]:
        return save_model(self.model, str(Path(out_dir) / 'model'))

    @classmethod
    def load(cls, out_dir: str) -> 'McnnaeImputer':
        return cls(model=load_model(str(Path(out_dir) / 'model')))

"""
Trainer

Masked electrode modeling for CNNAE and M-CNNAE: every batch zero-fills a
random 5-10% of the observed electrodes and the Gaussian likelihood of all
observed electrodes (kept and masked) is maximized.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..exceptions import ConfigurationError, NonFiniteError, ShapeMismatchError, TrainingDivergedError
from ..networks import CnnaeModel, McnnaeModel, ModelOutput, save_model
from ..numerics import ops
from ..numerics.checkpoint import load_arrays, save_arrays
from ..numerics.optim import Adam
from ..numerics.tensor import Tensor, backward, get_tape
from ..services.masking import ElectrodeRole, mask_count, role_flags
from ..services.ragged_store import AvailabilitySets
from ..services.signal_pipeline import PreparedDataset, time_derivative

logger = logging.getLogger(__name__)

AutoencoderModel = Union[CnnaeModel, McnnaeModel]


@dataclass
class TrainConfig:
    mask_low: float = 0.05
    mask_high: float = 0.10
    epochs: int = 100
    batch_size: int = 16
    per_participant_batch: int = 2
    learning_rate: float = 1e-4
    lambda_slow: float = 0.0
    lambda_margin: float = 0.0
    margin: float = 1.0
    seed: int = 0
    checkpoint_every: int = 10

    EPOCH_DEFAULTS = {'cnnae': 100, 'mcnnae': 45}

    @classmethod
    def for_model(cls, kind: str, **overrides) -> 'TrainConfig':
        return cls(**{'epochs': cls.EPOCH_DEFAULTS[kind], **overrides}).validate()

    def validate(self) -> 'TrainConfig':
        if not 0 < self.mask_low <= self.mask_high < 1:
            raise ConfigurationError(
                f"Mask fraction range must satisfy 0 < low <= high < 1, got [{self.mask_low}, {self.mask_high}]"
            )
        if self.epochs < 1 or self.batch_size < 1 or self.per_participant_batch < 1:
            raise ConfigurationError("epochs and batch sizes must be positive")
        if self.learning_rate <= 0 or self.checkpoint_every < 1:
            raise ConfigurationError("learning_rate and checkpoint_every must be positive")
        if self.lambda_slow < 0 or self.lambda_margin < 0:
            raise ConfigurationError("Regularizer weights must be non-negative")
        return self

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainConfig':
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigurationError(
                f"Unknown trainer keys {sorted(unknown)}. Allowed keys: {sorted(allowed)}"
            )
        return cls(**data).validate()

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class TrainingBatch:
    inputs: np.ndarray             # (B, 2K, T) zero-filled signal + derivative
    roles: np.ndarray              # (B, K) ElectrodeRole codes
    signal_targets: np.ndarray     # (B, K, T)
    derivative_targets: np.ndarray  # (B, K, T)
    fraction: float

    @property
    def target_weights(self) -> np.ndarray:
        """1 on electrodes with ground truth, 0 on naturally-missing ones; (B, K, 1)."""
        return (self.roles != ElectrodeRole.MISSING).astype(np.float64)[..., None]


@dataclass
class TrainingResult:
    model: AutoencoderModel
    loss_curve: List[Tuple[int, float]] = field(default_factory=list)
    checkpoints: List[Path] = field(default_factory=list)
    loss_csv: Optional[Path] = None


def masked_batch(
    instances: np.ndarray,
    availability: Union[AvailabilitySets, Sequence[AvailabilitySets]],
    config: TrainConfig,
    rng: np.random.Generator,
) -> TrainingBatch:
    """
    Zero-fill a random subset of observed electrodes in every instance.

    One fraction is drawn per batch from [mask_low, mask_high]; each
    instance then masks round_half_up(fraction * |observed|) electrodes
    (at least one) chosen independently.

    Args:
        instances: (B, K, T) train-day instances
        availability: One AvailabilitySets for the whole batch or one per instance
        config: Trainer config holding the fraction range
        rng: Generator owned by the caller

    Returns:
        TrainingBatch
    """
    values = np.asarray(instances, dtype=np.float64)
    if values.ndim != 3:
        raise ShapeMismatchError(f"Expected (batch, electrodes, steps) instances, got {values.shape}")
    if isinstance(availability, AvailabilitySets):
        availability = [availability] * len(values)
    if len(availability) != len(values):
        raise ShapeMismatchError(f"{len(availability)} availability sets for {len(values)} instances")

    fraction = float(rng.uniform(config.mask_low, config.mask_high))
    derivative = time_derivative(values)
    roles = np.empty(values.shape[:2], dtype=np.int8)
    for index, sets in enumerate(availability):
        observed = np.array(sets.observed_ids(), dtype=int)
        count = mask_count(fraction, observed.size)
        masked = rng.choice(observed, size=count, replace=False) if count else []
        roles[index] = role_flags(sets, masked)

    hidden = (roles != ElectrodeRole.OBSERVED)[..., None]
    signal_in = np.where(hidden, 0.0, values)
    derivative_in = np.where(hidden, 0.0, derivative)
    return TrainingBatch(
        inputs=np.concatenate([signal_in, derivative_in], axis=1),
        roles=roles,
        signal_targets=np.where(roles[..., None] == ElectrodeRole.MISSING, 0.0, values),
        derivative_targets=np.where(roles[..., None] == ElectrodeRole.MISSING, 0.0, derivative),
        fraction=fraction,
    )


def slowness_penalty(latent: Tensor) -> Tensor:
    """mean over time of ||z_t - z_{t-1}||^2."""
    return ops.mean(ops.sum(ops.square(ops.temporal_difference(latent)), axis=-2))


def margin_penalty(latent: Tensor, margin: float) -> Tensor:
    """mean over time of max(0, ||z_t||^2 - margin)."""
    return ops.mean(ops.relu(ops.sub(ops.sum(ops.square(latent), axis=-2), margin)))


def training_loss(output: ModelOutput, batch: TrainingBatch, config: TrainConfig) -> Tensor:
    """
    Signal and derivative NLL restricted to electrodes with ground truth,
    plus the optional latent regularizers.
    """
    weights = batch.target_weights
    loss = ops.add(
        ops.gaussian_nll(batch.signal_targets, output.signal_mean, output.signal_raw_var, weights),
        ops.gaussian_nll(batch.derivative_targets, output.derivative_mean, output.derivative_raw_var, weights),
    )
    # Approximate forms; both weights default to 0
    if config.lambda_slow:
        loss = ops.add(loss, ops.mul(slowness_penalty(output.latent), config.lambda_slow))
    if config.lambda_margin:
        loss = ops.add(loss, ops.mul(margin_penalty(output.latent, config.margin), config.lambda_margin))
    return loss


class Trainer:
    """
    Epoch loop shared by both models.

    CNNAE trains on one participant with batches of `batch_size`; M-CNNAE
    draws `per_participant_batch` instances from every registered
    participant per step and averages their losses.

    Usage:
        trainer = Trainer(model, TrainConfig(epochs=20), out_dir='runs/x/train')
        result = trainer.train(prepared, participant=0)
    """

    def __init__(self, model: AutoencoderModel, config: TrainConfig, out_dir: Optional[str] = None):
        self.model = model
        self.config = config.validate()
        self.out_dir = Path(out_dir) if out_dir else None
        self.optimizer = Adam(model.parameters(), lr=config.learning_rate)
        self.last_checkpoint: Optional[Path] = None

    @property
    def is_joint(self) -> bool:
        return isinstance(self.model, McnnaeModel)

    def _forward(self, participant: int, inputs: np.ndarray) -> ModelOutput:
        if self.is_joint:
            return self.model.forward(participant, inputs)
        return self.model.forward(inputs)

    def _pools(self, dataset: PreparedDataset, participants: Sequence[int]) -> Dict[int, List[Tuple[int, int]]]:
        pools = {}
        for participant in participants:
            pool = [
                (day, index)
                for day in dataset.train_days(participant)
                for index in range(len(dataset.day(participant, day).instances))
            ]
            if not pool:
                raise ConfigurationError(f"Participant {participant} has no train-day instances")
            pools[participant] = pool
        return pools

    def _gather(self, dataset: PreparedDataset, participant: int, picks: Sequence[Tuple[int, int]]):
        instances = np.stack([dataset.day(participant, day).instances[index] for day, index in picks])
        availability = [dataset.day(participant, day).availability() for day, _ in picks]
        return instances, availability

    def _epoch_steps(self, pools, epoch: int) -> List[List[Tuple[int, List[Tuple[int, int]]]]]:
        """Deterministic per-epoch schedule of (participant, picks) groups."""
        shuffle = np.random.default_rng([self.config.seed, epoch, 0])
        orders = {p: [pool[i] for i in shuffle.permutation(len(pool))] for p, pool in pools.items()}
        if not self.is_joint:
            (participant, order), = orders.items()
            size = self.config.batch_size
            return [[(participant, order[i:i + size])] for i in range(0, len(order), size)]

        size = self.config.per_participant_batch
        n_steps = max(math.ceil(len(order) / size) for order in orders.values())
        steps = []
        for step in range(n_steps):
            group = []
            for participant, order in orders.items():
                picks = [order[(step * size + j) % len(order)] for j in range(size)]
                group.append((participant, picks))
            steps.append(group)
        return steps

    def train(
        self,
        dataset: PreparedDataset,
        participant: Optional[int] = None,
        resume_from: Optional[str] = None,
    ) -> TrainingResult:
        if self.is_joint:
            participants = self.model.participants
        else:
            if participant is None:
                if len(dataset.participants()) != 1:
                    raise ConfigurationError("CNNAE training needs a participant when the dataset has several")
                participant = dataset.participants()[0]
            participants = [participant]
        pools = self._pools(dataset, participants)

        result = TrainingResult(model=self.model)
        start_epoch = 1
        if resume_from:
            start_epoch, result.loss_curve = self.restore(resume_from)
            start_epoch += 1
            logger.info("Resuming training at epoch %d from %s", start_epoch, resume_from)

        for epoch in range(start_epoch, self.config.epochs + 1):
            mask_rng = np.random.default_rng([self.config.seed, epoch, 1])
            losses = []
            try:
                for group in self._epoch_steps(pools, epoch):
                    losses.append(self._step(dataset, group, mask_rng))
            except NonFiniteError as exc:
                self._handle_divergence(epoch, exc)
            epoch_loss = float(np.mean(losses))
            result.loss_curve.append((epoch, epoch_loss))
            logger.info("Epoch %d/%d loss %.4f", epoch, self.config.epochs, epoch_loss)
            if epoch % self.config.checkpoint_every == 0 or epoch == self.config.epochs:
                result.checkpoints.extend(self.checkpoint(epoch, result.loss_curve))

        if self.out_dir:
            result.checkpoints.extend(save_model(self.model, str(self.out_dir / 'model')))
            result.loss_csv = self.write_loss_curve(result.loss_curve)
        return result

    def _step(self, dataset: PreparedDataset, group, mask_rng: np.random.Generator) -> float:
        get_tape().clear()
        self.optimizer.zero_grad()
        total = None
        for participant, picks in group:
            instances, availability = self._gather(dataset, participant, picks)
            batch = masked_batch(instances, availability, self.config, mask_rng)
            loss = training_loss(self._forward(participant, batch.inputs), batch, self.config)
            total = loss if total is None else ops.add(total, loss)
        if len(group) > 1:
            total = ops.mul(total, 1.0 / len(group))
        backward(total)
        self.optimizer.step()
        return total.item()

    def _handle_divergence(self, epoch: int, exc: NonFiniteError) -> None:
        get_tape().clear()
        if self.last_checkpoint is not None:
            self.restore(str(self.last_checkpoint))
        logger.error("Training diverged at epoch %d: %s", epoch, exc)
        restored = f"restored from {self.last_checkpoint}" if self.last_checkpoint else "no checkpoint to restore"
        raise TrainingDivergedError(
            f"Loss became non-finite at epoch {epoch} ({exc}); {restored}",
            epoch=epoch,
            checkpoint_path=self.last_checkpoint,
        ) from exc

    def checkpoint(self, epoch: int, loss_curve: List[Tuple[int, float]]) -> List[Path]:
        """Save parameters, optimizer moments and the epoch counter."""
        if self.out_dir is None:
            return []
        stem = self.out_dir / 'checkpoints' / f"epoch_{epoch:03d}"
        paths = save_model(self.model, str(stem))
        state = self.optimizer.state_dict()
        moments = {f"m/{k}": a for k, a in state.pop('m').items()}
        moments.update({f"v/{k}": a for k, a in state.pop('v').items()})
        paths.extend(save_arrays(moments, f"{stem}.optim"))
        trainer_path = Path(f"{stem}.trainer.json")
        with open(trainer_path, 'w', encoding='utf-8') as f:
            json.dump(
                {'epoch': epoch, 'optimizer': state, 'loss_curve': [list(p) for p in loss_curve]},
                f, indent=2, sort_keys=True,
            )
        paths.append(trainer_path)
        self.last_checkpoint = stem
        logger.info("Checkpoint for epoch %d written to %s", epoch, stem)
        return paths

    def restore(self, stem: str) -> Tuple[int, List[Tuple[int, float]]]:
        self.model.load_arrays(load_arrays(stem))
        with open(f"{stem}.trainer.json", 'r', encoding='utf-8') as f:
            saved = json.load(f)
        arrays = load_arrays(f"{stem}.optim")
        state = dict(saved['optimizer'])
        state['m'] = {k[2:]: a for k, a in arrays.items() if k.startswith('m/')}
        state['v'] = {k[2:]: a for k, a in arrays.items() if k.startswith('v/')}
        self.optimizer.load_state_dict(state)
        self.last_checkpoint = Path(stem)
        curve = [(int(e), float(l)) for e, l in saved['loss_curve']]
        return int(saved['epoch']), curve

    def write_loss_curve(self, loss_curve: List[Tuple[int, float]]) -> Path:
        path = self.out_dir / 'loss.csv'
        frame = pd.DataFrame(loss_curve, columns=['epoch', 'loss'])
        frame.to_csv(path, index=False, float_format='%.6f', lineterminator='\n')
        return path


def train(model: AutoencoderModel, dataset: PreparedDataset, config: TrainConfig,
          out_dir: Optional[str] = None, participant: Optional[int] = None) -> TrainingResult:
    return Trainer(model, config, out_dir).train(dataset, participant=participant)

"""
Linear Nearest-Neighbor Imputer

Each electrode is estimated as the weighted sum of its three nearest
neighbors (Euclidean distance). Weights are the mean Pearson correlation
between electrode and neighbor over all train-day instances; on the test day
only neighbors that are observed in the input contribute.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from ..exceptions import ConfigurationError, ShapeMismatchError, UnregisteredParticipantError
from ..services.evaluation import pearson_rows
from ..services.masking import ElectrodeRole, MaskedInstances
from ..services.ragged_store import ElectrodeGeometry
from ..services.signal_pipeline import PreparedDataset
from .base import BaseImputer, ImputerOutput
from .registry import ImputerRegistry

logger = logging.getLogger(__name__)

DEFAULT_NEIGHBORS = 3
WEIGHTS_FILE = 'weights.json'


@dataclass
class NeighborWeights:
    """Per target electrode: (neighbor id, weight) pairs ordered by distance."""

    participant: int
    neighbors: Dict[int, List[Tuple[int, float]]] = field(default_factory=dict)
    unimputable: List[int] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            'participant': self.participant,
            'electrodes': [
                {'electrode': target, 'neighbors': [{'id': n, 'weight': w} for n, w in pairs]}
                for target, pairs in sorted(self.neighbors.items())
            ],
            'unimputable': sorted(self.unimputable),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'NeighborWeights':
        return cls(
            participant=int(data['participant']),
            neighbors={
                int(entry['electrode']): [(int(n['id']), float(n['weight'])) for n in entry['neighbors']]
                for entry in data['electrodes']
            },
            unimputable=[int(e) for e in data['unimputable']],
        )


def neighbor_table(positions: np.ndarray, k: int = DEFAULT_NEIGHBORS) -> Dict[int, List[int]]:
    """
    k nearest distinct electrodes per target, nearest first.

    Ties are broken by lower electrode id. With fewer than k + 1 electrodes
    every other electrode is used and a warning is logged.
    """
    positions = np.asarray(positions, dtype=np.float64)
    count = len(positions)
    if count < k + 1:
        logger.warning("Only %d electrodes for %d neighbors; using all %d available", count, k, max(count - 1, 0))
    distances = cdist(positions, positions, metric='euclidean')
    ids = np.arange(count)
    table = {}
    for target in range(count):
        others = ids[ids != target]
        order = np.lexsort((others, distances[target, others]))
        table[target] = [int(e) for e in others[order][:k]]
    return table


def fit_weights(
    dataset: PreparedDataset,
    participant: int,
    table: Dict[int, List[int]],
    train_days: Optional[Sequence[int]] = None,
) -> NeighborWeights:
    """
    Mean per-instance Pearson correlation between each target and its neighbors.

    Pairs are only scored on days where both electrodes are observed, and
    instances where either side is flat are skipped. Neighbors without any
    shared data are dropped; a target left with no neighbor is unimputable.
    """
    days = list(train_days) if train_days is not None else dataset.train_days(participant)
    sums: Dict[Tuple[int, int], float] = {}
    counts: Dict[Tuple[int, int], int] = {}
    for day in days:
        prepared = dataset.day(participant, day)
        if len(prepared.instances) == 0:
            continue
        observed = ~prepared.missing
        for target, neighbors in table.items():
            if not observed[target]:
                continue
            for neighbor in neighbors:
                if not observed[neighbor]:
                    continue
                values, degenerate = pearson_rows(prepared.instances[:, target], prepared.instances[:, neighbor])
                valid = values[~degenerate]
                sums[(target, neighbor)] = sums.get((target, neighbor), 0.0) + float(valid.sum())
                counts[(target, neighbor)] = counts.get((target, neighbor), 0) + int(valid.size)

    weights = NeighborWeights(participant=participant)
    for target, neighbors in sorted(table.items()):
        pairs = []
        for neighbor in neighbors:
            n = counts.get((target, neighbor), 0)
            if n == 0:
                logger.info("Participant %s: dropping neighbor %d of electrode %d (no shared train data)",
                            participant, neighbor, target)
                continue
            pairs.append((neighbor, sums[(target, neighbor)] / n))
        weights.neighbors[target] = pairs
        if not pairs:
            weights.unimputable.append(target)
    if weights.unimputable:
        logger.warning("Participant %s: electrodes %s have no usable neighbors", participant, weights.unimputable)
    return weights


def impute_linear(
    instances: np.ndarray,
    weights: NeighborWeights,
    observed: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Weighted neighbor sum for every electrode.

    Args:
        instances: (n, K, T) test-day instances (zero-filled where not observed)
        weights: Fitted neighbor weights
        observed: (K,) bool, electrodes present in the input

    Returns:
        (series (n, K, T), unimputable (K,) bool); electrodes without an
        observed neighbor are zeros and flagged
    """
    values = np.asarray(instances, dtype=np.float64)
    if values.ndim != 3 or values.shape[1] != len(observed):
        raise ShapeMismatchError(f"Expected (n, {len(observed)}, T) instances, got {values.shape}")
    series = np.zeros_like(values)
    unimputable = np.zeros(len(observed), dtype=bool)
    for target in range(len(observed)):
        pairs = [(n, w) for n, w in weights.neighbors.get(target, []) if observed[n]]
        if not pairs:
            unimputable[target] = True
            continue
        for neighbor, weight in pairs:
            series[:, target] += weight * values[:, neighbor]
    return series, unimputable


def save_weights(weights: Iterable[NeighborWeights], path: str) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, 'w', encoding='utf-8') as f:
        json.dump([w.to_dict() for w in weights], f, indent=2, sort_keys=True)
    return out


def load_weights(path: str) -> Dict[int, NeighborWeights]:
    with open(path, 'r', encoding='utf-8') as f:
        return {w.participant: w for w in (NeighborWeights.from_dict(d) for d in json.load(f))}


@ImputerRegistry.register
class LinearImputer(BaseImputer):
    """
    Usage:
        imputer = LinearImputer().fit(prepared, geometry)
        output = imputer.impute(0, masked)
    """

    IMPUTER_NAME = "baseline"
    IMPUTER_DESCRIPTION = "Correlation-weighted sum of the 3 nearest electrodes"

    def __init__(self, k: int = DEFAULT_NEIGHBORS, weights: Optional[Dict[int, NeighborWeights]] = None):
        self.k = k
        self.weights: Dict[int, NeighborWeights] = dict(weights or {})

    def fit(self, dataset: PreparedDataset, geometry: Optional[ElectrodeGeometry] = None) -> 'LinearImputer':
        if geometry is None:
            raise ConfigurationError("The linear imputer needs electrode geometry")
        for participant in dataset.participants():
            table = neighbor_table(geometry.for_participant(participant), self.k)
            self.weights[participant] = fit_weights(dataset, participant, table)
            logger.info("Fitted neighbor weights for participant %s", participant)
        return self

    def save(self, out_dir: str) -> List[Path]:
        return [save_weights([self.weights[p] for p in sorted(self.weights)], str(Path(out_dir) / WEIGHTS_FILE))]

    @classmethod
    def load(cls, out_dir: str) -> 'LinearImputer':
        return cls(weights=load_weights(str(Path(out_dir) / WEIGHTS_FILE)))

    def impute(self, participant: int, masked: MaskedInstances) -> ImputerOutput:
        if participant not in self.weights:
            raise UnregisteredParticipantError(
                f"No neighbor weights for participant {participant}. Fitted participants: "
                f"{', '.join(str(p) for p in sorted(self.weights)) or 'none'}"
            )
        series, unimputable = impute_linear(
            masked.signal, self.weights[participant], masked.roles == ElectrodeRole.OBSERVED,
        )
        return ImputerOutput(
            series=series.astype(np.float32),
            labels=[ElectrodeRole(int(r)).output_label for r in masked.roles],
            unimputable=unimputable,
        )

"""
Masking Service

Builds deterministic sets of artificially-missing electrodes (mask plans) and
applies them to instances by zero-filling both input channels.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..exceptions import MaskPlanError, ShapeMismatchError
from .ragged_store import AvailabilitySets
from .signal_pipeline import round_half_up, time_derivative

logger = logging.getLogger(__name__)

DEFAULT_REGIMES = (0.0, 0.10, 0.20, 0.50)

RECONSTRUCTION = 'reconstruction'
IMPUTATION = 'imputation'
NO_GROUND_TRUTH = 'no-ground-truth'


class ElectrodeRole(IntEnum):
    """Role of an electrode in a model input."""

    OBSERVED = 0
    MASKED = 1
    MISSING = 2

    @property
    def label(self) -> str:
        return {
            ElectrodeRole.OBSERVED: 'observed-input',
            ElectrodeRole.MASKED: 'masked-input',
            ElectrodeRole.MISSING: 'naturally-missing',
        }[self]

    @property
    def output_label(self) -> str:
        """How a model output for this electrode is scored."""
        return {
            ElectrodeRole.OBSERVED: RECONSTRUCTION,
            ElectrodeRole.MASKED: IMPUTATION,
            ElectrodeRole.MISSING: NO_GROUND_TRUTH,
        }[self]


@dataclass(frozen=True)
class MaskPlan:
    """Electrodes artificially masked on one participant-day."""

    participant: int
    day: int
    p: float
    seed: int
    set_index: int
    masked: Tuple[int, ...] = field(default_factory=tuple)

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['masked'] = list(self.masked)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> 'MaskPlan':
        return cls(
            participant=int(data['participant']),
            day=int(data['day']),
            p=float(data['p']),
            seed=int(data['seed']),
            set_index=int(data['set_index']),
            masked=tuple(int(e) for e in data['masked']),
        )


def mask_count(p: float, n_observed: int) -> int:
    """round(p * n) rounded half-up, at least one electrode when p > 0."""
    if p <= 0:
        return 0
    return min(n_observed, max(1, round_half_up(p * n_observed)))


def make_mask_plan(availability: AvailabilitySets, p: float, n_sets: int, seed: int) -> List[MaskPlan]:
    """
    Sample `n_sets` masks uniformly without replacement from the observed set.

    Args:
        availability: Observed / naturally-missing split of the day
        p: Fraction of observed electrodes to mask
        n_sets: Number of independent mask sets
        seed: Seed; identical seeds give identical plans

    Returns:
        List of MaskPlan, one per set index
    """
    if not 0.0 <= p <= 1.0:
        raise MaskPlanError(f"Mask fraction must lie in [0, 1], got {p}")
    observed = np.array(availability.observed_ids(), dtype=int)
    if p > 0 and observed.size == 0:
        raise MaskPlanError(
            f"Cannot mask {p:.0%} of participant {availability.participant} day {availability.day}: "
            "no observed electrodes"
        )

    count = mask_count(p, observed.size)
    plans = []
    for set_index in range(n_sets):
        rng = np.random.default_rng([seed, availability.participant, availability.day, set_index])
        chosen = rng.choice(observed, size=count, replace=False) if count else np.array([], dtype=int)
        plans.append(MaskPlan(
            participant=availability.participant,
            day=availability.day,
            p=float(p),
            seed=int(seed),
            set_index=set_index,
            masked=tuple(sorted(int(e) for e in chosen)),
        ))
    return plans


@dataclass
class MaskedInstances:
    """Zero-filled model input with per-electrode roles."""

    signal: np.ndarray      # (n, K, T)
    derivative: np.ndarray  # (n, K, T)
    roles: np.ndarray       # (K,) ElectrodeRole codes

    def model_input(self) -> np.ndarray:
        """Stack signal and derivative rows into (n, 2K, T)."""
        return np.concatenate([self.signal, self.derivative], axis=1)

    def electrodes_with(self, role: ElectrodeRole) -> List[int]:
        return [int(e) for e in np.flatnonzero(self.roles == role)]


def role_flags(availability: AvailabilitySets, masked: Sequence[int]) -> np.ndarray:
    roles = np.full(availability.electrode_count, ElectrodeRole.OBSERVED, dtype=np.int8)
    roles[list(availability.missing)] = ElectrodeRole.MISSING
    roles[list(masked)] = ElectrodeRole.MASKED
    return roles


def apply_mask(instances: np.ndarray, plan: MaskPlan, availability: AvailabilitySets) -> MaskedInstances:
    """
    Zero-fill masked and naturally-missing rows.

    The derivative channel is computed from the unmasked instance and then
    zero-filled on the same rows, so masked rows carry no information.
    """
    values = np.asarray(instances)
    if values.ndim == 2:
        values = values[None]
    if values.ndim != 3 or values.shape[1] != availability.electrode_count:
        raise ShapeMismatchError(
            f"Expected (n, {availability.electrode_count}, T) instances, got {np.asarray(instances).shape}"
        )
    outside = sorted(set(plan.masked) - availability.observed)
    if outside:
        raise MaskPlanError(
            f"Mask plan references electrodes {outside} outside the observed set of participant "
            f"{availability.participant} day {availability.day}"
        )

    roles = role_flags(availability, plan.masked)
    signal = values.copy()
    derivative = time_derivative(values)
    hidden = roles != ElectrodeRole.OBSERVED
    signal[:, hidden] = 0
    derivative[:, hidden] = 0
    return MaskedInstances(signal=signal, derivative=derivative, roles=roles)


def save_mask_plans(plans: Sequence[MaskPlan], path: str) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, 'w', encoding='utf-8') as f:
        json.dump([plan.to_dict() for plan in plans], f, indent=2, sort_keys=True)
    return out


def load_mask_plans(path: str) -> List[MaskPlan]:
    with open(path, 'r', encoding='utf-8') as f:
        return [MaskPlan.from_dict(entry) for entry in json.load(f)]

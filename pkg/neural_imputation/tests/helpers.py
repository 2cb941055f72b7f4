"""Small in-memory fixtures shared by the test modules."""

import dataclasses
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..networks.config import CnnaeConfig
from ..services.ragged_store import DayRecording, ElectrodeGeometry, RaggedRecording
from ..services.signal_pipeline import PipelineConfig, PreparedDataset, PreparedDay
from ..services.synth_generator import GeneratorConfig


def tiny_recording(
    participants: int = 2,
    electrodes: int = 4,
    days: int = 2,
    n_samples: int = 1200,
    rate: float = 500.0,
    missing: Optional[Dict[Tuple[int, int], Sequence[int]]] = None,
    seed: int = 0,
) -> Tuple[RaggedRecording, ElectrodeGeometry]:
    """White-noise recording with electrodes on a line 1 mm apart."""
    rng = np.random.default_rng(seed)
    records = {}
    for p in range(participants):
        for d in range(days):
            flags = np.zeros(electrodes, dtype=bool)
            flags[list((missing or {}).get((p, d), []))] = True
            samples = rng.standard_normal((electrodes, n_samples)).astype(np.float32)
            samples[flags] = 0.0
            records[(p, d)] = DayRecording(p, d, rate, samples, flags)
    geometry = ElectrodeGeometry({
        p: np.stack([np.arange(electrodes, dtype=float), np.zeros(electrodes), np.zeros(electrodes)], axis=1)
        for p in range(participants)
    })
    return RaggedRecording({p: electrodes for p in range(participants)}, records), geometry


def correlated_dataset(
    participants: int = 2,
    electrodes: int = 5,
    days: int = 3,
    n_instances: int = 6,
    length: int = 32,
    noise: float = 0.2,
    missing: Optional[Dict[Tuple[int, int], Sequence[int]]] = None,
    seed: int = 0,
) -> PreparedDataset:
    """Prepared instances driven by two shared latents with fixed per-participant mixing."""
    rng = np.random.default_rng(seed)
    prepared = {}
    for p in range(participants):
        mixing = rng.uniform(0.5, 1.5, size=(electrodes, 2))
        for d in range(days):
            latents = rng.standard_normal((n_instances, 2, length)).cumsum(axis=-1)
            instances = np.einsum('kl,nlt->nkt', mixing, latents)
            instances += noise * rng.standard_normal(instances.shape)
            flags = np.zeros(electrodes, dtype=bool)
            flags[list((missing or {}).get((p, d), []))] = True
            instances[:, flags] = 0.0
            prepared[(p, d)] = PreparedDay(p, d, instances.astype(np.float32), flags, 5.0)
    return PreparedDataset(prepared, PipelineConfig())


def line_geometry(participants: int, electrodes: int) -> ElectrodeGeometry:
    return ElectrodeGeometry({
        p: np.stack([np.arange(electrodes, dtype=float), np.zeros(electrodes), np.zeros(electrodes)], axis=1)
        for p in range(participants)
    })


def tiny_model_config(**overrides) -> CnnaeConfig:
    base = CnnaeConfig(z_dim=4, units=8, shared_width=6, predict_batch_size=4)
    return dataclasses.replace(base, **overrides).validate()


def small_generator(**overrides) -> GeneratorConfig:
    base = GeneratorConfig(
        participants=2, electrodes=9, days=2, day_samples=6000, n_latents=3,
        length_scale_mm=8.0, noise_std=0.2, seed=3,
    )
    return dataclasses.replace(base, **overrides).validate()

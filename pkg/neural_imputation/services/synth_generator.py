"""
Synthetic Generator Service

Deterministic stand-in for multi-day intracranial recordings with known
structure:
- L oscillatory AR(2) latent sources per participant, each with a 3-D position
- a mixing matrix A[e, l] = exp(-d(e, l)^2 / l^2) shared by all days
- independent latent realizations per day
- multiplicative per-day electrode gain drift and white sensor noise

The mixing description and latents are written to a sidecar next to the
dataset so tests can compute oracle bounds without the imputers ever seeing
them. Noise realizations are regenerated from the seed on demand.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal
from scipy.spatial.distance import cdist

from ..exceptions import ConfigurationError, InvalidBandError, ScheduleOverlapError, UnstableProcessError
from ..numerics.checkpoint import load_arrays, save_arrays
from .ragged_store import DayRecording, ElectrodeGeometry, RaggedRecording
from .signal_pipeline import check_band

logger = logging.getLogger(__name__)

BURN_IN = 2000
REST, MOVE = 0, 1
LABEL_NAMES = {REST: 'rest', MOVE: 'move'}


@dataclass
class GeneratorConfig:
    participants: int = 4
    electrodes: int = 32
    days: int = 3
    day_samples: int = 150000
    sampling_rate: float = 500.0
    n_latents: int = 8
    # One oscillation frequency per latent; geometric 0.2-40 Hz when empty
    latent_frequencies: List[float] = field(default_factory=list)
    pole_radius: float = 0.99
    # Explicit (a1, a2) pairs override frequencies / pole radius
    ar_coefficients: List[List[float]] = field(default_factory=list)
    electrode_spacing_mm: float = 5.0
    length_scale_mm: float = 10.0
    noise_std: float = 0.3
    gain_drift_std: float = 0.1
    natural_missing_prob: float = 0.0
    max_missing_fraction: float = 0.2
    seed: int = 0

    def validate(self) -> 'GeneratorConfig':
        if min(self.participants, self.electrodes, self.days, self.day_samples, self.n_latents) < 1:
            raise ConfigurationError("Counts and day length must be positive")
        if self.length_scale_mm <= 0:
            raise ConfigurationError("length_scale_mm must be positive")
        if self.noise_std < 0 or self.gain_drift_std < 0:
            raise ConfigurationError("Noise and gain-drift spreads must be non-negative")
        if not 0 <= self.natural_missing_prob <= 1 or not 0 <= self.max_missing_fraction <= 1:
            raise ConfigurationError("Missing probabilities must lie in [0, 1]")
        if self.latent_frequencies and len(self.latent_frequencies) != self.n_latents:
            raise ConfigurationError(f"Expected {self.n_latents} latent frequencies")
        for a1, a2 in self.coefficients():
            check_stationary(a1, a2)
        return self

    def coefficients(self) -> List[Tuple[float, float]]:
        if self.ar_coefficients:
            if len(self.ar_coefficients) != self.n_latents:
                raise ConfigurationError(f"Expected {self.n_latents} AR(2) coefficient pairs")
            return [(float(a1), float(a2)) for a1, a2 in self.ar_coefficients]
        frequencies = self.latent_frequencies or list(np.geomspace(0.2, 40.0, self.n_latents))
        r = self.pole_radius
        return [
            (2.0 * r * math.cos(2.0 * math.pi * f / self.sampling_rate), -r * r)
            for f in frequencies
        ]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GeneratorConfig':
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigurationError(
                f"Unknown generator keys {sorted(unknown)}. Allowed keys: {sorted(allowed)}"
            )
        return cls(**data).validate()

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def check_stationary(a1: float, a2: float) -> None:
    """Roots of z^2 - a1 z - a2 must lie strictly inside the unit circle."""
    roots = np.roots([1.0, -a1, -a2])
    if np.any(np.abs(roots) >= 1.0):
        raise UnstableProcessError(
            f"AR(2) coefficients ({a1}, {a2}) are not stationary: root moduli {np.abs(roots).round(4).tolist()}"
        )


def ar2_innovation_scale(a1: float, a2: float) -> float:
    """Innovation std giving a unit stationary variance."""
    variance = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2) ** 2 - a1 ** 2))
    return 1.0 / math.sqrt(variance)


def ar2_process(a1: float, a2: float, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    check_stationary(a1, a2)
    innovations = rng.standard_normal(n_samples + BURN_IN) * ar2_innovation_scale(a1, a2)
    return signal.lfilter([1.0], [1.0, -a1, -a2], innovations)[BURN_IN:]


def electrode_grid(count: int, spacing_mm: float, rng: np.random.Generator) -> np.ndarray:
    """Jittered planar grid, one row per electrode."""
    cols = math.ceil(math.sqrt(count))
    index = np.arange(count)
    positions = np.zeros((count, 3))
    positions[:, 0] = (index % cols) * spacing_mm
    positions[:, 1] = (index // cols) * spacing_mm
    positions[:, :2] += rng.uniform(-0.1, 0.1, size=(count, 2)) * spacing_mm
    return positions


def mixing_matrix(electrode_positions: np.ndarray, latent_positions: np.ndarray, length_scale: float) -> np.ndarray:
    distances = cdist(electrode_positions, latent_positions)
    return np.exp(-(distances ** 2) / length_scale ** 2)


@dataclass
class SynthGroundTruth:
    """
    Generator-side description of a synthetic dataset.

    observed(e) = gain[e] * sum_l A[e, l] * latent_l + noise_e, where the
    noise is regenerated from the configured seed.
    """

    config: GeneratorConfig
    mixing: Dict[int, np.ndarray]                  # participant -> (K, L)
    latent_positions: Dict[int, np.ndarray]        # participant -> (L, 3)
    latents: Dict[Tuple[int, int], np.ndarray]     # (participant, day) -> (L, N)
    gains: Dict[Tuple[int, int], np.ndarray]       # (participant, day) -> (K,)

    def noise(self, participant: int, day: int) -> np.ndarray:
        cfg = self.config
        rng = np.random.default_rng([cfg.seed, participant, day, 1])
        return rng.standard_normal((cfg.electrodes, cfg.day_samples)) * cfg.noise_std

    def clean(self, participant: int, day: int) -> np.ndarray:
        """Gain-scaled latent mixture without sensor noise; (K, N)."""
        mixed = self.mixing[participant].astype(np.float64) @ self.latents[(participant, day)].astype(np.float64)
        return self.gains[(participant, day)].astype(np.float64)[:, None] * mixed

    def observed(self, participant: int, day: int) -> np.ndarray:
        return self.clean(participant, day) + self.noise(participant, day)

    def analytic_correlation(self, participant: int) -> np.ndarray:
        """Electrode correlation matrix implied by A, unit-variance latents and the noise level (unit gains)."""
        a = self.mixing[participant]
        covariance = a @ a.T + np.eye(len(a)) * self.config.noise_std ** 2
        scale = np.sqrt(np.diag(covariance))
        return covariance / np.outer(scale, scale)


def generate_dataset(cfg: GeneratorConfig) -> Tuple[RaggedRecording, ElectrodeGeometry, SynthGroundTruth]:
    """
    Build every participant-day from the config seed.

    Returns:
        (recording, geometry, ground truth)
    """
    cfg.validate()
    coefficients = cfg.coefficients()
    geometry = ElectrodeGeometry()
    truth = SynthGroundTruth(config=cfg, mixing={}, latent_positions={}, latents={}, gains={})
    days = {}

    for participant in range(cfg.participants):
        rng = np.random.default_rng([cfg.seed, participant])
        positions = electrode_grid(cfg.electrodes, cfg.electrode_spacing_mm, rng)
        low, high = positions.min(axis=0), positions.max(axis=0)
        latent_positions = rng.uniform(low - cfg.length_scale_mm / 2, high + cfg.length_scale_mm / 2,
                                       size=(cfg.n_latents, 3))
        latent_positions[:, 2] = rng.uniform(0.0, cfg.length_scale_mm / 2, size=cfg.n_latents)
        mixing = mixing_matrix(positions, latent_positions, cfg.length_scale_mm)
        geometry.positions[participant] = positions
        # float32 throughout, matching the sidecar
        truth.mixing[participant] = mixing.astype(np.float32)
        truth.latent_positions[participant] = latent_positions.astype(np.float32)

        for day in range(cfg.days):
            latent_rng = np.random.default_rng([cfg.seed, participant, day, 0])
            latents = np.stack([ar2_process(a1, a2, cfg.day_samples, latent_rng) for a1, a2 in coefficients])
            gain_rng = np.random.default_rng([cfg.seed, participant, day, 2])
            gains = np.exp(gain_rng.normal(0.0, cfg.gain_drift_std, size=cfg.electrodes))
            truth.latents[(participant, day)] = latents.astype(np.float32)
            truth.gains[(participant, day)] = gains.astype(np.float32)

            missing = _natural_missing(cfg, participant, day)
            samples = truth.observed(participant, day).astype(np.float32)
            samples[missing] = 0.0
            days[(participant, day)] = DayRecording(
                participant=participant, day=day, sampling_rate=cfg.sampling_rate,
                samples=samples, missing=missing,
            )
        logger.info("Generated participant %d: %d electrodes x %d days", participant, cfg.electrodes, cfg.days)

    recording = RaggedRecording({p: cfg.electrodes for p in range(cfg.participants)}, days)
    return recording, geometry, truth


def _natural_missing(cfg: GeneratorConfig, participant: int, day: int) -> np.ndarray:
    missing = np.zeros(cfg.electrodes, dtype=bool)
    if cfg.natural_missing_prob <= 0:
        return missing
    rng = np.random.default_rng([cfg.seed, participant, day, 3])
    candidates = np.flatnonzero(rng.random(cfg.electrodes) < cfg.natural_missing_prob)
    cap = int(cfg.max_missing_fraction * cfg.electrodes)
    missing[candidates[:cap]] = True
    return missing


def oracle_linear_bound(
    truth: SynthGroundTruth,
    participant: int,
    target: int,
    neighbor_ids: Sequence[int],
    day: Optional[int] = None,
    transform: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> float:
    """
    Best correlation any linear combination of the neighbors reaches.

    Least-squares regression (with intercept) of the target on the neighbors
    over one generated day (the last by default). `transform` maps the
    electrodes x samples day to the domain the imputers work in, e.g. a
    pipeline run, before regressing.
    """
    day = truth.config.days - 1 if day is None else day
    data = truth.observed(participant, day)
    if transform is not None:
        data = transform(data)
    y = data[target].ravel()
    if not neighbor_ids:
        return 0.0
    x = np.stack([data[n].ravel() for n in neighbor_ids] + [np.ones_like(y)], axis=1)
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    fitted = x @ coef
    if np.std(fitted) == 0 or np.std(y) == 0:
        return 0.0
    return float(np.clip(np.corrcoef(fitted, y)[0, 1], 0.0, 1.0))


# --- labeled events ----------------------------------------------------

@dataclass
class EventSchedule:
    starts: np.ndarray   # (n,) sample offsets
    labels: np.ndarray   # (n,) REST / MOVE
    window_len: int

    def check(self, n_samples: int) -> None:
        order = np.argsort(self.starts, kind='stable')
        starts = self.starts[order]
        if np.any(np.diff(starts) < self.window_len):
            raise ScheduleOverlapError(f"Event windows of {self.window_len} samples overlap")
        if len(starts) and (starts[0] < 0 or starts[-1] + self.window_len > n_samples):
            raise ScheduleOverlapError("Event window extends past the recording")


@dataclass
class LabeledEvents:
    participant: int
    day: int
    windows: np.ndarray  # (n, K, window_len) raw samples
    labels: np.ndarray   # (n,)
    missing: np.ndarray  # (K,)
    burst_electrodes: List[int] = field(default_factory=list)


def make_event_schedule(n_samples: int, n_events: int, window_len: int, seed: int) -> EventSchedule:
    """Balanced move / rest windows in distinct non-overlapping slots."""
    slots = n_samples // window_len
    if n_events > slots:
        raise ScheduleOverlapError(
            f"{n_events} events of {window_len} samples do not fit in {n_samples} samples without overlap"
        )
    rng = np.random.default_rng([seed, 4])
    chosen = np.sort(rng.choice(slots, size=n_events, replace=False))
    labels = np.array([MOVE] * (n_events // 2) + [REST] * (n_events - n_events // 2))
    rng.shuffle(labels)
    return EventSchedule(starts=chosen * window_len, labels=labels, window_len=window_len)


def inject_class_signal(
    recording: RaggedRecording,
    participant: int,
    day: int,
    schedule: EventSchedule,
    amplitude: float,
    band_hz: Tuple[float, float],
    electrodes: Optional[Sequence[int]] = None,
    seed: int = 0,
) -> LabeledEvents:
    """
    Cut labeled windows and add a Hann-enveloped band-limited burst to "move" windows.

    Args:
        recording: Source dataset (left unchanged)
        participant, day: Where the events are cut
        schedule: Event windows and labels
        amplitude: RMS of the burst before enveloping
        band_hz: Burst band (low, high)
        electrodes: Electrodes receiving the burst (all observed when None)
        seed: Burst waveform seed

    Returns:
        LabeledEvents with raw windows
    """
    record = recording.day(participant, day)
    check_band(band_hz[0], band_hz[1], record.sampling_rate)
    schedule.check(record.n_samples)
    observed = ~record.missing
    targets = [e for e in (electrodes if electrodes is not None else range(record.n_electrodes)) if observed[e]]

    rng = np.random.default_rng([seed, participant, day, 5])
    sos = signal.butter(4, band_hz, btype='bandpass', fs=record.sampling_rate, output='sos')
    envelope = signal.windows.hann(schedule.window_len)
    windows = np.stack([
        record.samples[:, start:start + schedule.window_len].astype(np.float64) for start in schedule.starts
    ])
    for index, label in enumerate(schedule.labels):
        if label != MOVE or amplitude == 0:
            continue
        burst = signal.sosfiltfilt(sos, rng.standard_normal(schedule.window_len))
        burst *= amplitude / max(np.std(burst), 1e-12)
        weights = rng.uniform(0.5, 1.0, size=len(targets))
        windows[index, targets] += weights[:, None] * (envelope * burst)[None]
    return LabeledEvents(
        participant=participant,
        day=day,
        windows=windows.astype(np.float32),
        labels=schedule.labels.copy(),
        missing=record.missing.copy(),
        burst_electrodes=list(targets),
    )


# --- sidecar -----------------------------------------------------------

def save_ground_truth(truth: SynthGroundTruth, root: str) -> List[Path]:
    """Write the JSON+binary sidecar (config, mixing, latent positions, latents, gains)."""
    root_path = Path(root)
    root_path.mkdir(parents=True, exist_ok=True)
    arrays = {}
    for participant, mixing in truth.mixing.items():
        arrays[f"p{participant}/mixing"] = mixing
        arrays[f"p{participant}/latent_positions"] = truth.latent_positions[participant]
    for (participant, day), latents in truth.latents.items():
        arrays[f"p{participant}/d{day}/latents"] = latents
        arrays[f"p{participant}/d{day}/gains"] = truth.gains[(participant, day)]
    paths = list(save_arrays(arrays, str(root_path / 'ground_truth')))
    config_path = root_path / 'generator.json'
    with open(config_path, 'w', encoding='utf-8') as f:
        json.dump(truth.config.to_dict(), f, indent=2, sort_keys=True)
    paths.append(config_path)
    return paths


def load_ground_truth(root: str) -> SynthGroundTruth:
    root_path = Path(root)
    with open(root_path / 'generator.json', 'r', encoding='utf-8') as f:
        cfg = GeneratorConfig.from_dict(json.load(f))
    arrays = load_arrays(str(root_path / 'ground_truth'))
    truth = SynthGroundTruth(config=cfg, mixing={}, latent_positions={}, latents={}, gains={})
    for name, values in arrays.items():
        parts = name.split('/')
        participant = int(parts[0][1:])
        if len(parts) == 2:
            getattr(truth, parts[1])[participant] = values
        else:
            getattr(truth, parts[2])[(participant, int(parts[1][1:]))] = values
    return truth

"""
Signal Pipeline Service

Turns raw recordings into fixed-length model instances.

Two processing procedures are supported:
- Procedure A: 100 s segments, standardized with the statistics of their first
  20 s, the remaining 80 s mean-pooled down to 5 Hz (400 steps per instance).
- Procedure B: windowed-sinc band-pass, decimation 500 -> 250 Hz, and
  trimming into 1000-step instances. Band edges are configurable defaults.

Also hosts the time-derivative channel used as a second model input.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np
from scipy import signal

from ..exceptions import ConfigurationError, InvalidBandError, ShapeMismatchError, ZeroVarianceError
from .ragged_store import AvailabilitySets, RaggedRecording

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-8
FILTER_TAPS = 101


def round_half_up(value: float) -> int:
    """Round to nearest integer, halves away from zero for non-negative input."""
    return int(math.floor(value + 0.5))


@dataclass
class PipelineConfig:
    """Parameters for Procedure A or B."""

    procedure: str = 'A'
    source_rate: float = 500.0
    # Procedure A
    segment_seconds: float = 100.0
    stats_seconds: float = 20.0
    target_rate: float = 5.0
    # Procedure B
    band_low_hz: float = 0.5
    band_high_hz: float = 115.0
    decimation_factor: int = 2
    trim_len: int = 1000
    filter_taps: int = FILTER_TAPS

    PROCEDURES = ('A', 'B')

    @property
    def segment_len(self) -> int:
        return int(round(self.source_rate * self.segment_seconds))

    @property
    def stats_len(self) -> int:
        return int(round(self.source_rate * self.stats_seconds))

    @property
    def downsample_factor(self) -> int:
        return int(round(self.source_rate / self.target_rate))

    @property
    def instance_len(self) -> int:
        if self.procedure == 'A':
            return (self.segment_len - self.stats_len) // self.downsample_factor
        return self.trim_len

    @property
    def output_rate(self) -> float:
        if self.procedure == 'A':
            return self.source_rate / self.downsample_factor
        return self.source_rate / self.decimation_factor

    def validate(self) -> 'PipelineConfig':
        if self.procedure not in self.PROCEDURES:
            raise ConfigurationError(
                f"Unknown procedure '{self.procedure}'. Available procedures: {', '.join(self.PROCEDURES)}"
            )
        if self.source_rate <= 0:
            raise ConfigurationError("source_rate must be positive")
        if self.procedure == 'A':
            if not 0 < self.stats_seconds < self.segment_seconds:
                raise ConfigurationError("stats_seconds must lie inside the segment")
            if self.downsample_factor < 1:
                raise ConfigurationError("target_rate must not exceed source_rate")
        else:
            if self.decimation_factor < 1 or self.trim_len < 1:
                raise ConfigurationError("decimation_factor and trim_len must be positive")
            check_band(self.band_low_hz, self.band_high_hz, self.source_rate)
        return self

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PipelineConfig':
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigurationError(
                f"Unknown pipeline keys {sorted(unknown)}. Allowed keys: {sorted(allowed)}"
            )
        return cls(**data).validate()

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class PreparedDay:
    """Instances of one participant-day after a pipeline run."""

    participant: int
    day: int
    instances: np.ndarray  # (n_instances, electrodes, steps), float32
    missing: np.ndarray    # (electrodes,), bool
    rate: float

    @property
    def observed_ids(self) -> List[int]:
        return [int(e) for e in np.flatnonzero(~self.missing)]

    def availability(self) -> AvailabilitySets:
        return AvailabilitySets.from_missing(self.participant, self.day, self.missing)


class PreparedDataset:
    """
    Pipeline output keyed by (participant, day).

    Saved as .npy arrays plus a JSON index so the preprocess
    command can hand its output to train/evaluate runs.
    """

    def __init__(self, days: Dict[Tuple[int, int], PreparedDay], config: PipelineConfig):
        self._days = dict(sorted(days.items()))
        self.config = config

    def participants(self) -> List[int]:
        return sorted({p for (p, _) in self._days})

    def days_for(self, participant: int) -> List[int]:
        return [d for (p, d) in self._days if p == participant]

    def train_days(self, participant: int) -> List[int]:
        return self.days_for(participant)[:-1]

    def test_day(self, participant: int) -> int:
        return self.days_for(participant)[-1]

    def day(self, participant: int, day: int) -> PreparedDay:
        return self._days[(participant, day)]

    def electrode_count(self, participant: int) -> int:
        return int(self._days[(participant, self.days_for(participant)[0])].missing.shape[0])

    def __iter__(self) -> Iterator[PreparedDay]:
        return iter(self._days.values())

    def save(self, root: str) -> List[Path]:
        root_path = Path(root)
        root_path.mkdir(parents=True, exist_ok=True)
        index = {
            'pipeline': self.config.to_dict(),
            'days': [
                {'participant': d.participant, 'day': d.day, 'rate': d.rate}
                for d in self
            ],
        }
        paths = [root_path / 'prepared.json']
        with open(paths[0], 'w', encoding='utf-8') as f:
            json.dump(index, f, indent=2, sort_keys=True)
        # .npy files (not .npz) so repeated runs produce identical bytes
        for prepared in self:
            stem = f"p{prepared.participant}_d{prepared.day}"
            for name, array in (('instances', prepared.instances), ('missing', prepared.missing)):
                path = root_path / f"{stem}.{name}.npy"
                np.save(path, array)
                paths.append(path)
        return paths

    @classmethod
    def load(cls, root: str) -> 'PreparedDataset':
        root_path = Path(root)
        with open(root_path / 'prepared.json', 'r', encoding='utf-8') as f:
            index = json.load(f)
        days = {}
        for entry in index['days']:
            participant, day = int(entry['participant']), int(entry['day'])
            stem = root_path / f"p{participant}_d{day}"
            days[(participant, day)] = PreparedDay(
                participant=participant,
                day=day,
                instances=np.load(f"{stem}.instances.npy"),
                missing=np.load(f"{stem}.missing.npy"),
                rate=float(entry['rate']),
            )
        return cls(days, PipelineConfig.from_dict(index['pipeline']))


def check_band(low_hz: float, high_hz: float, rate_hz: float) -> None:
    if not 0 < low_hz < high_hz < rate_hz / 2:
        raise InvalidBandError(
            f"Band edges must satisfy 0 < low < high < Nyquist; got low={low_hz}, "
            f"high={high_hz}, Nyquist={rate_hz / 2}"
        )


def standardize_segment(
    raw: np.ndarray,
    source_rate: float = 500.0,
    stats_seconds: float = 20.0,
    segment_seconds: float = 100.0,
    eps: float = VARIANCE_FLOOR,
) -> np.ndarray:
    """
    Standardize the body of a segment with the statistics of its prefix.

    Works on a single series or on rows of a 2-D array (one row per electrode).

    Args:
        raw: Segment of exactly segment_seconds * source_rate samples (last axis)
        source_rate: Sampling rate in Hz
        stats_seconds: Length of the statistics prefix
        segment_seconds: Length of the whole segment
        eps: Minimum acceptable prefix standard deviation

    Returns:
        (body - mu) / sigma for the samples after the prefix

    Raises:
        ZeroVarianceError: If any row's prefix deviation is below eps
    """
    values = np.asarray(raw, dtype=np.float64)
    expected = int(round(source_rate * segment_seconds))
    if values.shape[-1] != expected:
        raise ShapeMismatchError(f"Segment must hold {expected} samples, got {values.shape[-1]}")

    split = int(round(source_rate * stats_seconds))
    prefix, body = values[..., :split], values[..., split:]
    mu = prefix.mean(axis=-1, keepdims=True)
    sigma = prefix.std(axis=-1, keepdims=True)
    if np.any(sigma < eps):
        raise ZeroVarianceError(f"Prefix standard deviation below {eps}")
    return (body - mu) / sigma


def downsample(series: np.ndarray, factor: int) -> np.ndarray:
    """Mean-pool non-overlapping windows of `factor` samples along the last axis."""
    if factor < 1:
        raise ValueError("Downsampling factor must be at least 1")
    values = np.asarray(series, dtype=np.float64)
    n_out = values.shape[-1] // factor
    if n_out == 0:
        logger.warning("Downsampling factor %d exceeds series length %d", factor, values.shape[-1])
        return values[..., :0]
    pooled = values[..., :n_out * factor].reshape(values.shape[:-1] + (n_out, factor))
    return pooled.mean(axis=-1)


def bandpass_kernel(low_hz: float, high_hz: float, rate_hz: float, taps: int = FILTER_TAPS) -> np.ndarray:
    """
    Linear-phase windowed-sinc band-pass (Hamming window).

    Built as the difference of two unity-DC-gain low-pass kernels, so the
    response at DC is exactly zero.
    """
    check_band(low_hz, high_hz, rate_hz)
    if taps % 2 == 0:
        raise ValueError("Filter length must be odd for a symmetric kernel")
    upper = signal.firwin(taps, high_hz, window='hamming', fs=rate_hz)
    lower = signal.firwin(taps, low_hz, window='hamming', fs=rate_hz)
    return upper - lower


def bandpass_filter(
    series: np.ndarray,
    low_hz: float,
    high_hz: float,
    rate_hz: float,
    taps: int = FILTER_TAPS,
) -> np.ndarray:
    """
    Zero-delay FIR band-pass along the last axis.

    The series is extended by symmetric reflection of half the kernel length
    on both sides, so the output has the input's length.
    """
    kernel = bandpass_kernel(low_hz, high_hz, rate_hz, taps)
    values = np.asarray(series, dtype=np.float64)
    half = taps // 2
    pad_width = [(0, 0)] * (values.ndim - 1) + [(half, half)]
    padded = np.pad(values, pad_width, mode='symmetric')
    filtered = signal.lfilter(kernel, 1.0, padded, axis=-1)
    return filtered[..., taps - 1:]


def decimate(series: np.ndarray, factor: int) -> np.ndarray:
    """Keep every `factor`-th sample of an already band-limited series."""
    if factor < 1:
        raise ValueError("Decimation factor must be at least 1")
    return np.asarray(series)[..., ::factor]


def time_derivative(series: np.ndarray) -> np.ndarray:
    """First difference along time with d[0] = 0; preserves length."""
    values = np.asarray(series)
    derivative = np.zeros_like(values)
    derivative[..., 1:] = values[..., 1:] - values[..., :-1]
    return derivative


class SignalPipeline:
    """
    Applies Procedure A or B to every participant-day of a recording.

    Usage:
        pipeline = SignalPipeline(PipelineConfig(procedure='A'))
        prepared = pipeline.run(recording)
    """

    def __init__(self, config: Optional[PipelineConfig] = None):
        self.config = (config or PipelineConfig()).validate()

    def run(self, recording: RaggedRecording) -> PreparedDataset:
        days = {}
        for record in recording.iter_days():
            if not math.isclose(record.sampling_rate, self.config.source_rate):
                raise ConfigurationError(
                    f"Pipeline expects {self.config.source_rate} Hz, participant {record.participant} "
                    f"day {record.day} is sampled at {record.sampling_rate} Hz"
                )
            instances = self.process_day(record.samples, record.missing, record.participant, record.day)
            days[(record.participant, record.day)] = PreparedDay(
                participant=record.participant,
                day=record.day,
                instances=instances,
                missing=record.missing.copy(),
                rate=self.config.output_rate,
            )
            logger.info(
                "Procedure %s: participant %s day %s -> %d instances",
                self.config.procedure, record.participant, record.day, len(instances),
            )
        return PreparedDataset(days, self.config)

    def process_day(
        self,
        samples: np.ndarray,
        missing: np.ndarray,
        participant: Optional[int] = None,
        day: Optional[int] = None,
    ) -> np.ndarray:
        """Returns (n_instances, electrodes, instance_len) float32."""
        if self.config.procedure == 'A':
            windows = self._procedure_a(samples, missing, participant, day)
        else:
            windows = self._procedure_b(samples, missing)
        n_electrodes = samples.shape[0]
        if not windows:
            return np.zeros((0, n_electrodes, self.config.instance_len), dtype=np.float32)
        return np.stack(windows).astype(np.float32)

    def process_window(self, window: np.ndarray, missing: Optional[np.ndarray] = None) -> np.ndarray:
        """Apply the configured procedure to one electrodes x samples window."""
        missing = np.zeros(window.shape[0], dtype=bool) if missing is None else missing
        instances = self.process_day(window, missing)
        if len(instances) == 0:
            raise ShapeMismatchError(
                f"Window of {window.shape[-1]} samples is too short for Procedure {self.config.procedure}"
            )
        return instances[0]

    def _procedure_a(self, samples, missing, participant, day) -> List[np.ndarray]:
        cfg = self.config
        observed = ~missing
        windows = []
        n_segments = samples.shape[1] // cfg.segment_len
        for index in range(n_segments):
            segment = samples[:, index * cfg.segment_len:(index + 1) * cfg.segment_len]
            body = np.zeros((samples.shape[0], cfg.segment_len - cfg.stats_len))
            try:
                body[observed] = standardize_segment(
                    segment[observed], cfg.source_rate, cfg.stats_seconds, cfg.segment_seconds,
                )
            except ZeroVarianceError:
                logger.warning(
                    "Skipping segment %d of participant %s day %s: zero-variance prefix",
                    index, participant, day,
                )
                continue
            windows.append(downsample(body, cfg.downsample_factor))
        return windows

    def _procedure_b(self, samples, missing) -> List[np.ndarray]:
        cfg = self.config
        observed = ~missing
        filtered = np.zeros(samples.shape, dtype=np.float64)
        if observed.any():
            filtered[observed] = bandpass_filter(
                samples[observed], cfg.band_low_hz, cfg.band_high_hz, cfg.source_rate, cfg.filter_taps,
            )
        reduced = decimate(filtered, cfg.decimation_factor)
        n_windows = reduced.shape[1] // cfg.trim_len
        return [reduced[:, i * cfg.trim_len:(i + 1) * cfg.trim_len] for i in range(n_windows)]


def run_pipeline(recording: RaggedRecording, config: PipelineConfig) -> PreparedDataset:
    """Process every participant-day of a recording with one procedure."""
    return SignalPipeline(config).run(recording)

"""
Decoding Service

Downstream check of imputation quality: a random-forest move / rest decoder
is trained and scored on full, zero-filled and imputer-filled events while
50 / 70 / 90 % of the observed electrodes are masked.
"""

import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from django.conf import settings
from scipy import signal
from sklearn.ensemble import RandomForestClassifier
from sklearn.metrics import accuracy_score
from sklearn.model_selection import train_test_split

from ..exceptions import ConfigurationError, SingleClassError
from .evaluation import POWER_FLOOR, write_csv
from .masking import ElectrodeRole, apply_mask, make_mask_plan
from .ragged_store import AvailabilitySets, RaggedRecording
from .signal_pipeline import SignalPipeline
from .synth_generator import LabeledEvents, inject_class_signal, make_event_schedule

if TYPE_CHECKING:
    from ..imputers.base import BaseImputer

logger = logging.getLogger(__name__)

FULL, ZERO, IMPUTER = 'full', 'zero', 'imputer'
DEFAULT_BANDS = ((1.0, 4.0), (4.0, 8.0), (8.0, 30.0), (30.0, 100.0))
TABLE_COLUMNS = ['participant', 'pct', 'seed', 'fill_strategy', 'accuracy']
SUMMARY_COLUMNS = [
    'participant', 'pct', 'method', 'full_mean', 'zero_mean', 'imputer_mean',
    'relative_mean', 'relative_std', 'outcome',
]


@dataclass
class ForestConfig:
    n_estimators: int = 100
    max_features: str = 'sqrt'
    bootstrap: bool = True
    oob_score: bool = False
    seed: int = 0

    def validate(self) -> 'ForestConfig':
        if self.n_estimators < 1:
            raise ConfigurationError("n_estimators must be at least 1")
        return self


@dataclass
class DecodingConfig:
    pcts: List[float] = field(default_factory=lambda: [0.5, 0.7, 0.9])
    n_seeds: int = 5
    bands: List[List[float]] = field(default_factory=lambda: [list(b) for b in DEFAULT_BANDS])
    test_fraction: float = 0.3
    n_events: int = 60
    amplitude: float = 1.0
    burst_band_hz: List[float] = field(default_factory=lambda: [8.0, 30.0])
    burst_fraction: float = 0.5
    forest: ForestConfig = field(default_factory=ForestConfig)

    def validate(self) -> 'DecodingConfig':
        if any(not 0 <= p < 1 for p in self.pcts):
            raise ConfigurationError("Decoding pcts must lie in [0, 1)")
        if self.n_seeds < 1:
            raise ConfigurationError("n_seeds must be at least 1")
        if not 0 < self.test_fraction < 1:
            raise ConfigurationError("test_fraction must lie in (0, 1)")
        if self.n_events < 4:
            raise ConfigurationError("n_events must allow two events per class in each split")
        self.forest.validate()
        return self

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DecodingConfig':
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigurationError(
                f"Unknown decoding keys {sorted(unknown)}. Allowed keys: {sorted(allowed)}"
            )
        values = dict(data)
        forest = values.pop('forest', {})
        forest_allowed = {f.name for f in fields(ForestConfig)}
        if set(forest) - forest_allowed:
            raise ConfigurationError(
                f"Unknown forest keys {sorted(set(forest) - forest_allowed)}. Allowed keys: {sorted(forest_allowed)}"
            )
        return cls(forest=ForestConfig(**forest), **values).validate()

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def featurize(instance: np.ndarray, rate: float, bands: Sequence[Sequence[float]] = DEFAULT_BANDS) -> np.ndarray:
    """
    Log mean band power per electrode and band.

    Args:
        instance: (K, T) processed event
        rate: Sampling rate of the instance
        bands: (low, high) edges in Hz

    Returns:
        (K * len(bands),) features, electrode-major
    """
    values = np.asarray(instance, dtype=np.float64)
    freqs, power = signal.welch(
        values, fs=rate, window='hann', nperseg=min(256, values.shape[-1]),
        scaling='density', detrend=False, axis=-1,
    )
    features = np.empty((values.shape[0], len(bands)))
    for index, (low, high) in enumerate(bands):
        in_band = (freqs >= low) & (freqs < high)
        band_power = power[:, in_band].mean(axis=-1) if in_band.any() else np.zeros(values.shape[0])
        features[:, index] = np.log(np.maximum(band_power, POWER_FLOOR))
    return features.ravel()


def featurize_all(instances: np.ndarray, rate: float, bands: Sequence[Sequence[float]] = DEFAULT_BANDS) -> np.ndarray:
    return np.stack([featurize(instance, rate, bands) for instance in instances])


def train_forest(features: np.ndarray, labels: np.ndarray, cfg: Optional[ForestConfig] = None,
                 random_state: Optional[int] = None) -> RandomForestClassifier:
    """Fit a random forest; the seed comes from random_state or the config."""
    cfg = (cfg or ForestConfig()).validate()
    classes = np.unique(labels)
    if len(classes) < 2:
        raise SingleClassError(f"Decoder needs two classes, got only {classes.tolist()}")
    forest = RandomForestClassifier(
        n_estimators=cfg.n_estimators,
        max_depth=None,
        max_features=cfg.max_features,
        bootstrap=cfg.bootstrap,
        oob_score=cfg.oob_score and cfg.bootstrap,
        random_state=cfg.seed if random_state is None else random_state,
        n_jobs=getattr(settings, 'IMPUTATION_FOREST_JOBS', 1),
    )
    forest.fit(features, labels)
    if cfg.oob_score and cfg.bootstrap:
        logger.info("Forest out-of-bag accuracy %.4f", forest.oob_score_)
    return forest


def outcome_label(relative_mean: float, relative_std: float) -> str:
    """outperform / underperform when the mean is more than one std from zero, similar otherwise."""
    if relative_mean > relative_std:
        return 'outperform'
    if relative_mean < -relative_std:
        return 'underperform'
    return 'similar'


@dataclass
class DecodingResult:
    method: str
    table: pd.DataFrame
    summary: pd.DataFrame

    def win_fraction(self) -> float:
        return imputer_win_fraction(self.summary)

    def save(self, out_dir: str) -> List[Path]:
        root = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)
        return [
            write_csv(self.table, root / f"decoding.{self.method}.csv"),
            write_csv(self.summary, root / f"decoding.{self.method}.summary.csv"),
        ]

    @classmethod
    def load(cls, out_dir: str, method: str) -> 'DecodingResult':
        root = Path(out_dir)
        return cls(
            method=method,
            table=pd.read_csv(root / f"decoding.{method}.csv"),
            summary=pd.read_csv(root / f"decoding.{method}.summary.csv"),
        )


def imputer_win_fraction(summary: pd.DataFrame) -> float:
    """Share of (participant, pct) cells where the imputer-filled mean is at least the zero-filled mean."""
    if summary.empty:
        return 0.0
    return float((summary.imputer_mean >= summary.zero_mean).mean())


def prepare_events(events: LabeledEvents, pipeline: SignalPipeline) -> np.ndarray:
    """Processed (n, K, T) events."""
    return np.stack([pipeline.process_window(window, events.missing) for window in events.windows])


def _forest_seed(base: int, participant: int, pct: float, seed: int) -> int:
    rng = np.random.default_rng([base, participant, int(round(pct * 1000)), seed])
    return int(rng.integers(2 ** 31 - 1))


def run_missingness_experiment(
    events: Sequence[LabeledEvents],
    imputer: 'BaseImputer',
    pipeline: SignalPipeline,
    cfg: Optional[DecodingConfig] = None,
) -> DecodingResult:
    """
    Score the decoder on full, zero-filled and imputer-filled events.

    For every participant, pct and seed a mask set is drawn from the observed
    electrodes, the masked rows are zero-filled (and for the imputer
    condition replaced by the imputer's estimates), and a fresh forest is
    trained and scored per condition on the same stratified split.

    Args:
        events: Labeled raw events, one entry per participant
        imputer: Fitted imputer working on the pipeline's instance shape
        pipeline: Procedure applied to every raw event window
        cfg: Decoding settings

    Returns:
        DecodingResult with the per-seed table and the per-cell summary
    """
    cfg = (cfg or DecodingConfig()).validate()
    rate = pipeline.config.output_rate
    rows = []
    for group in events:
        instances = prepare_events(group, pipeline)
        labels = np.asarray(group.labels)
        availability = AvailabilitySets.from_missing(group.participant, group.day, group.missing)
        full_features = featurize_all(instances, rate, cfg.bands)

        for pct in cfg.pcts:
            for seed in range(cfg.n_seeds):
                plan = make_mask_plan(availability, pct, 1, cfg.forest.seed + seed)[0]
                masked = apply_mask(instances, plan, availability)
                filled = masked.signal.copy()
                hidden = masked.roles == ElectrodeRole.MASKED
                if hidden.any():
                    estimate = imputer.impute(group.participant, masked).series
                    filled[:, hidden] = estimate[:, hidden]

                train_idx, test_idx = train_test_split(
                    np.arange(len(labels)), test_size=cfg.test_fraction, stratify=labels,
                    random_state=seed,
                )
                forest_seed = _forest_seed(cfg.forest.seed, group.participant, pct, seed)
                conditions = {
                    FULL: full_features,
                    ZERO: featurize_all(masked.signal, rate, cfg.bands),
                    IMPUTER: featurize_all(filled, rate, cfg.bands),
                }
                for strategy, features in conditions.items():
                    forest = train_forest(features[train_idx], labels[train_idx], cfg.forest, forest_seed)
                    accuracy = accuracy_score(labels[test_idx], forest.predict(features[test_idx]))
                    rows.append((group.participant, pct, seed, strategy, float(accuracy)))
            logger.info("Decoding participant %s at %.0f%% missing done", group.participant, pct * 100)

    table = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    return DecodingResult(method=imputer.IMPUTER_NAME, table=table, summary=summarize(table, imputer.IMPUTER_NAME))


def summarize(table: pd.DataFrame, method: str) -> pd.DataFrame:
    """One row per (participant, pct): mean accuracies and the relative accuracy mean / std."""
    wide = table.pivot_table(
        index=['participant', 'pct', 'seed'], columns='fill_strategy', values='accuracy',
    ).reset_index()
    wide['relative'] = wide[IMPUTER] - wide[ZERO]
    summary = (
        wide.groupby(['participant', 'pct'], sort=True)
        .agg(
            full_mean=(FULL, 'mean'),
            zero_mean=(ZERO, 'mean'),
            imputer_mean=(IMPUTER, 'mean'),
            relative_mean=('relative', 'mean'),
            relative_std=('relative', lambda s: float(np.std(s, ddof=0))),
        )
        .reset_index()
    )
    summary.insert(2, 'method', method)
    summary['outcome'] = [
        outcome_label(m, s) for m, s in zip(summary.relative_mean, summary.relative_std)
    ]
    return summary[SUMMARY_COLUMNS]


def relative_accuracy(table: pd.DataFrame, first: str = IMPUTER, second: str = ZERO) -> pd.Series:
    """Per (participant, pct, seed) accuracy of `first` minus `second`."""
    wide = table.pivot_table(index=['participant', 'pct', 'seed'], columns='fill_strategy', values='accuracy')
    return wide[first] - wide[second]


def event_groups(recording: RaggedRecording, pipeline: SignalPipeline, cfg: DecodingConfig, seed: int,
                 participants: Optional[Sequence[int]] = None) -> List[LabeledEvents]:
    """Labeled events on each participant's held-out day, burst on a random share of observed electrodes."""
    window_len = pipeline.config.trim_len * pipeline.config.decimation_factor
    groups = []
    for participant in participants or recording.participants():
        day = recording.test_day(participant)
        record = recording.day(participant, day)
        schedule = make_event_schedule(record.n_samples, cfg.n_events, window_len, seed + participant)
        observed = np.flatnonzero(~record.missing)
        rng = np.random.default_rng([seed, participant, 6])
        n_burst = max(1, int(round(cfg.burst_fraction * len(observed))))
        electrodes = sorted(int(e) for e in rng.choice(observed, size=n_burst, replace=False))
        groups.append(inject_class_signal(
            recording, participant, day, schedule, cfg.amplitude, tuple(cfg.burst_band_hz), electrodes, seed,
        ))
    return groups


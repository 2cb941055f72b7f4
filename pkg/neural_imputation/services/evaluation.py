"""
Evaluation Service

Scores reconstructions and imputations against held-back ground truth with
time-series (Pearson) and frequency (log-power Pearson) correlations, and
aggregates them per participant, method, missing-data regime and role.
"""

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import signal, stats

from ..exceptions import ConfigurationError, NoScorableElectrodesError, ShapeMismatchError
from .masking import DEFAULT_REGIMES, IMPUTATION, RECONSTRUCTION, MaskPlan, apply_mask, make_mask_plan
from .signal_pipeline import PreparedDataset

if TYPE_CHECKING:
    from ..imputers.base import BaseImputer

logger = logging.getLogger(__name__)

POWER_FLOOR = 1e-12
DEGENERATE_STD = 1e-12
SUMMARY_COLUMNS = ['participant', 'method', 'regime', 'role', 'mean', 'std', 'n']
ELECTRODE_COLUMNS = ['participant', 'method', 'electrode', 'regime', 'role', 'time_corr', 'freq_corr', 'n']


# --- correlations -------------------------------------------------------

def pearson_rows(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Row-wise Pearson correlation along the last axis.

    Returns:
        (values, degenerate): rows where either side has zero variance score
        0 and are flagged degenerate
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"Series shapes differ: {a.shape} vs {b.shape}")
    if a.shape[-1] < 2:
        raise ShapeMismatchError("Pearson correlation needs at least 2 samples")
    da = a - a.mean(axis=-1, keepdims=True)
    db = b - b.mean(axis=-1, keepdims=True)
    norm_a = np.sqrt((da * da).sum(axis=-1))
    norm_b = np.sqrt((db * db).sum(axis=-1))
    scale = np.sqrt(a.shape[-1])
    degenerate = (norm_a / scale <= DEGENERATE_STD) | (norm_b / scale <= DEGENERATE_STD)
    with np.errstate(invalid='ignore', divide='ignore'):
        values = (da * db).sum(axis=-1) / (norm_a * norm_b)
    values = np.where(degenerate, 0.0, np.clip(values, -1.0, 1.0))
    return values, degenerate


def pearson(a: Sequence[float], b: Sequence[float]) -> Tuple[float, bool]:
    """Product-moment correlation of two equal-length series, with a degenerate flag."""
    value, degenerate = pearson_rows(np.asarray(a)[None], np.asarray(b)[None])
    return float(value[0]), bool(degenerate[0])


# --- spectra ------------------------------------------------------------

@dataclass
class SpectrumConfig:
    window: int = 64
    overlap: float = 0.5
    average: str = 'mean'

    @classmethod
    def for_rate(cls, rate: float) -> 'SpectrumConfig':
        """64-sample windows for 5 Hz data, 256 for 250 Hz data."""
        return cls(window=256 if rate >= 100 else 64)

    @property
    def noverlap(self) -> int:
        return int(self.window * self.overlap)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SpectrumConfig':
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigurationError(f"Unknown spectrum keys {sorted(unknown)}. Allowed keys: {sorted(allowed)}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _check_window(length: int, cfg: SpectrumConfig) -> None:
    if cfg.window > length:
        raise ShapeMismatchError(f"Spectrum window {cfg.window} exceeds series length {length}")


def power_spectrum(series: np.ndarray, cfg: Optional[SpectrumConfig] = None, rate: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Welch power spectral density over the last axis.

    Hann windows with the configured overlap, no detrending, one-sided
    density scaling, so sum(power) * df approximates the mean square.

    Returns:
        (frequencies, power)
    """
    cfg = cfg or SpectrumConfig()
    values = np.asarray(series, dtype=np.float64)
    _check_window(values.shape[-1], cfg)
    return signal.welch(
        values, fs=rate, window='hann', nperseg=cfg.window, noverlap=cfg.noverlap,
        detrend=False, scaling='density', average=cfg.average, axis=-1,
    )


def log_power(series: np.ndarray, cfg: Optional[SpectrumConfig] = None, rate: float = 1.0) -> np.ndarray:
    _, power = power_spectrum(series, cfg, rate)
    return np.log(np.maximum(power, POWER_FLOOR))


def frequency_correlation_rows(original: np.ndarray, estimate: np.ndarray,
                               cfg: Optional[SpectrumConfig] = None, rate: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    if np.shape(original) != np.shape(estimate):
        raise ShapeMismatchError(f"Series shapes differ: {np.shape(original)} vs {np.shape(estimate)}")
    return pearson_rows(log_power(original, cfg, rate), log_power(estimate, cfg, rate))


def frequency_correlation(original: np.ndarray, estimate: np.ndarray,
                          cfg: Optional[SpectrumConfig] = None, rate: float = 1.0) -> Tuple[float, bool]:
    """Pearson correlation of log power across frequency bins."""
    values, degenerate = frequency_correlation_rows(np.asarray(original)[None], np.asarray(estimate)[None], cfg, rate)
    return float(values[0]), bool(degenerate[0])


def spectrogram(series: np.ndarray, rate: float, cfg: Optional[SpectrumConfig] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Short-time power spectra; returns (frequencies, times, power[f, t])."""
    cfg = cfg or SpectrumConfig.for_rate(rate)
    values = np.asarray(series, dtype=np.float64)
    window = min(cfg.window, values.shape[-1] // 4 or values.shape[-1])
    return signal.spectrogram(
        values, fs=rate, window='hann', nperseg=window, noverlap=int(window * cfg.overlap),
        detrend=False, scaling='density', mode='psd',
    )


# --- reports ------------------------------------------------------------

@dataclass
class ElectrodeExample:
    """One instance of an electrode's ground truth and estimate, kept for spectrogram plots."""

    participant: int
    electrode: int
    regime: float
    kind: str  # 'typical' or 'best'
    time_corr: float
    rate: float
    original: List[float]
    estimate: List[float]


@dataclass
class EvalReport:
    """
    Aggregated scores of one method.

    `summary` holds mean / std / n per (participant, method, regime, role)
    over instances x electrodes x mask sets; `electrodes` holds the
    instance-averaged scores per electrode.
    """

    method: str
    summary: pd.DataFrame
    electrodes: pd.DataFrame
    metadata: Dict[str, Any] = field(default_factory=dict)
    examples: List[ElectrodeExample] = field(default_factory=list)

    def score(self, participant: int, regime: float, role: str = IMPUTATION) -> float:
        rows = self.summary[
            (self.summary.participant == participant)
            & np.isclose(self.summary.regime, regime)
            & (self.summary.role == role)
        ]
        if rows.empty:
            raise KeyError(f"No {role} score for participant {participant} at regime {regime}")
        return float(rows['mean'].iloc[0])

    def save(self, out_dir: str) -> List[Path]:
        root = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)
        summary_path = root / f"{self.method}.summary.csv"
        electrodes_path = root / f"{self.method}.electrodes.csv"
        meta_path = root / f"{self.method}.report.json"
        write_csv(self.summary, summary_path)
        write_csv(self.electrodes, electrodes_path)
        with open(meta_path, 'w', encoding='utf-8') as f:
            json.dump(
                {'method': self.method, 'metadata': self.metadata, 'examples': [asdict(e) for e in self.examples]},
                f, indent=2, sort_keys=True,
            )
        return [summary_path, electrodes_path, meta_path]

    @classmethod
    def load(cls, out_dir: str, method: str) -> 'EvalReport':
        root = Path(out_dir)
        with open(root / f"{method}.report.json", 'r', encoding='utf-8') as f:
            meta = json.load(f)
        return cls(
            method=method,
            summary=pd.read_csv(root / f"{method}.summary.csv"),
            electrodes=pd.read_csv(root / f"{method}.electrodes.csv"),
            metadata=meta['metadata'],
            examples=[ElectrodeExample(**e) for e in meta['examples']],
        )


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format='%.4f', lineterminator='\n')
    return path


@dataclass
class EvaluationConfig:
    regimes: List[float] = field(default_factory=lambda: list(DEFAULT_REGIMES))
    mask_sets: int = 3
    n_examples: int = 1
    spectrum: Optional[Dict[str, Any]] = None

    def validate(self) -> 'EvaluationConfig':
        if any(not 0 <= p <= 1 for p in self.regimes):
            raise ConfigurationError("Regimes must lie in [0, 1]")
        if self.mask_sets < 1:
            raise ConfigurationError("mask_sets must be at least 1")
        return self

    def spectrum_config(self) -> Optional[SpectrumConfig]:
        return SpectrumConfig.from_dict(self.spectrum) if self.spectrum else None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EvaluationConfig':
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigurationError(
                f"Unknown evaluation keys {sorted(unknown)}. Allowed keys: {sorted(allowed)}"
            )
        return cls(**data).validate()

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def held_out_plans(
    dataset: PreparedDataset,
    regimes: Iterable[float] = DEFAULT_REGIMES,
    n_sets: int = 3,
    seed: int = 0,
    participants: Optional[Sequence[int]] = None,
) -> List[MaskPlan]:
    """Mask plans for every participant's held-out last day; p = 0 gets a single empty set."""
    plans = []
    for participant in participants or dataset.participants():
        prepared = dataset.day(participant, dataset.test_day(participant))
        availability = prepared.availability()
        for p in regimes:
            plans.extend(make_mask_plan(availability, p, 1 if p == 0 else n_sets, seed))
    return plans


def evaluate_model(
    imputer: 'BaseImputer',
    dataset: PreparedDataset,
    mask_plans: Sequence[MaskPlan],
    spectrum: Optional[SpectrumConfig] = None,
    n_examples: int = 1,
) -> EvalReport:
    """
    Score an imputer on held-back ground truth.

    For every mask plan the plan's day is zero-filled, the imputer fills it,
    and every electrode with ground truth is compared with its original
    series, instance by instance. Electrodes observed in the input count as
    reconstructions, masked ones as imputations; naturally-missing ones are
    skipped.

    Args:
        imputer: Any registered imputer, already fitted
        dataset: Prepared instances holding the ground truth
        mask_plans: Plans (normally from held_out_plans)
        spectrum: Spectrum settings for frequency correlation
        n_examples: Instances kept per typical / best example electrode

    Returns:
        EvalReport
    """
    method = imputer.IMPUTER_NAME
    records = []
    outputs = {}
    for plan in mask_plans:
        prepared = dataset.day(plan.participant, plan.day)
        if len(prepared.instances) == 0:
            logger.warning("Participant %s day %s has no instances to score", plan.participant, plan.day)
            continue
        cfg = spectrum or SpectrumConfig.for_rate(prepared.rate)
        masked = apply_mask(prepared.instances, plan, prepared.availability())
        result = imputer.impute(plan.participant, masked)
        outputs[(plan.participant, plan.day, plan.p, plan.set_index)] = result.series

        for electrode, role in enumerate(result.labels):
            if role not in (RECONSTRUCTION, IMPUTATION):
                continue
            truth = prepared.instances[:, electrode]
            estimate = result.series[:, electrode]
            time_corr, _ = pearson_rows(truth, estimate)
            freq_corr, _ = frequency_correlation_rows(truth, estimate, cfg, prepared.rate)
            for instance, (tc, fc) in enumerate(zip(time_corr, freq_corr)):
                records.append((plan.participant, electrode, plan.p, role, plan.set_index, instance, tc, fc))

    if not records:
        raise NoScorableElectrodesError(f"Method '{method}' produced no electrode with ground truth to score")

    scores = pd.DataFrame(records, columns=[
        'participant', 'electrode', 'regime', 'role', 'set_index', 'instance', 'time_corr', 'freq_corr',
    ])
    summary = (
        scores.groupby(['participant', 'regime', 'role'], sort=True)['time_corr']
        .agg(mean='mean', std=lambda s: float(np.std(s, ddof=0)), n='size')
        .reset_index()
    )
    summary.insert(1, 'method', method)
    electrodes = (
        scores.groupby(['participant', 'electrode', 'regime', 'role'], sort=True)
        .agg(time_corr=('time_corr', 'mean'), freq_corr=('freq_corr', 'mean'), n=('time_corr', 'size'))
        .reset_index()
    )
    electrodes.insert(1, 'method', method)

    report = EvalReport(
        method=method,
        summary=summary[SUMMARY_COLUMNS],
        electrodes=electrodes[ELECTRODE_COLUMNS],
        metadata={
            'mask_sets': int(max(plan.set_index for plan in mask_plans) + 1),
            'seeds': sorted({plan.seed for plan in mask_plans}),
            'regimes': sorted({plan.p for plan in mask_plans}),
        },
    )
    report.examples = _pick_examples(report, dataset, outputs, n_examples)
    logger.info("Evaluated %s on %d mask plans (%d scores)", method, len(mask_plans), len(scores))
    return report


def _pick_examples(report: EvalReport, dataset: PreparedDataset, outputs: Dict, n_examples: int) -> List[ElectrodeExample]:
    """Median and best imputed electrode at the highest regime, per participant."""
    imputed = report.electrodes[report.electrodes.role == IMPUTATION]
    if imputed.empty:
        return []
    examples = []
    regime = imputed.regime.max()
    for participant, group in imputed[imputed.regime == regime].groupby('participant', sort=True):
        ordered = group.sort_values(['time_corr', 'electrode']).reset_index(drop=True)
        picks = {'typical': ordered.iloc[(len(ordered) - 1) // 2], 'best': ordered.iloc[-1]}
        day = dataset.test_day(int(participant))
        prepared = dataset.day(int(participant), day)
        series = outputs.get((int(participant), day, float(regime), 0))
        if series is None:
            continue
        for kind, row in picks.items():
            electrode = int(row.electrode)
            for instance in range(min(n_examples, len(series))):
                examples.append(ElectrodeExample(
                    participant=int(participant),
                    electrode=electrode,
                    regime=float(regime),
                    kind=kind,
                    time_corr=float(row.time_corr),
                    rate=float(prepared.rate),
                    original=[float(v) for v in prepared.instances[instance, electrode]],
                    estimate=[float(v) for v in series[instance, electrode]],
                ))
    return examples


# --- comparisons --------------------------------------------------------

def compare_methods(method_report: EvalReport, baseline_report: EvalReport) -> pd.DataFrame:
    """
    Pair mean scores per (participant, regime, role).

    Returns:
        DataFrame with method_mean, baseline_mean and a method_wins flag
    """
    keys = ['participant', 'regime', 'role']
    merged = pd.merge(
        method_report.summary[keys + ['mean']].rename(columns={'mean': 'method_mean'}),
        baseline_report.summary[keys + ['mean']].rename(columns={'mean': 'baseline_mean'}),
        on=keys, how='inner',
    )
    merged['method_wins'] = merged.method_mean > merged.baseline_mean
    return merged.sort_values(keys).reset_index(drop=True)


def participant_wins(comparison: pd.DataFrame) -> pd.DataFrame:
    """Number of participants where the method beats the baseline, per regime and role."""
    return (
        comparison.groupby(['regime', 'role'], sort=True)
        .agg(wins=('method_wins', 'sum'), participants=('participant', 'nunique'))
        .reset_index()
    )


def frequency_time_rank_correlation(report: EvalReport, role: str = IMPUTATION) -> float:
    """Spearman correlation between per-electrode time and frequency correlations."""
    rows = report.electrodes[report.electrodes.role == role]
    if len(rows) < 2:
        raise NoScorableElectrodesError(f"Need at least two {role} electrodes for a rank correlation")
    rho, _ = stats.spearmanr(rows.time_corr, rows.freq_corr)
    return float(rho) if np.isfinite(rho) else 0.0

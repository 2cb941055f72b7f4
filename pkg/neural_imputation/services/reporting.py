"""
Reporting Service

Collects evaluation reports into run-level CSV tables and SVG figures:
- summary.csv / electrodes.csv: every method stacked
- scatter_<method>.svg: per-electrode imputation correlation against the baseline
- freq_vs_time_<method>.svg: frequency against time-series correlation per electrode
- spectrogram_<method>_<kind>.svg: original / estimate pair for a typical and the best electrode
- decoding.csv / decoding.summary.csv when decoding results are present

The output is a pure function of the reports: the same inputs give
byte-identical files.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use('Agg')
matplotlib.rcParams.update({
    'font.family': 'DejaVu Sans',
    'axes.unicode_minus': False,
    'svg.hashsalt': 'neural-imputation',
    'svg.fonttype': 'none',
})
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from ..exceptions import ConfigurationError  # noqa: E402
from .decoding import DecodingResult  # noqa: E402
from .evaluation import (  # noqa: E402
    ELECTRODE_COLUMNS, SUMMARY_COLUMNS, EvalReport, SpectrumConfig, compare_methods,
    frequency_time_rank_correlation, participant_wins, spectrogram, write_csv,
)
from .masking import IMPUTATION  # noqa: E402

logger = logging.getLogger(__name__)

SVG_METADATA = {'Date': None, 'Creator': None}


def scatter_points(method_report: EvalReport, baseline_report: EvalReport, role: str = IMPUTATION) -> pd.DataFrame:
    """Per-electrode (baseline, method) time-series correlation pairs."""
    keys = ['participant', 'electrode', 'regime', 'role']
    method_rows = method_report.electrodes[method_report.electrodes.role == role]
    baseline_rows = baseline_report.electrodes[baseline_report.electrodes.role == role]
    return pd.merge(
        baseline_rows[keys + ['time_corr']].rename(columns={'time_corr': 'baseline'}),
        method_rows[keys + ['time_corr']].rename(columns={'time_corr': 'method'}),
        on=keys, how='inner',
    ).sort_values(keys).reset_index(drop=True)


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format='svg', metadata=SVG_METADATA)
    plt.close(fig)
    return path


def plot_scatter(points: pd.DataFrame, method: str, baseline: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 4.5), constrained_layout=True)
    for regime, group in points.groupby('regime', sort=True):
        ax.scatter(group.baseline, group.method, s=10, label=f"{regime:.0%} masked")
    ax.plot([-1, 1], [-1, 1], color='grey', linewidth=0.8)
    ax.set_xlim(-1, 1)
    ax.set_ylim(-1, 1)
    ax.set_xlabel(f"{baseline} correlation")
    ax.set_ylabel(f"{method} correlation")
    ax.grid(True, alpha=0.3)
    ax.legend(loc='lower right', fontsize=8)
    return _save(fig, path)


def plot_frequency_vs_time(report: EvalReport, path: Path) -> Path:
    rows = report.electrodes[report.electrodes.role == IMPUTATION]
    fig, ax = plt.subplots(figsize=(4.5, 4.5), constrained_layout=True)
    ax.scatter(rows.time_corr, rows.freq_corr, s=10)
    ax.set_xlabel("Time-series correlation")
    ax.set_ylabel("Frequency correlation")
    if len(rows) >= 2:
        ax.set_title(f"Spearman {frequency_time_rank_correlation(report):.3f}")
    ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_spectrogram_pair(report: EvalReport, kind: str, path: Path,
                          spectrum: Optional[SpectrumConfig] = None) -> Optional[Path]:
    examples = [e for e in report.examples if e.kind == kind]
    if not examples:
        return None
    example = examples[0]
    cfg = spectrum or SpectrumConfig(window=min(64, len(example.original)))
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4), sharey=True, constrained_layout=True)
    for ax, (title, series) in zip(axes, (('Original', example.original), ('Estimate', example.estimate))):
        freqs, times, power = spectrogram(np.asarray(series), example.rate, cfg)
        ax.pcolormesh(times, freqs, np.log10(np.maximum(power, 1e-12)), shading='auto')
        ax.set_title(title)
        ax.set_xlabel("Time (s)")
    axes[0].set_ylabel("Frequency (Hz)")
    fig.suptitle(
        f"Participant {example.participant} electrode {example.electrode} "
        f"({kind}, r={example.time_corr:.3f})"
    )
    return _save(fig, path)


def emit_report(
    reports: Sequence[EvalReport],
    out_dir: str,
    baseline: str = 'baseline',
    decoding: Sequence[DecodingResult] = (),
) -> List[Path]:
    """
    Write tables and figures for a set of method reports.

    Args:
        reports: One EvalReport per method
        out_dir: Target directory
        baseline: Method the scatter plots compare against
        decoding: Optional decoding results

    Returns:
        Paths of every written artifact
    """
    if not reports and not decoding:
        raise ConfigurationError("Nothing to report: no evaluation or decoding results")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    ordered = sorted(reports, key=lambda r: r.method)
    by_method = {r.method: r for r in ordered}
    paths: List[Path] = []

    if ordered:
        summary = pd.concat([r.summary for r in ordered], ignore_index=True)[SUMMARY_COLUMNS]
        electrodes = pd.concat([r.electrodes for r in ordered], ignore_index=True)[ELECTRODE_COLUMNS]
        paths.append(write_csv(summary, root / 'summary.csv'))
        paths.append(write_csv(electrodes, root / 'electrodes.csv'))

    reference = by_method.get(baseline)
    if reference is None and ordered:
        logger.warning("Baseline '%s' not among reports (%s); skipping scatter plots",
                       baseline, ', '.join(by_method))
    comparisons = []
    for report in ordered:
        if reference is not None and report.method != baseline:
            points = scatter_points(report, reference)
            paths.append(plot_scatter(points, report.method, baseline, root / f"scatter_{report.method}.svg"))
            wins = participant_wins(compare_methods(report, reference))
            wins.insert(0, 'method', report.method)
            comparisons.append(wins)
        paths.append(plot_frequency_vs_time(report, root / f"freq_vs_time_{report.method}.svg"))
        for kind in ('typical', 'best'):
            path = plot_spectrogram_pair(report, kind, root / f"spectrogram_{report.method}_{kind}.svg")
            if path is not None:
                paths.append(path)
    if comparisons:
        paths.append(write_csv(pd.concat(comparisons, ignore_index=True), root / 'wins.csv'))

    if decoding:
        ordered_decoding = sorted(decoding, key=lambda d: d.method)
        paths.append(write_csv(pd.concat([d.table.assign(method=d.method) for d in ordered_decoding],
                                         ignore_index=True), root / 'decoding.csv'))
        paths.append(write_csv(pd.concat([d.summary for d in ordered_decoding], ignore_index=True),
                               root / 'decoding.summary.csv'))

    logger.info("Report written to %s (%d artifacts)", root, len(paths))
    return paths

from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from ..exceptions import ConfigurationError, NoScorableElectrodesError, ShapeMismatchError
from ..imputers import LinearImputer, ZeroImputer
from ..services.evaluation import (
    EvalReport,
    EvaluationConfig,
    SpectrumConfig,
    compare_methods,
    evaluate_model,
    frequency_correlation,
    frequency_time_rank_correlation,
    held_out_plans,
    participant_wins,
    pearson,
    power_spectrum,
    spectrogram,
)
from ..services.masking import IMPUTATION, RECONSTRUCTION
from .helpers import correlated_dataset, line_geometry

SPECTRUM = SpectrumConfig(window=16)


class PearsonTests(SimpleTestCase):
    def setUp(self):
        self.series = np.random.default_rng(0).standard_normal(200)

    def test_identity_and_sign(self):
        self.assertAlmostEqual(pearson(self.series, self.series)[0], 1.0)
        self.assertAlmostEqual(pearson(self.series, -self.series)[0], -1.0)

    def test_affine_invariance(self):
        value, _ = pearson(self.series, np.roll(self.series, 1))
        shifted, _ = pearson(3.0 * self.series + 7.0, np.roll(self.series, 1))
        self.assertAlmostEqual(value, shifted)

    def test_symmetric_in_its_arguments(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            length = int(rng.integers(2, 50))
            a, b = rng.standard_normal(length), rng.standard_normal(length)
            self.assertEqual(pearson(a, b)[0], pearson(b, a)[0])

    def test_worked_example_matches_covariance_formula(self):
        a, b = np.array([1.0, 0.0, 2.0, 4.0]), np.array([2.0, 1.0, 1.0, 3.0])
        expected = np.mean((a - a.mean()) * (b - b.mean())) / (a.std() * b.std())
        value, degenerate = pearson(a, b)
        self.assertAlmostEqual(value, expected, places=12)
        # centered cross-product 3.75, sums of squares 8.75 and 2.75
        self.assertAlmostEqual(value, 3.75 / np.sqrt(8.75 * 2.75), places=12)
        self.assertAlmostEqual(value, 0.76447, places=5)
        self.assertFalse(degenerate)

    def test_constant_series_is_degenerate(self):
        self.assertEqual(pearson(self.series, np.zeros(200)), (0.0, True))

    def test_length_checks(self):
        with self.assertRaises(ShapeMismatchError):
            pearson([1.0, 2.0], [1.0, 2.0, 3.0])
        with self.assertRaises(ShapeMismatchError):
            pearson([1.0], [1.0])


class SpectrumTests(SimpleTestCase):
    def test_power_integrates_to_mean_square(self):
        series = 2.0 * np.random.default_rng(1).standard_normal(20000)
        freqs, power = power_spectrum(series, SpectrumConfig(window=256), rate=250.0)
        df = freqs[1] - freqs[0]
        self.assertAlmostEqual(float(power.sum() * df), float(np.mean(series ** 2)), delta=0.05 * 4.0)

    def test_peak_at_sine_frequency(self):
        t = np.arange(5000) / 250.0
        freqs, power = power_spectrum(np.sin(2 * np.pi * 20.0 * t), SpectrumConfig(window=250), rate=250.0)
        self.assertAlmostEqual(freqs[np.argmax(power)], 20.0, delta=1.0)

    def test_frequency_correlation_ignores_scale(self):
        series = np.random.default_rng(2).standard_normal(400)
        value, degenerate = frequency_correlation(series, 5.0 * series, SpectrumConfig(window=64))
        self.assertAlmostEqual(value, 1.0)
        self.assertFalse(degenerate)

    def test_window_longer_than_series(self):
        with self.assertRaises(ShapeMismatchError):
            power_spectrum(np.zeros(32), SpectrumConfig(window=64))

    def test_rate_defaults(self):
        self.assertEqual(SpectrumConfig.for_rate(5.0).window, 64)
        self.assertEqual(SpectrumConfig.for_rate(250.0).window, 256)

    def test_spectrogram_shape(self):
        freqs, times, power = spectrogram(np.random.default_rng(3).standard_normal(2000), 250.0)
        self.assertEqual(power.shape, (len(freqs), len(times)))
        self.assertEqual(len(freqs), 129)


class EvaluateModelTests(SimpleTestCase):
    def setUp(self):
        self.dataset = correlated_dataset(participants=2, electrodes=6, noise=0.05, missing={(1, 2): [5]})
        self.plans = held_out_plans(self.dataset, regimes=(0.0, 0.2, 0.5), n_sets=2, seed=1)

    def test_plans_cover_test_days(self):
        self.assertEqual({(p.participant, p.day) for p in self.plans}, {(0, 2), (1, 2)})
        self.assertEqual(len([p for p in self.plans if p.p == 0.0]), 2)
        self.assertEqual(len([p for p in self.plans if p.p == 0.5]), 4)

    def test_zero_fill_scores_zero(self):
        report = evaluate_model(ZeroImputer(), self.dataset, self.plans, SPECTRUM)
        imputed = report.summary[report.summary.role == IMPUTATION]
        self.assertTrue((imputed['mean'] == 0.0).all())
        reconstructed = report.summary[report.summary.role == RECONSTRUCTION]
        np.testing.assert_allclose(reconstructed['mean'], 1.0)
        self.assertEqual(report.score(0, 0.2), 0.0)

    def test_naturally_missing_electrodes_are_not_scored(self):
        report = evaluate_model(ZeroImputer(), self.dataset, self.plans, SPECTRUM)
        scored = report.electrodes[report.electrodes.participant == 1]
        self.assertNotIn(5, set(scored.electrode))

    def test_counts_cover_instances_and_sets(self):
        report = evaluate_model(ZeroImputer(), self.dataset, self.plans, SPECTRUM)
        row = report.summary[(report.summary.participant == 0) & (report.summary.regime == 0.5)
                             & (report.summary.role == IMPUTATION)]
        # 3 of 6 electrodes masked, 6 instances, 2 sets
        self.assertEqual(int(row['n'].iloc[0]), 3 * 6 * 2)

    def test_baseline_beats_zero_fill(self):
        baseline = LinearImputer().fit(self.dataset, line_geometry(2, 6))
        method = evaluate_model(baseline, self.dataset, self.plans, SPECTRUM)
        zero = evaluate_model(ZeroImputer(), self.dataset, self.plans, SPECTRUM)

        comparison = compare_methods(method, zero)
        imputed = comparison[comparison.role == IMPUTATION]
        self.assertTrue(imputed.method_wins.all())
        wins = participant_wins(comparison)
        row = wins[(wins.role == IMPUTATION) & (wins.regime == 0.2)]
        self.assertEqual(int(row.wins.iloc[0]), 2)
        self.assertTrue(-1.0 <= frequency_time_rank_correlation(method) <= 1.0)

    def test_summary_means_lie_within_electrode_rows(self):
        baseline = LinearImputer().fit(self.dataset, line_geometry(2, 6))
        report = evaluate_model(baseline, self.dataset, self.plans, SPECTRUM)
        electrodes = report.electrodes
        for row in report.summary.itertuples():
            matching = electrodes[(electrodes.participant == row.participant) & (electrodes.regime == row.regime)
                                  & (electrodes.role == row.role)]
            self.assertGreater(len(matching), 0)
            self.assertGreaterEqual(row.mean, matching.time_corr.min() - 1e-12)
            self.assertLessEqual(row.mean, matching.time_corr.max() + 1e-12)
            self.assertEqual(int(matching.n.sum()), int(row.n))

    def test_examples_at_highest_regime(self):
        baseline = LinearImputer().fit(self.dataset, line_geometry(2, 6))
        report = evaluate_model(baseline, self.dataset, self.plans, SPECTRUM, n_examples=2)
        self.assertEqual({e.kind for e in report.examples}, {'typical', 'best'})
        self.assertTrue(all(e.regime == 0.5 for e in report.examples))
        self.assertEqual(len(report.examples), 2 * 2 * 2)
        self.assertEqual(len(report.examples[0].original), 32)

    def test_nothing_to_score(self):
        only_missing = correlated_dataset(participants=1, electrodes=2, missing={(0, 2): [0, 1]})
        plans = held_out_plans(only_missing, regimes=(0.0,), seed=0)
        with self.assertRaises(NoScorableElectrodesError):
            evaluate_model(ZeroImputer(), only_missing, plans, SPECTRUM)

    def test_report_files(self):
        report = evaluate_model(ZeroImputer(), self.dataset, self.plans, SPECTRUM)
        with TemporaryDirectory() as tmp:
            paths = report.save(tmp)
            self.assertEqual([p.name for p in paths], ['zero.summary.csv', 'zero.electrodes.csv', 'zero.report.json'])
            text = Path(paths[0]).read_bytes().decode('utf-8')
            loaded = EvalReport.load(tmp, 'zero')

        self.assertNotIn('\r', text)
        header, first = text.splitlines()[:2]
        self.assertEqual(header, 'participant,method,regime,role,mean,std,n')
        self.assertEqual(first.split(',')[2], '0.0000')
        pd.testing.assert_frame_equal(loaded.summary[['participant', 'n']], report.summary[['participant', 'n']])
        self.assertEqual(loaded.metadata['mask_sets'], 2)


class EvaluationConfigTests(SimpleTestCase):
    def test_defaults(self):
        config = EvaluationConfig()
        self.assertEqual(config.regimes, [0.0, 0.1, 0.2, 0.5])
        self.assertIsNone(config.spectrum_config())

    def test_spectrum_block(self):
        config = EvaluationConfig.from_dict({'spectrum': {'window': 32}})
        self.assertEqual(config.spectrum_config().window, 32)

    def test_regime_out_of_range(self):
        with self.assertRaises(ConfigurationError):
            EvaluationConfig.from_dict({'regimes': [0.1, 1.2]})

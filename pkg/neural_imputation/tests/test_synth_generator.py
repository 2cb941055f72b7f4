from tempfile import TemporaryDirectory

import numpy as np
from django.test import SimpleTestCase

from ..exceptions import ConfigurationError, InvalidBandError, ScheduleOverlapError, UnstableProcessError
from ..services.synth_generator import (
    MOVE,
    REST,
    EventSchedule,
    GeneratorConfig,
    ar2_process,
    check_stationary,
    generate_dataset,
    inject_class_signal,
    load_ground_truth,
    make_event_schedule,
    mixing_matrix,
    oracle_linear_bound,
    save_ground_truth,
)
from .helpers import small_generator


class Ar2Tests(SimpleTestCase):
    def test_unit_stationary_variance(self):
        a1, a2 = GeneratorConfig(n_latents=1, latent_frequencies=[10.0]).coefficients()[0]
        series = ar2_process(a1, a2, 100000, np.random.default_rng(0))
        self.assertAlmostEqual(float(series.var()), 1.0, delta=0.15)

    def test_oscillation_frequency(self):
        a1, a2 = GeneratorConfig(n_latents=1, latent_frequencies=[25.0]).coefficients()[0]
        series = ar2_process(a1, a2, 50000, np.random.default_rng(1))
        spectrum = np.abs(np.fft.rfft(series)) ** 2
        freqs = np.fft.rfftfreq(len(series), d=1 / 500.0)
        self.assertAlmostEqual(freqs[np.argmax(spectrum)], 25.0, delta=2.0)

    def test_unstable_coefficients(self):
        with self.assertRaises(UnstableProcessError):
            check_stationary(1.5, -0.4)
        with self.assertRaises(UnstableProcessError):
            GeneratorConfig(n_latents=1, ar_coefficients=[[0.5, 1.0]]).validate()


class GeneratorConfigTests(SimpleTestCase):
    def test_unknown_key(self):
        with self.assertRaisesMessage(ConfigurationError, "Unknown generator keys ['channels']"):
            GeneratorConfig.from_dict({'channels': 8})

    def test_frequency_count_must_match_latents(self):
        with self.assertRaises(ConfigurationError):
            GeneratorConfig(n_latents=3, latent_frequencies=[1.0, 2.0]).validate()


class GenerateDatasetTests(SimpleTestCase):
    def test_same_seed_same_bytes(self):
        first, _, _ = generate_dataset(small_generator())
        second, _, _ = generate_dataset(small_generator())
        for record in first.iter_days():
            np.testing.assert_array_equal(record.samples, second.day(record.participant, record.day).samples)

    def test_seed_changes_data(self):
        first, _, _ = generate_dataset(small_generator())
        other, _, _ = generate_dataset(small_generator(seed=4))
        self.assertFalse(np.array_equal(first.day(0, 0).samples, other.day(0, 0).samples))

    def test_shapes_and_geometry(self):
        recording, geometry, truth = generate_dataset(small_generator())
        self.assertEqual(recording.participants(), [0, 1])
        self.assertEqual(recording.days_for(1), [0, 1])
        self.assertEqual(recording.day(1, 1).samples.shape, (9, 6000))
        self.assertEqual(geometry.for_participant(0).shape, (9, 3))
        self.assertEqual(truth.mixing[0].shape, (9, 3))

    def test_mixing_decays_with_distance(self):
        electrodes = np.array([[0.0, 0, 0], [5.0, 0, 0], [20.0, 0, 0]])
        mixing = mixing_matrix(electrodes, np.zeros((1, 3)), length_scale=10.0)
        np.testing.assert_allclose(mixing[:, 0], np.exp([0.0, -0.25, -4.0]))

    def test_ground_truth_reproduces_samples(self):
        recording, _, truth = generate_dataset(small_generator())
        np.testing.assert_allclose(truth.observed(1, 0), recording.day(1, 0).samples, rtol=1e-5, atol=1e-5)

    def test_ground_truth_round_trip(self):
        _, _, truth = generate_dataset(small_generator())
        with TemporaryDirectory() as tmp:
            save_ground_truth(truth, tmp)
            loaded = load_ground_truth(tmp)
        self.assertEqual(loaded.config, truth.config)
        np.testing.assert_array_equal(loaded.observed(0, 1), truth.observed(0, 1))

    def test_natural_missing_is_capped(self):
        recording, _, _ = generate_dataset(small_generator(natural_missing_prob=0.9, max_missing_fraction=0.3))
        for record in recording.iter_days():
            self.assertLessEqual(int(record.missing.sum()), 2)
            self.assertFalse(np.any(record.samples[record.missing]))

    def test_analytic_correlation_matches_data(self):
        cfg = small_generator(gain_drift_std=0.0, day_samples=60000)
        recording, _, truth = generate_dataset(cfg)
        empirical = np.corrcoef(recording.day(0, 0).samples)
        np.testing.assert_allclose(empirical, truth.analytic_correlation(0), atol=0.1)


class OracleBoundTests(SimpleTestCase):
    def test_rank_one_noiseless_is_perfect(self):
        cfg = small_generator(n_latents=1, noise_std=0.0)
        _, _, truth = generate_dataset(cfg)
        self.assertAlmostEqual(oracle_linear_bound(truth, 0, 4, [3]), 1.0, places=6)

    def test_more_neighbors_never_hurt(self):
        _, _, truth = generate_dataset(small_generator())
        bounds = [oracle_linear_bound(truth, 0, 4, [3, 5, 1, 7][:n]) for n in range(1, 5)]
        for fewer, more in zip(bounds, bounds[1:]):
            self.assertGreaterEqual(more + 1e-9, fewer)
        self.assertEqual(oracle_linear_bound(truth, 0, 4, []), 0.0)

    def test_noise_lowers_the_bound(self):
        _, _, quiet = generate_dataset(small_generator(noise_std=0.05))
        _, _, loud = generate_dataset(small_generator(noise_std=1.0))
        self.assertGreater(oracle_linear_bound(quiet, 0, 4, [3, 5]), oracle_linear_bound(loud, 0, 4, [3, 5]))


class EventScheduleTests(SimpleTestCase):
    def test_balanced_and_disjoint(self):
        schedule = make_event_schedule(20000, 10, 1000, seed=2)
        self.assertEqual(int(np.sum(schedule.labels == MOVE)), 5)
        self.assertEqual(int(np.sum(schedule.labels == REST)), 5)
        self.assertTrue(np.all(np.diff(np.sort(schedule.starts)) >= 1000))
        schedule.check(20000)

    def test_too_many_events(self):
        with self.assertRaises(ScheduleOverlapError):
            make_event_schedule(5000, 6, 1000, seed=0)

    def test_overlap_detected(self):
        schedule = EventSchedule(starts=np.array([0, 500]), labels=np.array([MOVE, REST]), window_len=1000)
        with self.assertRaises(ScheduleOverlapError):
            schedule.check(5000)


class InjectClassSignalTests(SimpleTestCase):
    def setUp(self):
        self.recording, _, _ = generate_dataset(small_generator(natural_missing_prob=0.5, max_missing_fraction=0.3))
        self.schedule = make_event_schedule(6000, 4, 1000, seed=1)

    def test_bursts_only_on_move_windows(self):
        events = inject_class_signal(self.recording, 0, 1, self.schedule, 2.0, (8.0, 30.0), seed=3)
        record = self.recording.day(0, 1)
        for index, (start, label) in enumerate(zip(self.schedule.starts, self.schedule.labels)):
            original = record.samples[:, start:start + 1000]
            changed = not np.allclose(events.windows[index], original)
            self.assertEqual(changed, label == MOVE)

    def test_missing_electrodes_stay_zero(self):
        events = inject_class_signal(self.recording, 0, 1, self.schedule, 2.0, (8.0, 30.0), seed=3)
        np.testing.assert_array_equal(events.missing, self.recording.day(0, 1).missing)
        self.assertFalse(np.any(events.windows[:, events.missing]))
        self.assertTrue(set(events.burst_electrodes).isdisjoint(np.flatnonzero(events.missing)))

    def test_recording_is_unchanged(self):
        before = self.recording.day(0, 1).samples.copy()
        inject_class_signal(self.recording, 0, 1, self.schedule, 2.0, (8.0, 30.0), seed=3)
        np.testing.assert_array_equal(self.recording.day(0, 1).samples, before)

    def test_invalid_band(self):
        with self.assertRaises(InvalidBandError):
            inject_class_signal(self.recording, 0, 1, self.schedule, 1.0, (30.0, 8.0))

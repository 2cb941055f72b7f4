from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
from django.test import SimpleTestCase

from ..exceptions import DatasetValidationError, UnknownRecordingError
from ..services.ragged_store import (
    DayRecording,
    RaggedRecording,
    load_dataset,
    save_dataset,
)
from .helpers import line_geometry, tiny_recording


class RaggedStoreRoundTripTests(SimpleTestCase):
    def setUp(self):
        self.tmp = TemporaryDirectory()
        self.root = Path(self.tmp.name) / 'dataset'
        self.recording, self.geometry = tiny_recording(missing={(0, 1): [2], (1, 0): [0, 3]})

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_preserves_samples_and_flags(self):
        save_dataset(str(self.root), self.recording, self.geometry)
        loaded, geometry = load_dataset(str(self.root))

        self.assertEqual(loaded.participants(), [0, 1])
        for record in self.recording.iter_days():
            other = loaded.day(record.participant, record.day)
            np.testing.assert_array_equal(other.samples, record.samples)
            np.testing.assert_array_equal(other.missing, record.missing)
            self.assertEqual(other.sampling_rate, 500.0)
        np.testing.assert_array_equal(geometry.for_participant(1), self.geometry.for_participant(1))

    def test_missing_electrodes_have_no_payload(self):
        save_dataset(str(self.root), self.recording, self.geometry)
        self.assertFalse((self.root / 'data' / 'p0_d1_e2.f32').exists())
        self.assertTrue((self.root / 'data' / 'p0_d1_e1.f32').exists())

    def test_truncated_payload_is_rejected(self):
        save_dataset(str(self.root), self.recording, self.geometry)
        payload = self.root / 'data' / 'p1_d1_e2.f32'
        payload.write_bytes(payload.read_bytes()[:-4])

        with self.assertRaises(DatasetValidationError) as ctx:
            load_dataset(str(self.root))
        self.assertEqual((ctx.exception.participant, ctx.exception.day, ctx.exception.electrode), (1, 1, 2))
        self.assertIn('Length mismatch', str(ctx.exception))

    def test_partial_sample_is_rejected(self):
        save_dataset(str(self.root), self.recording, self.geometry)
        payload = self.root / 'data' / 'p0_d0_e0.f32'
        payload.write_bytes(payload.read_bytes()[:-2])
        with self.assertRaises(DatasetValidationError):
            load_dataset(str(self.root))

    def test_missing_manifest(self):
        with self.assertRaisesMessage(DatasetValidationError, 'Manifest not found'):
            load_dataset(str(self.root))


class RaggedRecordingTests(SimpleTestCase):
    def test_availability_partitions_electrodes(self):
        recording, _ = tiny_recording(missing={(0, 0): [1, 3]})
        sets = recording.availability(0, 0)
        self.assertEqual(sets.observed_ids(), [0, 2])
        self.assertEqual(sets.missing, frozenset({1, 3}))
        self.assertEqual(sets.electrode_count, 4)

    def test_all_missing_day_logs_warning(self):
        recording, _ = tiny_recording(missing={(1, 1): [0, 1, 2, 3]})
        with self.assertLogs('neural_imputation.services.ragged_store', level='WARNING'):
            sets = recording.availability(1, 1)
        self.assertTrue(sets.all_missing)

    def test_slice_counts(self):
        recording, _ = tiny_recording(n_samples=1200)
        self.assertEqual(len(recording.slice_instances(0, 0, window_len=400, stride=400)), 3)

        recording, _ = tiny_recording(n_samples=1000)
        windows = recording.slice_instances(0, 0, window_len=400, stride=400)
        self.assertEqual(len(windows), 2)
        self.assertEqual(windows[1].shape, (4, 400))

    def test_short_day_yields_no_instances(self):
        recording, _ = tiny_recording(n_samples=300)
        with self.assertLogs('neural_imputation.services.ragged_store', level='WARNING'):
            self.assertEqual(recording.slice_instances(0, 0, window_len=400, stride=400), [])

    def test_test_day_is_last_day(self):
        recording, _ = tiny_recording(days=3)
        self.assertEqual(recording.test_day(0), 2)
        self.assertEqual(recording.train_days(0), [0, 1])

    def test_unknown_participant(self):
        recording, _ = tiny_recording()
        with self.assertRaisesMessage(UnknownRecordingError, 'Available participants: 0, 1'):
            recording.day(5, 0)

    def test_days_are_read_only(self):
        recording, _ = tiny_recording()
        with self.assertRaises(ValueError):
            recording.day(0, 0).samples[0, 0] = 1.0

    def test_payload_on_missing_electrode_is_rejected(self):
        samples = np.ones((3, 10), dtype=np.float32)
        flags = np.array([False, True, False])
        with self.assertRaises(DatasetValidationError) as ctx:
            RaggedRecording({0: 3}, {(0, 0): DayRecording(0, 0, 500.0, samples, flags)})
        self.assertEqual(ctx.exception.electrode, 1)

    def test_non_finite_sample_is_rejected(self):
        samples = np.zeros((2, 10), dtype=np.float32)
        samples[1, 4] = np.nan
        with self.assertRaisesMessage(DatasetValidationError, 'index 4'):
            RaggedRecording({0: 2}, {(0, 0): DayRecording(0, 0, 500.0, samples, np.zeros(2, dtype=bool))})

    def test_geometry_must_match_electrode_count(self):
        recording, _ = tiny_recording(electrodes=4)
        with TemporaryDirectory() as tmp:
            with self.assertRaises(DatasetValidationError):
                save_dataset(tmp, recording, line_geometry(2, 3))

from tempfile import TemporaryDirectory

import numpy as np
from django.test import SimpleTestCase

from ..exceptions import ConfigurationError, UnregisteredParticipantError
from ..imputers import CnnaeImputer, ImputerRegistry, LinearImputer, NeighborWeights, ZeroImputer
from ..imputers.linear_imputer import fit_weights, impute_linear, neighbor_table
from ..networks import CnnaeModel
from ..services.evaluation import pearson_rows
from ..services.masking import ElectrodeRole, MaskPlan, apply_mask
from ..services.signal_pipeline import PipelineConfig, PreparedDataset, PreparedDay
from .helpers import correlated_dataset, line_geometry, tiny_model_config


def related_dataset(n_instances=60, length=200, seed=0):
    """Electrode 1 copies electrode 0, electrode 2 negates it, electrode 3 is independent."""
    rng = np.random.default_rng(seed)
    days = {}
    for day in range(3):
        base = rng.standard_normal((n_instances, length))
        other = rng.standard_normal((n_instances, length))
        instances = np.stack([base, base, -base, other], axis=1).astype(np.float32)
        days[(0, day)] = PreparedDay(0, day, instances, np.zeros(4, dtype=bool), 5.0)
    return PreparedDataset(days, PipelineConfig())


class NeighborTableTests(SimpleTestCase):
    def test_collinear_order(self):
        positions = np.array([[x, 0.0, 0.0] for x in range(4)])
        table = neighbor_table(positions)
        self.assertEqual(table[0], [1, 2, 3])
        self.assertEqual(table[3], [2, 1, 0])

    def test_ties_prefer_lower_id(self):
        positions = np.array([[0.0, 0, 0], [-1.0, 0, 0], [1.0, 0, 0], [5.0, 0, 0]])
        self.assertEqual(neighbor_table(positions, k=2)[0], [1, 2])

    def test_too_few_electrodes(self):
        positions = np.array([[x, 0.0, 0.0] for x in range(3)])
        with self.assertLogs('neural_imputation.imputers.linear_imputer', level='WARNING'):
            table = neighbor_table(positions, k=3)
        self.assertEqual(table[0], [1, 2])


class FitWeightsTests(SimpleTestCase):
    def test_weights_follow_correlation(self):
        dataset = related_dataset()
        weights = fit_weights(dataset, 0, {0: [1, 2, 3]})
        (n1, w1), (n2, w2), (n3, w3) = weights.neighbors[0]
        self.assertEqual((n1, n2, n3), (1, 2, 3))
        self.assertAlmostEqual(w1, 1.0, places=5)
        self.assertAlmostEqual(w2, -1.0, places=5)
        self.assertLess(abs(w3), 0.1)

    def test_only_train_days_are_used(self):
        dataset = related_dataset()
        test_day = dataset.day(0, 2)
        test_day.instances[:, 1] = -test_day.instances[:, 0]
        weights = fit_weights(dataset, 0, {0: [1]})
        self.assertAlmostEqual(weights.neighbors[0][0][1], 1.0, places=5)

    def test_neighbor_without_shared_data_is_dropped(self):
        dataset = correlated_dataset(participants=1, electrodes=4, days=3, missing={(0, 0): [3], (0, 1): [3]})
        weights = fit_weights(dataset, 0, {0: [1, 3], 3: [2]})
        self.assertEqual([n for n, _ in weights.neighbors[0]], [1])
        self.assertEqual(weights.unimputable, [3])

    def test_serialization(self):
        weights = NeighborWeights(participant=2, neighbors={0: [(1, 0.5), (2, -0.25)]}, unimputable=[4])
        self.assertEqual(NeighborWeights.from_dict(weights.to_dict()), weights)


class ImputeLinearTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(0)
        self.target = rng.standard_normal((2, 50))
        self.instances = np.stack([self.target] * 4, axis=1)
        self.instances[:, 0] = 0.0
        self.weights = NeighborWeights(participant=0, neighbors={0: [(1, 1.0), (2, 1.0), (3, 1.0)]})

    def test_sum_of_equal_neighbors(self):
        observed = np.array([False, True, True, True])
        series, unimputable = impute_linear(self.instances, self.weights, observed)
        np.testing.assert_allclose(series[:, 0], 3 * self.target)
        np.testing.assert_allclose(pearson_rows(series[:, 0], self.target)[0], 1.0)
        self.assertFalse(unimputable[0])

    def test_missing_neighbor_is_skipped(self):
        observed = np.array([False, True, False, True])
        series, _ = impute_linear(self.instances, self.weights, observed)
        np.testing.assert_allclose(series[:, 0], 2 * self.target)

    def test_no_observed_neighbor(self):
        observed = np.array([False, False, False, False])
        series, unimputable = impute_linear(self.instances, self.weights, observed)
        self.assertTrue(unimputable.all())
        self.assertFalse(np.any(series))

    def test_weight_and_signal_rescaling_cancel(self):
        rng = np.random.default_rng(1)
        instances = rng.standard_normal((3, 4, 30))
        observed = np.ones(4, dtype=bool)
        weights = NeighborWeights(participant=0, neighbors={0: [(1, 0.4), (2, -0.7)]})
        scaled = instances.copy()
        scaled[:, 2] *= 8.0
        rescaled = NeighborWeights(participant=0, neighbors={0: [(1, 0.4), (2, -0.7 / 8.0)]})
        np.testing.assert_allclose(
            impute_linear(instances, weights, observed)[0][:, 0],
            impute_linear(scaled, rescaled, observed)[0][:, 0],
            rtol=1e-12,
        )

    def test_positive_weight_scale_leaves_correlation(self):
        rng = np.random.default_rng(2)
        instances = rng.standard_normal((3, 4, 30))
        observed = np.ones(4, dtype=bool)
        weights = NeighborWeights(participant=0, neighbors={0: [(1, 0.4), (2, -0.7)]})
        doubled = NeighborWeights(participant=0, neighbors={0: [(1, 0.8), (2, -1.4)]})
        first = pearson_rows(impute_linear(instances, weights, observed)[0][:, 0], instances[:, 0])[0]
        second = pearson_rows(impute_linear(instances, doubled, observed)[0][:, 0], instances[:, 0])[0]
        np.testing.assert_allclose(first, second)


class LinearImputerTests(SimpleTestCase):
    def setUp(self):
        self.dataset = correlated_dataset(participants=2, electrodes=5, noise=0.05)
        self.geometry = line_geometry(2, 5)

    def masked_test_day(self, participant, masked):
        day = self.dataset.day(participant, self.dataset.test_day(participant))
        plan = MaskPlan(participant, day.day, 0.2, 0, 0, tuple(masked))
        return day, apply_mask(day.instances, plan, day.availability())

    def test_imputes_masked_electrode(self):
        imputer = LinearImputer().fit(self.dataset, self.geometry)
        day, masked = self.masked_test_day(1, [2])
        output = imputer.impute(1, masked)
        self.assertEqual(output.series.shape, day.instances.shape)
        self.assertEqual(output.labels[2], 'imputation')
        self.assertEqual(output.labels[0], 'reconstruction')
        self.assertGreater(pearson_rows(output.series[:, 2], day.instances[:, 2])[0].mean(), 0.8)

    def test_requires_geometry(self):
        with self.assertRaises(ConfigurationError):
            LinearImputer().fit(self.dataset)

    def test_unfitted_participant(self):
        imputer = LinearImputer().fit(self.dataset, self.geometry)
        _, masked = self.masked_test_day(0, [1])
        imputer.weights.pop(0)
        with self.assertRaisesMessage(UnregisteredParticipantError, 'Fitted participants: 1'):
            imputer.impute(0, masked)

    def test_save_and_load(self):
        imputer = LinearImputer().fit(self.dataset, self.geometry)
        with TemporaryDirectory() as tmp:
            imputer.save(tmp)
            loaded = LinearImputer.load(tmp)
        self.assertEqual(loaded.weights, imputer.weights)


class ZeroImputerTests(SimpleTestCase):
    def test_hidden_rows_are_zero_and_unimputable(self):
        dataset = correlated_dataset(participants=1, electrodes=4, missing={(0, 2): [3]})
        day = dataset.day(0, 2)
        masked = apply_mask(day.instances, MaskPlan(0, 2, 0.25, 0, 0, (1,)), day.availability())
        output = ZeroImputer().impute(0, masked)
        self.assertFalse(np.any(output.series[:, [1, 3]]))
        np.testing.assert_array_equal(output.series[:, 0], day.instances[:, 0])
        self.assertEqual(list(output.unimputable), [False, True, False, True])
        self.assertEqual(masked.roles[3], ElectrodeRole.MISSING)


class CnnaeImputerTests(SimpleTestCase):
    def setUp(self):
        dataset = correlated_dataset(participants=1, electrodes=3, n_instances=6)
        day = dataset.day(0, 2)
        self.masked = apply_mask(day.instances, MaskPlan(0, 2, 0.3, 0, 0, (1,)), day.availability())
        self.model = CnnaeModel(3, tiny_model_config(), seed=2)

    def imputer(self, predict_batch_size):
        config = tiny_model_config(predict_batch_size=predict_batch_size)
        return CnnaeImputer(models={0: self.model}, model_config=config)

    def test_inference_chunking_leaves_output_unchanged(self):
        whole = self.imputer(16).impute(0, self.masked)
        self.assertEqual(whole.series.shape, (6, 3, 32))
        for size in (1, 4):
            chunked = self.imputer(size).impute(0, self.masked)
            np.testing.assert_allclose(chunked.series, whole.series, atol=1e-6)
            self.assertEqual(chunked.labels, whole.labels)

    def test_untrained_participant(self):
        with self.assertRaisesMessage(UnregisteredParticipantError, 'Trained participants: 0'):
            self.imputer(4).impute(3, self.masked)


class ImputerRegistryTests(SimpleTestCase):
    def test_registered_methods(self):
        self.assertEqual(sorted(ImputerRegistry.list_imputers()), ['baseline', 'cnnae', 'mcnnae', 'zero'])
        self.assertIsInstance(ImputerRegistry.create('Zero'), ZeroImputer)

    def test_unknown_method(self):
        with self.assertRaisesMessage(ConfigurationError, 'Available imputers: baseline, cnnae, mcnnae, zero'):
            ImputerRegistry.get_class('kriging')

from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from ..exceptions import ConfigurationError
from ..networks import CnnaeModel, McnnaeModel
from ..services.masking import ElectrodeRole
from ..services.ragged_store import AvailabilitySets
from ..training import TrainConfig, Trainer, masked_batch
from .helpers import correlated_dataset, tiny_model_config


def quick_config(**overrides):
    values = dict(epochs=2, batch_size=4, per_participant_batch=2, learning_rate=1e-2, seed=4)
    values.update(overrides)
    return TrainConfig(**values).validate()


class MaskedBatchTests(SimpleTestCase):
    def setUp(self):
        self.instances = np.random.default_rng(0).standard_normal((4, 10, 16))
        flags = np.zeros(10, dtype=bool)
        flags[[8, 9]] = True
        self.instances[:, flags] = 0.0
        self.sets = AvailabilitySets.from_missing(0, 0, flags)

    def test_masks_within_fraction_range(self):
        batch = masked_batch(self.instances, self.sets, TrainConfig(), np.random.default_rng(1))
        self.assertTrue(0.05 <= batch.fraction <= 0.10)
        self.assertEqual(batch.inputs.shape, (4, 20, 16))
        for roles in batch.roles:
            self.assertEqual(int(np.sum(roles == ElectrodeRole.MASKED)), 1)
            self.assertEqual(list(np.flatnonzero(roles == ElectrodeRole.MISSING)), [8, 9])

    def test_masked_rows_hidden_but_targeted(self):
        batch = masked_batch(self.instances, self.sets, TrainConfig(), np.random.default_rng(2))
        for index, roles in enumerate(batch.roles):
            (electrode,) = np.flatnonzero(roles == ElectrodeRole.MASKED)
            self.assertFalse(np.any(batch.inputs[index, electrode]))
            self.assertFalse(np.any(batch.inputs[index, 10 + electrode]))
            np.testing.assert_array_equal(batch.signal_targets[index, electrode], self.instances[index, electrode])
        self.assertEqual(batch.target_weights[0, 8, 0], 0.0)
        self.assertEqual(batch.target_weights[0, 0, 0], 1.0)

    def test_same_generator_same_batch(self):
        first = masked_batch(self.instances, self.sets, TrainConfig(), np.random.default_rng(3))
        second = masked_batch(self.instances, self.sets, TrainConfig(), np.random.default_rng(3))
        np.testing.assert_array_equal(first.roles, second.roles)


class TrainConfigTests(SimpleTestCase):
    def test_model_defaults(self):
        self.assertEqual(TrainConfig.for_model('cnnae').epochs, 100)
        self.assertEqual(TrainConfig.for_model('mcnnae').epochs, 45)
        self.assertEqual(TrainConfig.for_model('cnnae', epochs=3).epochs, 3)

    def test_invalid_mask_range(self):
        with self.assertRaises(ConfigurationError):
            TrainConfig(mask_low=0.2, mask_high=0.1).validate()

    def test_unknown_key(self):
        with self.assertRaises(ConfigurationError):
            TrainConfig.from_dict({'momentum': 0.9})


class TrainerTests(SimpleTestCase):
    def setUp(self):
        self.tmp = TemporaryDirectory()
        self.dataset = correlated_dataset(participants=2, electrodes=4, days=3, n_instances=6, length=32)

    def tearDown(self):
        self.tmp.cleanup()

    def out(self, name):
        return str(Path(self.tmp.name) / name)

    def test_cnnae_writes_loss_curve_and_model(self):
        model = CnnaeModel(4, tiny_model_config(), seed=0)
        result = Trainer(model, quick_config(), self.out('cnnae')).train(self.dataset, participant=1)

        frame = pd.read_csv(result.loss_csv)
        self.assertEqual(list(frame.columns), ['epoch', 'loss'])
        self.assertEqual(list(frame['epoch']), [1, 2])
        self.assertTrue(np.all(np.isfinite(frame['loss'])))
        self.assertTrue((Path(self.out('cnnae')) / 'model.arch.json').exists())
        self.assertTrue((Path(self.out('cnnae')) / 'checkpoints' / 'epoch_002.trainer.json').exists())

    def test_loss_decreases(self):
        model = CnnaeModel(4, tiny_model_config(), seed=0)
        result = Trainer(model, quick_config(epochs=15)).train(self.dataset, participant=0)
        losses = [loss for _, loss in result.loss_curve]
        self.assertLess(np.mean(losses[-3:]), losses[0])

    def test_participant_required_for_multi_participant_data(self):
        model = CnnaeModel(4, tiny_model_config(), seed=0)
        with self.assertRaises(ConfigurationError):
            Trainer(model, quick_config()).train(self.dataset)

    def test_same_seed_same_weights(self):
        arrays = []
        for _ in range(2):
            model = CnnaeModel(4, tiny_model_config(), seed=2)
            Trainer(model, quick_config()).train(self.dataset, participant=0)
            arrays.append(model.to_arrays())
        for name in arrays[0]:
            np.testing.assert_array_equal(arrays[0][name], arrays[1][name])

    def test_resume_matches_uninterrupted_run(self):
        straight = CnnaeModel(4, tiny_model_config(), seed=2)
        Trainer(straight, quick_config(epochs=4)).train(self.dataset, participant=0)

        first = CnnaeModel(4, tiny_model_config(), seed=2)
        Trainer(first, quick_config(epochs=2), self.out('first')).train(self.dataset, participant=0)
        resumed = CnnaeModel(4, tiny_model_config(), seed=7)
        checkpoint = str(Path(self.out('first')) / 'checkpoints' / 'epoch_002')
        result = Trainer(resumed, quick_config(epochs=4)).train(self.dataset, participant=0, resume_from=checkpoint)

        self.assertEqual([epoch for epoch, _ in result.loss_curve], [1, 2, 3, 4])
        for name, values in straight.to_arrays().items():
            np.testing.assert_allclose(resumed.to_arrays()[name], values, rtol=1e-5, atol=1e-7)

    def test_mcnnae_trains_all_participants(self):
        model = McnnaeModel({0: 4, 1: 4}, tiny_model_config(), seed=0)
        before = {n: a.copy() for n, a in model.to_arrays().items()}
        result = Trainer(model, quick_config()).train(self.dataset)
        self.assertEqual(len(result.loss_curve), 2)
        after = model.to_arrays()
        for participant in (0, 1):
            name = f"participant.{participant}.heads.signal_mean.weight"
            self.assertFalse(np.array_equal(before[name], after[name]), name)

    def test_participant_without_train_instances(self):
        dataset = correlated_dataset(participants=1, electrodes=4, days=1)
        model = CnnaeModel(4, tiny_model_config(), seed=0)
        with self.assertRaisesMessage(ConfigurationError, 'no train-day instances'):
            Trainer(model, quick_config()).train(dataset)

import json
from contextlib import redirect_stderr
from io import StringIO
from pathlib import Path
from tempfile import TemporaryDirectory

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from .. import cli
from ..exceptions import ConfigurationError
from ..runs import RunConfig, derive_seed

# Procedure A on 10 s segments (2 s prefix) gives 40-step instances at 5 Hz
SMOKE_CONFIG = {
    'seed': 11,
    'generator': {'participants': 2, 'electrodes': 6, 'days': 2, 'day_samples': 15000, 'n_latents': 3},
    'pipeline': {'procedure': 'A', 'segment_seconds': 10.0, 'stats_seconds': 2.0},
    'model': {'z_dim': 4, 'units': 8, 'shared_width': 6, 'predict_batch_size': 4},
    'trainer': {'batch_size': 2, 'per_participant_batch': 1, 'learning_rate': 0.001},
    'evaluation': {'regimes': [0.0, 0.2], 'mask_sets': 2, 'spectrum': {'window': 16}},
}


def run_command(name, *args, **options):
    out = StringIO()
    call_command(name, *args, stdout=out, stderr=StringIO(), **options)
    return out.getvalue()


class CommandPipelineTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = TemporaryDirectory()
        cls.config_path = Path(cls.tmp.name) / 'config.json'
        cls.config_path.write_text(json.dumps(SMOKE_CONFIG), encoding='utf-8')
        cls.run_dir = Path(cls.tmp.name) / 'run'
        run_command('generate', config=str(cls.config_path), out=str(cls.run_dir))
        run_command('preprocess', config=str(cls.config_path), out=str(cls.run_dir))

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()
        super().tearDownClass()

    def options(self, **extra):
        return {'config': str(self.config_path), 'out': str(self.run_dir), **extra}

    def manifest(self, run=None):
        with open((run or self.run_dir) / 'run.json', encoding='utf-8') as f:
            return json.load(f)

    def test_generate_and_preprocess_outputs(self):
        self.assertTrue((self.run_dir / 'data' / 'manifest.json').exists())
        self.assertTrue((self.run_dir / 'ground_truth' / 'generator.json').exists())
        self.assertTrue((self.run_dir / 'prepared' / 'p1_d1.instances.npy').exists())
        stages = self.manifest()['stages']
        self.assertEqual(stages['generate']['seeds'], {'generator': derive_seed(11, 'generate')})
        self.assertIn('data/manifest.json', stages['generate']['artifacts'])
        self.assertEqual(stages['preprocess']['config']['pipeline']['procedure'], 'A')

    def test_repeated_run_gives_identical_manifest(self):
        other = Path(self.tmp.name) / 'again'
        run_command('generate', config=str(self.config_path), out=str(other))
        run_command('preprocess', config=str(self.config_path), out=str(other))
        ours = self.manifest()['stages']
        theirs = self.manifest(other)['stages']
        for stage in ('generate', 'preprocess'):
            self.assertEqual(theirs[stage], ours[stage])

    def test_train_cnnae_two_epochs(self):
        output = run_command('train', **self.options(model='cnnae', epochs=2, participant=[0]))
        self.assertIn('train:', output)
        loss = pd.read_csv(self.run_dir / 'train' / 'cnnae' / 'p0' / 'loss.csv')
        self.assertEqual(len(loss), 2)
        entry = self.manifest()['stages']['train.cnnae']
        self.assertEqual(entry['config']['trainer']['epochs'], 2)
        self.assertEqual(entry['seeds']['train'], derive_seed(11, 'train.cnnae'))
        self.assertIn('train/cnnae/p0/model.arch.json', entry['artifacts'])

    def test_train_mcnnae_and_evaluate(self):
        run_command('train', **self.options(model='mcnnae', epochs=1))
        run_command('evaluate', **self.options(model='mcnnae', regime=[0.2]))
        summary = pd.read_csv(self.run_dir / 'evaluate' / 'mcnnae.summary.csv')
        self.assertEqual(set(summary.role), {'reconstruction', 'imputation'})

    def test_evaluate_zero_fill(self):
        run_command('evaluate', **self.options(model='zero'))
        summary = pd.read_csv(self.run_dir / 'evaluate' / 'zero.summary.csv')
        imputed = summary[summary.role == 'imputation']
        self.assertEqual(set(imputed.regime), {0.2})
        self.assertTrue((imputed['mean'] == 0.0).all())

    def test_baseline_impute_and_report(self):
        run_command('train', **self.options(model='baseline'))
        self.assertTrue((self.run_dir / 'train' / 'baseline' / 'weights.json').exists())

        run_command('impute', **self.options(model='baseline', regime=0.5))
        imputed = self.run_dir / 'impute' / 'baseline' / 'r0.50'
        self.assertTrue((imputed / 'plans.json').exists())
        self.assertTrue((imputed / 'p0_d1_s1.npy').exists())

        run_command('evaluate', **self.options(model='baseline', regime=[0.2, 0.5]))
        run_command('evaluate', **self.options(model='zero', regime=[0.2, 0.5]))
        report_dir = Path(self.tmp.name) / 'report-run'
        run_command('report', config=str(self.config_path), out=str(report_dir), run=str(self.run_dir), baseline='zero')
        for name in ('summary.csv', 'electrodes.csv', 'wins.csv', 'scatter_baseline.svg', 'freq_vs_time_zero.svg'):
            self.assertTrue((report_dir / 'report' / name).exists(), name)

    def test_decode_needs_procedure_b(self):
        with self.assertRaisesMessage(CommandError, 'Procedure B'):
            run_command('decode', **self.options(model='zero'))

    def test_untrained_model(self):
        empty = Path(self.tmp.name) / 'empty'
        with self.assertRaisesMessage(CommandError, 'No prepared dataset'):
            run_command('evaluate', config=str(self.config_path), out=str(empty), model='cnnae')

    def test_resume_needs_single_participant(self):
        with self.assertRaisesMessage(CommandError, 'exactly one --participant'):
            run_command('train', **self.options(model='cnnae', resume='somewhere'))


class RunConfigTests(SimpleTestCase):
    def test_unknown_block(self):
        with self.assertRaisesMessage(ConfigurationError, "Unknown run config keys ['optimizer']"):
            RunConfig.from_dict({'optimizer': {}})

    def test_hash_depends_on_content(self):
        first = RunConfig.from_dict(SMOKE_CONFIG)
        second = RunConfig.from_dict({**SMOKE_CONFIG, 'seed': 12})
        self.assertNotEqual(first.config_hash(), second.config_hash())
        self.assertEqual(first.config_hash(), RunConfig.from_dict(SMOKE_CONFIG).config_hash())
        self.assertTrue(first.default_run_dir().name.endswith('-s11'))

    def test_trainer_overrides(self):
        cfg = RunConfig.from_dict(SMOKE_CONFIG)
        self.assertEqual(cfg.train_config('mcnnae').epochs, 45)
        self.assertEqual(cfg.train_config('cnnae', epochs=3).batch_size, 2)

    def test_derive_seed_is_stable(self):
        self.assertEqual(derive_seed(11, 'masks'), derive_seed(11, 'masks'))
        self.assertNotEqual(derive_seed(11, 'masks'), derive_seed(11, 'events'))
        self.assertLess(derive_seed(0, 'generate'), 2 ** 32)


class CliTests(SimpleTestCase):
    def run_cli(self, *argv):
        err = StringIO()
        with redirect_stderr(err):
            status = cli.run(list(argv))
        return status, err.getvalue()

    def test_unknown_stage(self):
        status, err = self.run_cli('fit')
        self.assertEqual(status, 2)
        self.assertIn('usage:', err)

    def test_unknown_flag_is_an_error(self):
        status, _ = self.run_cli('train', '--model', 'zero', '--bogus')
        self.assertEqual(status, 2)

    def test_failing_stage_exits_with_one(self):
        with TemporaryDirectory() as tmp:
            status, err = self.run_cli('evaluate', '--model', 'zero', '--out', tmp)
        self.assertEqual(status, 1)
        self.assertIn('No prepared dataset', err)

"""Move / rest decoding under artificial electrode loss."""

from ...exceptions import ConfigurationError
from ...runs import derive_seed
from ...services.decoding import event_groups, run_missingness_experiment
from ...services.signal_pipeline import SignalPipeline
from ..base import MODEL_CHOICES, ExperimentCommand


class Command(ExperimentCommand):
    help = 'Compare decoder accuracy on zero-filled and imputer-filled events'
    stage = 'decode'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--model', choices=MODEL_CHOICES, required=True)
        parser.add_argument('--data', help='Raw dataset directory (default: <run>/data)')
        parser.add_argument('--prepared', help='Prepared dataset directory (default: <run>/prepared)')
        parser.add_argument('--regime', type=float, action='append',
                            help='Missing fraction (repeatable; default: from config)')

    def run_stage(self, cfg, run, source, options):
        kind = options['model']
        prepared = self.load_prepared(source, options)
        if prepared.config.procedure != 'B':
            raise ConfigurationError(
                f"Decoding works on Procedure B instances; the prepared data uses Procedure {prepared.config.procedure}"
            )
        decoding = cfg.decoding
        if options.get('regime'):
            decoding.pcts = list(options['regime'])
            decoding.validate()
        recording, _ = self.load_raw(source, options)
        imputer = self.load_imputer(kind, source)
        pipeline = SignalPipeline(prepared.config)

        seeds = {'events': derive_seed(cfg.seed, 'events'), 'forest': derive_seed(cfg.seed, 'forest')}
        decoding.forest.seed = seeds['forest']
        events = event_groups(recording, pipeline, decoding, seeds['events'])
        result = run_missingness_experiment(events, imputer, pipeline, decoding)

        paths = result.save(str(run.stage_dir(self.stage)))
        self.stdout.write(f"{kind}: imputer >= zero-fill in {result.win_fraction():.0%} of cells")
        run.record(f"{self.stage}.{kind}", {'model': kind, 'decoding': decoding.to_dict()}, seeds, paths)
        return paths

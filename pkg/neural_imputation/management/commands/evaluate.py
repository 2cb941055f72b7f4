"""Score an imputer on held-out days across missing-data regimes."""

from ...runs import derive_seed
from ...services.evaluation import evaluate_model, held_out_plans
from ..base import MODEL_CHOICES, ExperimentCommand


class Command(ExperimentCommand):
    help = 'Evaluate reconstruction and imputation correlations'
    stage = 'evaluate'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--model', choices=MODEL_CHOICES, required=True)
        parser.add_argument('--regime', type=float, action='append',
                            help='Missing-data regime (repeatable; default: from config)')
        parser.add_argument('--mask-sets', type=int, help='Independent mask sets (default: from config)')
        parser.add_argument('--prepared', help='Prepared dataset directory (default: <run>/prepared)')

    def run_stage(self, cfg, run, source, options):
        kind = options['model']
        regimes = options.get('regime') or cfg.evaluation.regimes
        n_sets = options.get('mask_sets') or cfg.evaluation.mask_sets
        prepared = self.load_prepared(source, options)
        imputer = self.load_imputer(kind, source)
        seed = derive_seed(cfg.seed, 'masks')

        plans = held_out_plans(prepared, regimes, n_sets, seed)
        report = evaluate_model(
            imputer, prepared, plans, cfg.evaluation.spectrum_config(), cfg.evaluation.n_examples,
        )
        paths = report.save(str(run.stage_dir(self.stage)))
        run.record(f"{self.stage}.{kind}",
                   {'model': kind, 'regimes': sorted(regimes), 'mask_sets': n_sets,
                    'evaluation': cfg.evaluation.to_dict()},
                   {'masks': seed}, paths)
        return paths

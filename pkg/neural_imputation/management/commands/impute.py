"""Fill the held-out day of every participant under a missing-data regime."""

import json

import numpy as np

from ...runs import derive_seed
from ...services.evaluation import held_out_plans
from ...services.masking import apply_mask, save_mask_plans
from ..base import MODEL_CHOICES, ExperimentCommand


class Command(ExperimentCommand):
    help = 'Write imputed instances for held-out days'
    stage = 'impute'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--model', choices=MODEL_CHOICES, required=True)
        parser.add_argument('--regime', type=float, required=True, help='Fraction of observed electrodes to mask')
        parser.add_argument('--mask-sets', type=int, help='Independent mask sets (default: from config)')
        parser.add_argument('--prepared', help='Prepared dataset directory (default: <run>/prepared)')

    def run_stage(self, cfg, run, source, options):
        kind = options['model']
        regime = options['regime']
        n_sets = options.get('mask_sets') or cfg.evaluation.mask_sets
        prepared = self.load_prepared(source, options)
        imputer = self.load_imputer(kind, source)
        seed = derive_seed(cfg.seed, 'masks')
        plans = held_out_plans(prepared, [regime], n_sets, seed)

        out = run.stage_dir(f"{self.stage}/{kind}/r{regime:.2f}")
        paths = [save_mask_plans(plans, str(out / 'plans.json'))]
        labels = {}
        for plan in plans:
            day = prepared.day(plan.participant, plan.day)
            result = imputer.impute(plan.participant, apply_mask(day.instances, plan, day.availability()))
            path = out / f"p{plan.participant}_d{plan.day}_s{plan.set_index}.npy"
            np.save(path, result.series.astype(np.float32))
            paths.append(path)
            labels[path.name] = result.labels
        labels_path = out / 'labels.json'
        with open(labels_path, 'w', encoding='utf-8') as f:
            json.dump(labels, f, indent=2, sort_keys=True)
        paths.append(labels_path)

        run.record(f"{self.stage}.{kind}.r{regime:.2f}", {'model': kind, 'regime': regime, 'mask_sets': n_sets},
                   {'masks': seed}, paths)
        return paths

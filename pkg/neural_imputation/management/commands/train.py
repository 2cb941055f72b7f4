"""Fit an imputer on the train days of a prepared dataset."""

from django.core.management.base import CommandError

from ...imputers import CnnaeImputer, ImputerRegistry, McnnaeImputer
from ...runs import derive_seed
from ..base import MODEL_CHOICES, TRAIN_DIR, ExperimentCommand, stage_files


class Command(ExperimentCommand):
    help = 'Train or fit an imputation method'
    stage = 'train'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--model', choices=MODEL_CHOICES, required=True)
        parser.add_argument('--epochs', type=int, help='Override the number of training epochs')
        parser.add_argument('--participant', type=int, action='append',
                            help='Restrict CNNAE training to these participants (repeatable)')
        parser.add_argument('--resume', help='Checkpoint stem to resume from')
        parser.add_argument('--data', help='Raw dataset directory holding the electrode geometry')
        parser.add_argument('--prepared', help='Prepared dataset directory (default: <run>/prepared)')

    def run_stage(self, cfg, run, source, options):
        kind = options['model']
        prepared = self.load_prepared(source, options)
        out = run.stage_dir(f"{TRAIN_DIR}/{kind}")
        overrides = {'epochs': options['epochs']} if options.get('epochs') else {}
        seeds = {}
        config = {'model': kind}

        if kind == 'cnnae':
            participants = options.get('participant')
            if options.get('resume') and (not participants or len(participants) != 1):
                raise CommandError("--resume with --model cnnae needs exactly one --participant")
            train_cfg = cfg.train_config(kind, **overrides)
            seeds = {'model': derive_seed(cfg.seed, 'model.cnnae'), 'train': train_cfg.seed}
            imputer = CnnaeImputer(
                model_config=cfg.model, train_config=train_cfg, out_dir=str(out),
                seed=seeds['model'], participants=participants,
            )
            imputer.fit(prepared, resume_from=options.get('resume'))
            config.update(network=cfg.model.to_dict(), trainer=train_cfg.to_dict())
        elif kind == 'mcnnae':
            train_cfg = cfg.train_config(kind, **overrides)
            seeds = {'model': derive_seed(cfg.seed, 'model.mcnnae'), 'train': train_cfg.seed}
            imputer = McnnaeImputer(
                model_config=cfg.model, train_config=train_cfg, out_dir=str(out), seed=seeds['model'],
            )
            imputer.fit(prepared, resume_from=options.get('resume'))
            config.update(network=cfg.model.to_dict(), trainer=train_cfg.to_dict())
        else:
            _, geometry = self.load_raw(source, options) if kind == 'baseline' else (None, None)
            imputer = ImputerRegistry.create(kind).fit(prepared, geometry)

        imputer.save(str(out))
        paths = stage_files(out)
        run.record(f"{self.stage}.{kind}", config, seeds, paths)
        return paths

"""
Shared base for the experiment management commands.

Every command works on one run directory: it reads the artifacts earlier
stages left there, writes its own below a stage sub-directory and records
them in run.json.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple

from django.core.management.base import BaseCommand, CommandError

from ..exceptions import ConfigurationError, ImputationError
from ..imputers import BaseImputer, ImputerRegistry
from ..runs import RunConfig, RunDirectory
from ..services.ragged_store import ElectrodeGeometry, RaggedRecording, load_dataset
from ..services.signal_pipeline import PreparedDataset

logger = logging.getLogger(__name__)

MODEL_CHOICES = ('baseline', 'cnnae', 'mcnnae', 'zero')
DATA_DIR, PREPARED_DIR, TRAIN_DIR = 'data', 'prepared', 'train'


class ExperimentCommand(BaseCommand):
    """
    Base class for the experiment stages.

    Subclasses implement run_stage(); configuration loading, run directory
    resolution and error translation happen here.
    """

    stage = 'base'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON run configuration')
        parser.add_argument('--seed', type=int, help='Global seed (overrides the config)')
        parser.add_argument('--out', help='Run directory (default: derived from config hash and seed)')
        parser.add_argument('--run', help='Run directory holding the inputs (default: --out)')

    def handle(self, *args, **options):
        try:
            cfg = RunConfig.load(options.get('config'))
            if options.get('seed') is not None:
                cfg.seed = options['seed']
            out = options.get('out') or cfg.out or cfg.default_run_dir()
            run = RunDirectory(str(out))
            source = RunDirectory(options.get('run') or str(out))
            paths = self.run_stage(cfg, run, source, options)
        except ImputationError as exc:
            logger.error("%s failed: %s", self.stage, exc)
            raise CommandError(str(exc)) from exc
        except OSError as exc:
            raise CommandError(f"{self.stage}: {exc}") from exc
        self.stdout.write(f"{self.stage}: {len(paths)} artifacts in {run.root}")

    def run_stage(self, cfg: RunConfig, run: RunDirectory, source: RunDirectory,
                  options: Dict[str, Any]) -> List[Path]:
        raise NotImplementedError

    # Shared loaders

    def load_raw(self, source: RunDirectory, options: Dict[str, Any]) -> Tuple[RaggedRecording, ElectrodeGeometry]:
        root = Path(options.get('data') or source.root / DATA_DIR)
        if not root.exists():
            raise ConfigurationError(f"No dataset at {root}; run 'generate' first or pass --data")
        return load_dataset(str(root))

    def load_prepared(self, source: RunDirectory, options: Dict[str, Any]) -> PreparedDataset:
        root = Path(options.get('prepared') or source.root / PREPARED_DIR)
        if not root.exists():
            raise ConfigurationError(f"No prepared dataset at {root}; run 'preprocess' first")
        return PreparedDataset.load(str(root))

    def load_imputer(self, kind: str, source: RunDirectory) -> BaseImputer:
        imputer_class = ImputerRegistry.get_class(kind)
        directory = source.root / TRAIN_DIR / kind
        if kind != 'zero' and not directory.exists():
            raise ConfigurationError(f"No trained '{kind}' model at {directory}; run 'train --model {kind}' first")
        return imputer_class.load(str(directory))


def stage_files(directory: Path) -> List[Path]:
    return sorted(p for p in Path(directory).rglob('*') if p.is_file())


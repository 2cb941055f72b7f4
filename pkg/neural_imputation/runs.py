"""
Run configuration and provenance.

A run directory holds every artifact of one experiment. Each stage writes
below its own sub-directory and records its resolved configuration, the
seeds it used and the sha256 of every artifact in run.json. Nothing
time-dependent is recorded, so repeating a run gives the same run.json.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from django.conf import settings

from .exceptions import ConfigurationError
from .networks.config import CnnaeConfig
from .services.decoding import DecodingConfig
from .services.evaluation import EvaluationConfig
from .services.signal_pipeline import PipelineConfig
from .services.synth_generator import GeneratorConfig
from .training.trainer import TrainConfig

logger = logging.getLogger(__name__)

RUN_FILE = 'run.json'
BLOCKS = ('generator', 'pipeline', 'model', 'trainer', 'evaluation', 'decoding')


def derive_seed(global_seed: int, stage: str) -> int:
    """Stage seed: first four bytes of sha256("<seed>|<stage>")."""
    digest = hashlib.sha256(f"{int(global_seed)}|{stage}".encode('utf-8')).digest()
    return int.from_bytes(digest[:4], 'big')


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


def canonical_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


@dataclass
class RunConfig:
    """
    Parameter blocks for every stage plus the global seed.

    The trainer block holds overrides only; epochs fall back to the
    model-specific default.
    """

    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    model: CnnaeConfig = field(default_factory=CnnaeConfig)
    trainer: Dict[str, Any] = field(default_factory=dict)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    decoding: DecodingConfig = field(default_factory=DecodingConfig)
    seed: int = 0
    out: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        allowed = set(BLOCKS) | {'seed', 'out'}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigurationError(f"Unknown run config keys {sorted(unknown)}. Allowed keys: {sorted(allowed)}")
        trainer = dict(data.get('trainer', {}))
        TrainConfig.from_dict({'epochs': 1, **trainer})
        return cls(
            generator=GeneratorConfig.from_dict(data.get('generator', {})),
            pipeline=PipelineConfig.from_dict(data.get('pipeline', {})),
            model=CnnaeConfig.from_dict(data.get('model', {})),
            trainer=trainer,
            evaluation=EvaluationConfig.from_dict(data.get('evaluation', {})),
            decoding=DecodingConfig.from_dict(data.get('decoding', {})),
            seed=int(data.get('seed', settings.IMPUTATION_DEFAULT_SEED)),
            out=data.get('out'),
        )

    @classmethod
    def load(cls, path: Optional[str]) -> 'RunConfig':
        if not path:
            return cls(seed=settings.IMPUTATION_DEFAULT_SEED)
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"Config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config file {path} must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'generator': self.generator.to_dict(),
            'pipeline': self.pipeline.to_dict(),
            'model': self.model.to_dict(),
            'trainer': dict(self.trainer),
            'evaluation': self.evaluation.to_dict(),
            'decoding': self.decoding.to_dict(),
            'seed': self.seed,
        }

    def train_config(self, kind: str, **overrides) -> TrainConfig:
        values = {'seed': derive_seed(self.seed, f"train.{kind}"), **self.trainer, **overrides}
        return TrainConfig.for_model(kind, **values)

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode('utf-8')).hexdigest()[:12]

    def default_run_dir(self) -> Path:
        return Path(settings.IMPUTATION_RUN_ROOT) / f"{self.config_hash()}-s{self.seed}"


class RunDirectory:
    """
    Usage:
        run = RunDirectory('runs/abc-s0')
        paths = do_stage(run.stage_dir('train/cnnae'))
        run.record('train.cnnae', config=cfg.to_dict(), seeds={'train': 7}, artifacts=paths)
    """

    def __init__(self, root: str):
        self.root = Path(root)

    @property
    def run_file(self) -> Path:
        return self.root / RUN_FILE

    def stage_dir(self, name: str) -> Path:
        path = self.root / name
        path.mkdir(parents=True, exist_ok=True)
        return path

    def read(self) -> Dict[str, Any]:
        if not self.run_file.exists():
            return {'stages': {}}
        with open(self.run_file, 'r', encoding='utf-8') as f:
            return json.load(f)

    def record(self, stage: str, config: Dict[str, Any], seeds: Dict[str, int], artifacts: Iterable[Path]) -> Path:
        """Add or replace one stage entry; artifact paths are stored relative to the run root."""
        manifest = self.read()
        digests = {}
        for path in sorted({Path(p) for p in artifacts}):
            if path.is_file():
                digests[self.relative(path)] = sha256_file(path)
        manifest['stages'][stage] = {'config': config, 'seeds': seeds, 'artifacts': digests}
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.run_file, 'w', encoding='utf-8', newline='\n') as f:
            f.write(canonical_json(manifest))
        logger.info("Recorded stage '%s' (%d artifacts) in %s", stage, len(digests), self.run_file)
        return self.run_file

    def relative(self, path: Path) -> str:
        try:
            return Path(path).resolve().relative_to(self.root.resolve()).as_posix()
        except ValueError:
            return Path(path).as_posix()

    def artifacts(self) -> Dict[str, str]:
        merged = {}
        for entry in self.read()['stages'].values():
            merged.update(entry['artifacts'])
        return merged

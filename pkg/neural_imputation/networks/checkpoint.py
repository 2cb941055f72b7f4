"""
Model checkpoints: parameter arrays in the numerics flat format plus an
architecture descriptor (`<stem>.arch.json`) with the config and the
participant registry.
"""

import json
import logging
from pathlib import Path
from typing import List, Union

from ..exceptions import ConfigurationError
from ..numerics.checkpoint import load_arrays, save_arrays
from .cnnae import CnnaeModel
from .config import CnnaeConfig
from .mcnnae import McnnaeModel

logger = logging.getLogger(__name__)

AutoencoderModel = Union[CnnaeModel, McnnaeModel]


def _arch_path(stem: str) -> Path:
    return Path(f"{stem}.arch.json")


def save_model(model: AutoencoderModel, stem: str) -> List[Path]:
    blob, manifest = save_arrays(model.to_arrays(), stem)
    arch = _arch_path(stem)
    with open(arch, 'w', encoding='utf-8') as f:
        json.dump(model.describe(), f, indent=2, sort_keys=True)
    logger.info("Saved %s checkpoint to %s", model.KIND, blob)
    return [blob, manifest, arch]


def build_model(description: dict) -> AutoencoderModel:
    """Instantiate an untrained model from an architecture descriptor."""
    config = CnnaeConfig.from_dict(description['config'])
    kind = description.get('kind')
    if kind == CnnaeModel.KIND:
        return CnnaeModel(int(description['n_electrodes']), config)
    if kind == McnnaeModel.KIND:
        counts = {int(p): int(k) for p, k in description['electrode_counts'].items()}
        return McnnaeModel(counts, config)
    raise ConfigurationError(f"Unknown model kind '{kind}'. Available kinds: cnnae, mcnnae")


def load_model(stem: str) -> AutoencoderModel:
    with open(_arch_path(stem), 'r', encoding='utf-8') as f:
        description = json.load(f)
    model = build_model(description)
    model.load_arrays(load_arrays(stem))
    return model

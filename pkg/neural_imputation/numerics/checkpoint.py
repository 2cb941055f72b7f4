"""
Flat parameter files.

A checkpoint is one binary of 32-bit little-endian floats holding every array
back to back, plus a JSON manifest listing name, shape and offset (in values).
"""

import json
import logging
from pathlib import Path
from typing import Dict, Mapping, Tuple

import numpy as np

from ..exceptions import DatasetValidationError

logger = logging.getLogger(__name__)

VALUE_DTYPE = np.dtype('<f4')


def save_arrays(arrays: Mapping[str, np.ndarray], stem: str) -> Tuple[Path, Path]:
    """
    Write `arrays` to `<stem>.f32` and `<stem>.json`.

    Arrays are written in sorted name order so identical inputs give
    identical bytes.
    """
    stem_path = Path(stem)
    stem_path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    chunks = []
    offset = 0
    for name in sorted(arrays):
        values = np.asarray(arrays[name]).astype(VALUE_DTYPE)
        entries.append({'name': name, 'shape': list(values.shape), 'offset': offset})
        chunks.append(values.ravel())
        offset += values.size

    blob_path = Path(f"{stem}.f32")
    manifest_path = Path(f"{stem}.json")
    flat = np.concatenate(chunks) if chunks else np.zeros(0, dtype=VALUE_DTYPE)
    flat.astype(VALUE_DTYPE).tofile(blob_path)
    with open(manifest_path, 'w', encoding='utf-8') as f:
        json.dump({'dtype': 'float32-le', 'count': offset, 'arrays': entries}, f, indent=2, sort_keys=True)
    logger.debug("Wrote %d arrays (%d values) to %s", len(entries), offset, blob_path)
    return blob_path, manifest_path


def load_arrays(stem: str) -> Dict[str, np.ndarray]:
    stem_path = Path(stem)
    manifest_path = Path(f"{stem}.json")
    blob_path = Path(f"{stem}.f32")
    if not manifest_path.exists() or not blob_path.exists():
        raise FileNotFoundError(f"Checkpoint {stem_path} is incomplete: expected {blob_path.name} and {manifest_path.name}")
    with open(manifest_path, 'r', encoding='utf-8') as f:
        manifest = json.load(f)
    flat = np.fromfile(blob_path, dtype=VALUE_DTYPE)
    if flat.size != manifest['count']:
        raise DatasetValidationError(
            f"Checkpoint {blob_path} holds {flat.size} values, manifest declares {manifest['count']}"
        )
    arrays = {}
    for entry in manifest['arrays']:
        size = int(np.prod(entry['shape'])) if entry['shape'] else 1
        start = entry['offset']
        arrays[entry['name']] = flat[start:start + size].reshape(entry['shape']).copy()
    return arrays

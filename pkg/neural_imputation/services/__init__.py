"""
Services Package

Data-side services: the ragged dataset store, the signal pipeline,
masking, the synthetic generator, evaluation, reporting and decoding.

Services are designed to be:
- Pure functions of their inputs plus explicit seeds
- Independent of the management commands
- Easily testable
"""

from .masking import ElectrodeRole, MaskPlan, apply_mask, make_mask_plan
from .ragged_store import (
    AvailabilitySets,
    ElectrodeGeometry,
    RaggedRecording,
    RaggedStore,
    load_dataset,
    save_dataset,
)
from .signal_pipeline import PipelineConfig, PreparedDataset, SignalPipeline, run_pipeline

__all__ = [
    'AvailabilitySets',
    'ElectrodeGeometry',
    'RaggedRecording',
    'RaggedStore',
    'load_dataset',
    'save_dataset',
    'PipelineConfig',
    'PreparedDataset',
    'SignalPipeline',
    'run_pipeline',
    'ElectrodeRole',
    'MaskPlan',
    'make_mask_plan',
    'apply_mask',
]

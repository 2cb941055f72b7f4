"""
Imputers Package

Every imputation method behind one interface:
- ZeroImputer: conventional zero-fill reference
- LinearImputer: nearest-neighbor correlation-weighted baseline
- CnnaeImputer: participant-specific masked autoencoder
- McnnaeImputer: joint multi-participant masked autoencoder

Methods register themselves with ImputerRegistry on import.
"""

from .autoencoder_imputer import CnnaeImputer, McnnaeImputer
from .base import BaseImputer, ImputerOutput
from .linear_imputer import LinearImputer, NeighborWeights, fit_weights, impute_linear, neighbor_table
from .registry import ImputerRegistry
from .zero_imputer import ZeroImputer

__all__ = [
    'BaseImputer',
    'ImputerOutput',
    'ImputerRegistry',
    'ZeroImputer',
    'LinearImputer',
    'NeighborWeights',
    'neighbor_table',
    'fit_weights',
    'impute_linear',
    'CnnaeImputer',
    'McnnaeImputer',
]

"""
Networks Package

CNNAE (per participant) and M-CNNAE (joint, multihead) autoencoders.
"""

from .checkpoint import build_model, load_model, save_model
from .cnnae import CnnaeModel, ImputationResult, ModelOutput, extract_imputations, forward_cnnae
from .config import CnnaeConfig
from .mcnnae import McnnaeModel, forward_mcnnae

__all__ = [
    'CnnaeConfig',
    'CnnaeModel',
    'McnnaeModel',
    'ModelOutput',
    'ImputationResult',
    'forward_cnnae',
    'forward_mcnnae',
    'extract_imputations',
    'save_model',
    'load_model',
    'build_model',
]

"""
Training Package

Masked electrode modeling loop for the autoencoders.
"""

from .trainer import TrainConfig, Trainer, TrainingBatch, TrainingResult, masked_batch, train, training_loss

__all__ = [
    'TrainConfig',
    'Trainer',
    'TrainingBatch',
    'TrainingResult',
    'masked_batch',
    'training_loss',
    'train',
]

"""
Architecture hyperparameters shared by CNNAE and M-CNNAE.
"""

from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List

import numpy as np

from ..exceptions import ConfigurationError


@dataclass
class CnnaeConfig:
    z_dim: int = 64
    units: int = 256
    kernels: List[int] = field(default_factory=lambda: [4, 4, 4])
    strides: List[int] = field(default_factory=lambda: [2, 2, 2])
    decoder_layers: int = 2
    decoder_blocks: int = 2
    dilations: List[int] = field(default_factory=lambda: [1, 2])
    decoder_kernel: int = 2
    upsample: int = 8
    # chunk size for inference only; training batches come from TrainConfig
    predict_batch_size: int = 16
    shared_width: int = 128

    @property
    def temporal_reduction(self) -> int:
        return int(np.prod(self.strides))

    def validate(self) -> 'CnnaeConfig':
        if len(self.kernels) != len(self.strides) or not self.kernels:
            raise ConfigurationError("kernels and strides must be non-empty lists of equal length")
        if self.temporal_reduction != self.upsample:
            raise ConfigurationError(
                f"Product of encoder strides ({self.temporal_reduction}) must equal the upsample factor ({self.upsample})"
            )
        if len(self.dilations) != self.decoder_layers:
            raise ConfigurationError(
                f"Expected {self.decoder_layers} dilations (one per decoder layer), got {self.dilations}"
            )
        for name in ('z_dim', 'units', 'decoder_blocks', 'decoder_kernel', 'predict_batch_size', 'shared_width'):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        return self

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CnnaeConfig':
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigurationError(
                f"Unknown model keys {sorted(unknown)}. Allowed keys: {sorted(allowed)}"
            )
        return cls(**data).validate()

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

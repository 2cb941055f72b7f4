"""
Base Imputer Module

Contains the BaseImputer class that every imputation method inherits from.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..services.masking import MaskedInstances
from ..services.ragged_store import ElectrodeGeometry
from ..services.signal_pipeline import PreparedDataset


@dataclass
class ImputerOutput:
    """
    Estimates for every electrode of a masked day.

    `labels` gives each electrode's scoring role (reconstruction,
    imputation, no-ground-truth); `unimputable` marks electrodes the method
    could not estimate and returned as zeros.
    """

    series: np.ndarray        # (n, K, T)
    labels: List[str]
    unimputable: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


class BaseImputer(ABC):
    """
    Abstract base class for all imputation methods.

    To create a new imputer:
    1. Inherit from BaseImputer
    2. Set IMPUTER_NAME and IMPUTER_DESCRIPTION class attributes
    3. Override fit() when the method learns from train days
    4. Implement impute()
    """

    IMPUTER_NAME: str = "base"
    IMPUTER_DESCRIPTION: str = "Base imputer class"

    def fit(self, dataset: PreparedDataset, geometry: Optional[ElectrodeGeometry] = None) -> 'BaseImputer':
        """
        Learn whatever the method needs from the train days.

        Args:
            dataset: Prepared instances; the last day of each participant is held out
            geometry: Electrode positions, for methods that use them

        Returns:
            self
        """
        return self

    @abstractmethod
    def impute(self, participant: int, masked: MaskedInstances) -> ImputerOutput:
        """
        Estimate every electrode of a zero-filled day.

        Args:
            participant: Participant the instances belong to
            masked: Output of apply_mask for one mask plan

        Returns:
            ImputerOutput with series shaped like masked.signal
        """

    def save(self, out_dir: str) -> List[Path]:
        """Persist fitted state under out_dir; returns the written files."""
        return []

    @classmethod
    def load(cls, out_dir: str) -> 'BaseImputer':
        """Rebuild a fitted imputer from what save() wrote."""
        return cls()

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__}(name={self.IMPUTER_NAME})>"

"""
Zero-fill Imputer

The conventional treatment of missing electrodes: observed rows pass through,
everything else stays zero.
"""

import numpy as np

from ..services.masking import ElectrodeRole, MaskedInstances
from .base import BaseImputer, ImputerOutput
from .registry import ImputerRegistry


@ImputerRegistry.register
class ZeroImputer(BaseImputer):
    IMPUTER_NAME = "zero"
    IMPUTER_DESCRIPTION = "Leaves masked and missing electrodes zero-filled"

    def impute(self, participant: int, masked: MaskedInstances) -> ImputerOutput:
        return ImputerOutput(
            series=masked.signal.astype(np.float32),
            labels=[ElectrodeRole(int(r)).output_label for r in masked.roles],
            unimputable=masked.roles != ElectrodeRole.OBSERVED,
        )

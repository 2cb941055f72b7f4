"""
Exceptions raised by the imputation toolkit.

Every error derives from ImputationError and from the builtin it refines,
so callers can catch either the toolkit family or the usual builtin.
"""

from typing import Optional


class ImputationError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(ImputationError, ValueError):
    """A configuration block is malformed or violates its invariants."""


class DatasetValidationError(ImputationError, ValueError):
    """
    A stored dataset violates the ragged-store invariants.

    The offending location is kept so diagnostics can name it.
    """

    def __init__(
        self,
        message: str,
        participant: Optional[int] = None,
        day: Optional[int] = None,
        electrode: Optional[int] = None,
    ):
        self.participant = participant
        self.day = day
        self.electrode = electrode
        location = ", ".join(
            f"{name}={value}"
            for name, value in (('participant', participant), ('day', day), ('electrode', electrode))
            if value is not None
        )
        super().__init__(f"{message} ({location})" if location else message)


class UnknownRecordingError(ImputationError, KeyError):
    """A participant or day id does not exist in the dataset."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ''


class ZeroVarianceError(ImputationError, ValueError):
    """The standardization prefix of a segment has (near) zero spread."""


class InvalidBandError(ImputationError, ValueError):
    """Band edges do not satisfy 0 < low < high < Nyquist."""


class MaskPlanError(ImputationError, ValueError):
    """A mask plan cannot be built or references electrodes outside the observed set."""


class ShapeMismatchError(ImputationError, ValueError):
    """Tensor or series shapes are inconsistent for the requested operation."""


class NonFiniteError(ImputationError, FloatingPointError):
    """NaN or infinity reached an operation boundary."""


class BackwardError(ImputationError, RuntimeError):
    """Reverse pass requested without a recorded forward pass."""


class UnregisteredParticipantError(ImputationError, KeyError):
    """A participant has no heads in a multihead model."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ''


class TrainingDivergedError(ImputationError, RuntimeError):
    """Training produced a non-finite loss; parameters were rolled back."""

    def __init__(self, message: str, epoch: int, checkpoint_path: Optional[str] = None):
        self.epoch = epoch
        self.checkpoint_path = checkpoint_path
        super().__init__(message)


class NoScorableElectrodesError(ImputationError, ValueError):
    """An evaluation produced no electrode with ground truth to score."""


class SingleClassError(ImputationError, ValueError):
    """A classifier was asked to fit data holding a single label."""


class UnstableProcessError(ImputationError, ValueError):
    """Autoregressive coefficients place a root on or outside the unit circle."""


class ScheduleOverlapError(ImputationError, ValueError):
    """Two labeled event windows overlap."""

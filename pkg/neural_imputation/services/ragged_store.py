"""
Ragged Store Service

Loads, validates, persists and slices ragged multielectrode recordings.

A dataset is organised by participant, recording day and electrode. Electrodes
that failed on a given day are flagged as missing; in memory they are kept as
rows of zeros so every day is a rectangular electrodes x samples array.

On disk a dataset is a directory holding `manifest.json` and one
`data/p{i}_d{j}_e{k}.f32` file (32-bit little-endian floats) per observed
electrode.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterator, List, Optional, Tuple

import numpy as np

from ..exceptions import DatasetValidationError, UnknownRecordingError

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'
PAYLOAD_DIR = 'data'
PAYLOAD_DTYPE = np.dtype('<f4')
FORMAT_VERSION = 1


@dataclass(frozen=True)
class DayRecording:
    """One participant-day: electrodes x samples plus missing flags."""

    participant: int
    day: int
    sampling_rate: float
    samples: np.ndarray
    missing: np.ndarray
    calendar: Optional[str] = None

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[1])

    @property
    def n_electrodes(self) -> int:
        return int(self.samples.shape[0])

    def freeze(self) -> None:
        self.samples.setflags(write=False)
        self.missing.setflags(write=False)


@dataclass(frozen=True)
class AvailabilitySets:
    """Partition of a participant's electrodes into observed and naturally missing."""

    participant: int
    day: int
    observed: FrozenSet[int]
    missing: FrozenSet[int]

    @property
    def all_missing(self) -> bool:
        return not self.observed

    @property
    def electrode_count(self) -> int:
        return len(self.observed) + len(self.missing)

    def observed_ids(self) -> List[int]:
        return sorted(self.observed)

    @classmethod
    def from_missing(cls, participant: int, day: int, missing: np.ndarray) -> 'AvailabilitySets':
        """Build the partition from a per-electrode missing flag vector."""
        missing_ids = frozenset(int(e) for e in np.flatnonzero(missing))
        observed = frozenset(range(len(missing))) - missing_ids
        return cls(participant=participant, day=day, observed=observed, missing=missing_ids)


@dataclass
class ElectrodeGeometry:
    """Fixed 3-D electrode positions (millimeters) per participant."""

    positions: Dict[int, np.ndarray] = field(default_factory=dict)

    def for_participant(self, participant: int) -> np.ndarray:
        if participant not in self.positions:
            raise UnknownRecordingError(
                f"No geometry for participant {participant}. "
                f"Known participants: {sorted(self.positions)}"
            )
        return self.positions[participant]

    def validate(self, electrode_counts: Dict[int, int]) -> None:
        for participant, count in electrode_counts.items():
            positions = self.positions.get(participant)
            if positions is None or positions.shape != (count, 3):
                raise DatasetValidationError(
                    f"Geometry must hold one 3-D position per electrode ({count})",
                    participant=participant,
                )
            if not np.all(np.isfinite(positions)):
                bad = int(np.argwhere(~np.isfinite(positions))[0][0])
                raise DatasetValidationError(
                    "Non-finite electrode position", participant=participant, electrode=bad,
                )


class RaggedRecording:
    """
    Immutable participant/day/electrode dataset.

    Usage:
        recording = load_dataset('fixtures/tiny')
        sets = recording.availability(0, 1)
        windows = recording.slice_instances(0, 1, window_len=400, stride=400)
    """

    def __init__(self, electrode_counts: Dict[int, int], days: Dict[Tuple[int, int], DayRecording]):
        self.electrode_counts = dict(sorted(electrode_counts.items()))
        self._days = dict(sorted(days.items()))
        self._validate()
        for day in self._days.values():
            day.freeze()

    def _validate(self) -> None:
        for (participant, day_id), day in self._days.items():
            if participant not in self.electrode_counts:
                raise DatasetValidationError("Day belongs to an undeclared participant", participant, day_id)
            count = self.electrode_counts[participant]
            if day.samples.ndim != 2 or day.samples.shape[0] != count:
                raise DatasetValidationError(
                    f"Expected {count} electrode rows, found shape {day.samples.shape}", participant, day_id,
                )
            if day.missing.shape != (count,):
                raise DatasetValidationError("Missing flags must cover every electrode", participant, day_id)
            if day.sampling_rate <= 0:
                raise DatasetValidationError("Sampling rate must be positive", participant, day_id)
            finite = np.isfinite(day.samples)
            if not finite.all():
                electrode, sample = (int(v) for v in np.argwhere(~finite)[0])
                raise DatasetValidationError(
                    f"Non-finite sample at index {sample}", participant, day_id, electrode,
                )
            if np.any(day.samples[day.missing] != 0):
                electrode = int(np.flatnonzero(day.missing & np.any(day.samples != 0, axis=1))[0])
                raise DatasetValidationError("Missing electrode carries a payload", participant, day_id, electrode)

    # --- lookup -----------------------------------------------------------

    def participants(self) -> List[int]:
        return list(self.electrode_counts)

    def days_for(self, participant: int) -> List[int]:
        self._check_participant(participant)
        return [day for (p, day) in self._days if p == participant]

    def test_day(self, participant: int) -> int:
        """The last recorded day is held out for testing."""
        return self.days_for(participant)[-1]

    def train_days(self, participant: int) -> List[int]:
        return self.days_for(participant)[:-1]

    def day(self, participant: int, day: int) -> DayRecording:
        self._check_participant(participant)
        key = (participant, day)
        if key not in self._days:
            raise UnknownRecordingError(
                f"Participant {participant} has no day {day}. "
                f"Available days: {self.days_for(participant)}"
            )
        return self._days[key]

    def iter_days(self) -> Iterator[DayRecording]:
        return iter(self._days.values())

    def _check_participant(self, participant: int) -> None:
        if participant not in self.electrode_counts:
            available = ", ".join(str(p) for p in self.electrode_counts)
            raise UnknownRecordingError(
                f"Participant {participant} not found. Available participants: {available or 'none'}"
            )

    # --- operations -------------------------------------------------------

    def availability(self, participant: int, day: int) -> AvailabilitySets:
        """Split K_i into observed and naturally-missing electrode ids."""
        sets = AvailabilitySets.from_missing(participant, day, self.day(participant, day).missing)
        if sets.all_missing:
            logger.warning("Participant %s day %s has no observed electrodes", participant, day)
        return sets

    def slice_instances(self, participant: int, day: int, window_len: int, stride: int) -> List[np.ndarray]:
        """
        Cut a day into electrodes x window_len instances.

        Trailing samples that do not fill a window are dropped. Missing
        electrodes stay as zero rows; their flags come from availability().

        Args:
            participant: Participant id
            day: Day id
            window_len: Samples per instance
            stride: Samples between instance starts

        Returns:
            List of float32 arrays of shape (electrodes, window_len)
        """
        if window_len < 1 or stride < 1:
            raise ValueError("window_len and stride must be positive")
        record = self.day(participant, day)
        length = record.n_samples
        if window_len > length:
            logger.warning(
                "Window of %d samples exceeds day length %d (participant %s, day %s)",
                window_len, length, participant, day,
            )
            return []
        count = (length - window_len) // stride + 1
        return [record.samples[:, i * stride:i * stride + window_len] for i in range(count)]


class RaggedStore:
    """
    Service for reading and writing the ragged dataset directory format.

    Usage:
        store = RaggedStore('runs/abc/dataset')
        store.save(recording, geometry)
        recording, geometry = store.load()
    """

    def __init__(self, root: str):
        self.root = Path(root)

    def _manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def _payload_path(self, participant: int, day: int, electrode: int) -> Path:
        return self.root / PAYLOAD_DIR / f"p{participant}_d{day}_e{electrode}.f32"

    def save(self, recording: RaggedRecording, geometry: ElectrodeGeometry) -> Path:
        """Write manifest and payloads; returns the manifest path."""
        geometry.validate(recording.electrode_counts)
        (self.root / PAYLOAD_DIR).mkdir(parents=True, exist_ok=True)

        participants = []
        for participant, count in recording.electrode_counts.items():
            days = []
            for day_id in recording.days_for(participant):
                record = recording.day(participant, day_id)
                missing = [int(e) for e in np.flatnonzero(record.missing)]
                entry = {
                    'id': day_id,
                    'n_samples': record.n_samples,
                    'sampling_rate': float(record.sampling_rate),
                    'missing': missing,
                }
                if record.calendar is not None:
                    entry['calendar'] = record.calendar
                days.append(entry)
                for electrode in range(count):
                    if record.missing[electrode]:
                        continue
                    record.samples[electrode].astype(PAYLOAD_DTYPE).tofile(
                        self._payload_path(participant, day_id, electrode)
                    )
            participants.append({
                'id': participant,
                'electrode_count': count,
                'geometry': geometry.for_participant(participant).astype(float).tolist(),
                'days': days,
            })

        manifest = {'format': 'ragged-store', 'version': FORMAT_VERSION, 'participants': participants}
        with open(self._manifest_path(), 'w', encoding='utf-8') as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
        logger.info("Saved dataset with %d participants to %s", len(participants), self.root)
        return self._manifest_path()

    def load(self) -> Tuple[RaggedRecording, ElectrodeGeometry]:
        """Read and validate the dataset directory."""
        manifest_path = self._manifest_path()
        if not manifest_path.exists():
            raise DatasetValidationError(f"Manifest not found: {manifest_path}")
        with open(manifest_path, 'r', encoding='utf-8') as f:
            try:
                manifest = json.load(f)
            except json.JSONDecodeError as e:
                raise DatasetValidationError(f"Manifest is not valid JSON: {e}") from e

        counts: Dict[int, int] = {}
        days: Dict[Tuple[int, int], DayRecording] = {}
        geometry = ElectrodeGeometry()

        for entry in manifest.get('participants', []):
            participant = int(entry['id'])
            count = int(entry['electrode_count'])
            counts[participant] = count
            geometry.positions[participant] = np.asarray(entry.get('geometry', []), dtype=float).reshape(-1, 3)

            day_ids = [int(d['id']) for d in entry.get('days', [])]
            if day_ids != sorted(set(day_ids)):
                raise DatasetValidationError("Day ids must be strictly increasing", participant=participant)

            for day_entry in entry.get('days', []):
                days[(participant, int(day_entry['id']))] = self._load_day(participant, count, day_entry)

        geometry.validate(counts)
        recording = RaggedRecording(counts, days)
        logger.info("Loaded dataset from %s: %d participants, %d days", self.root, len(counts), len(days))
        return recording, geometry

    def _load_day(self, participant: int, count: int, entry: Dict) -> DayRecording:
        day_id = int(entry['id'])
        n_samples = int(entry['n_samples'])
        missing = np.zeros(count, dtype=bool)
        for electrode in entry.get('missing', []):
            if not 0 <= int(electrode) < count:
                raise DatasetValidationError(
                    "Missing electrode id out of range", participant, day_id, int(electrode),
                )
            missing[int(electrode)] = True

        samples = np.zeros((count, n_samples), dtype=np.float32)
        for electrode in range(count):
            path = self._payload_path(participant, day_id, electrode)
            if missing[electrode]:
                if path.exists():
                    raise DatasetValidationError(
                        "Payload present for an electrode declared missing", participant, day_id, electrode,
                    )
                continue
            if not path.exists():
                raise DatasetValidationError("Payload file not found", participant, day_id, electrode)
            n_bytes = path.stat().st_size
            if n_bytes % PAYLOAD_DTYPE.itemsize:
                raise DatasetValidationError(
                    f"Payload size {n_bytes} is not a whole number of samples", participant, day_id, electrode,
                )
            values = np.fromfile(path, dtype=PAYLOAD_DTYPE)
            if values.size != n_samples:
                raise DatasetValidationError(
                    f"Length mismatch: manifest declares {n_samples} samples, payload holds {values.size}",
                    participant, day_id, electrode,
                )
            if not np.all(np.isfinite(values)):
                sample = int(np.flatnonzero(~np.isfinite(values))[0])
                raise DatasetValidationError(
                    f"Non-finite sample at index {sample}", participant, day_id, electrode,
                )
            samples[electrode] = values

        return DayRecording(
            participant=participant,
            day=day_id,
            sampling_rate=float(entry['sampling_rate']),
            samples=samples,
            missing=missing,
            calendar=entry.get('calendar'),
        )


def load_dataset(root_path: str) -> Tuple[RaggedRecording, ElectrodeGeometry]:
    """Load and validate a dataset directory."""
    return RaggedStore(root_path).load()


def save_dataset(root_path: str, recording: RaggedRecording, geometry: ElectrodeGeometry) -> Path:
    """Persist a dataset in the directory format read by load_dataset()."""
    return RaggedStore(root_path).save(recording, geometry)

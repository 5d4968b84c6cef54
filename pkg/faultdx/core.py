#
# Value types shared by every stage of the pipeline
#
# Signals and spectra are immutable: the numpy buffers are copied on construction
# and flagged read-only so they can be handed between processes and threads.
#
import enum
import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

Split = Literal["train", "validation", "test"]


class FaultDxException(Exception):
    pass


class SignalException(FaultDxException):
    pass


class FaultLabel(enum.IntEnum):
    """Machine conditions, encoded 0..6 in this order"""

    Normal = 0
    BPFO = 1
    BPFI = 2
    Unbalance = 3
    Misalignment = 4
    Looseness = 5
    GearFault = 6

    @classmethod
    def from_name(cls, name: str) -> "FaultLabel":
        lookup = {label.name.lower(): label for label in cls}
        try:
            return lookup[name.strip().lower()]
        except KeyError:
            raise SignalException(
                f"Unknown fault label ({name}), expected one of {[label.name for label in cls]}"
            )


N_CLASSES = len(FaultLabel)


def _frozen_array(values, name: str) -> FloatArray:
    array = np.array(values, dtype=np.float64).reshape(-1)
    if array.size == 0:
        raise SignalException(f"{name} must not be empty")
    if not np.all(np.isfinite(array)):
        raise SignalException(f"{name} must contain finite values only")
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class TimeSeries:
    samples: FloatArray
    sample_rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_array(self.samples, "samples"))
        if not np.isfinite(self.sample_rate_hz) or self.sample_rate_hz <= 0:
            raise SignalException(f"Sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate_hz / 2

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def time(self) -> FloatArray:
        return np.arange(len(self)) / self.sample_rate_hz

    def with_samples(self, samples) -> "TimeSeries":
        return TimeSeries(samples=samples, sample_rate_hz=self.sample_rate_hz)


@dataclass(frozen=True, eq=False)
class Spectrum:
    magnitudes: FloatArray
    df_hz: float
    f_start_hz: float = 0.0
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "magnitudes", _frozen_array(self.magnitudes, "magnitudes"))
        if not np.isfinite(self.df_hz) or self.df_hz <= 0:
            raise SignalException(f"Bin width must be positive, got {self.df_hz}")
        if not np.isfinite(self.f_start_hz) or self.f_start_hz < 0:
            raise SignalException(f"Start frequency must be >= 0, got {self.f_start_hz}")
        if not self.normalized and np.any(self.magnitudes < 0):
            raise SignalException("Magnitudes of an unnormalized spectrum must be >= 0")

    def __len__(self) -> int:
        return self.magnitudes.size

    def frequencies(self) -> FloatArray:
        return self.f_start_hz + np.arange(len(self)) * self.df_hz

    def bin_of(self, frequency_hz: float) -> int:
        """Nearest bin to a frequency, clamped to the spectrum"""
        k = int(round((frequency_hz - self.f_start_hz) / self.df_hz))
        return min(max(k, 0), len(self) - 1)


@dataclass(frozen=True)
class Provenance:
    origin_signal_id: str
    condition: FaultLabel
    augmentation_op: str = "none"
    parameter: Optional[float] = None
    repetition: int = 0
    rng_seed: int = 0


@dataclass(frozen=True, eq=False)
class LabeledSample:
    spectrum: Spectrum
    label: FaultLabel
    provenance: Provenance


@dataclass(eq=False)
class LabeledDataset:
    samples: list[LabeledSample] = field(default_factory=list)
    splits: list[Split] = field(default_factory=list)

    def __post_init__(self):
        if not self.splits:
            self.splits = ["train"] * len(self.samples)
        if len(self.splits) != len(self.samples):
            raise SignalException("Every sample needs exactly one split tag")

    def __len__(self) -> int:
        return len(self.samples)

    def subset(self, split: Split) -> "LabeledDataset":
        chosen = [s for s, tag in zip(self.samples, self.splits) if tag == split]
        return LabeledDataset(samples=chosen, splits=[split] * len(chosen))

    def split_counts(self) -> dict[str, int]:
        return {tag: self.splits.count(tag) for tag in ("train", "validation", "test")}

    def class_counts(self) -> dict[FaultLabel, int]:
        counts = {label: 0 for label in FaultLabel}
        for sample in self.samples:
            counts[sample.label] += 1
        return counts

    def matrix(self) -> tuple[FloatArray, npt.NDArray[np.int64]]:
        """Stack the spectra into (n, bins) and the labels into (n,)"""
        if not self.samples:
            raise SignalException("Dataset is empty")
        lengths = {len(s.spectrum) for s in self.samples}
        if len(lengths) != 1:
            raise SignalException(f"Spectra have inconsistent lengths: {sorted(lengths)}")
        x = np.stack([s.spectrum.magnitudes for s in self.samples])
        y = np.array([int(s.label) for s in self.samples], dtype=np.int64)
        return x, y

    def digest(self) -> str:
        """Content hash over spectra, labels and split tags"""
        h = hashlib.sha256()
        for sample, tag in zip(self.samples, self.splits):
            h.update(sample.spectrum.magnitudes.tobytes())
            h.update(bytes([int(sample.label)]))
            h.update(tag.encode())
        return h.hexdigest()

    @staticmethod
    def concat(datasets: Iterable["LabeledDataset"]) -> "LabeledDataset":
        samples, splits = [], []
        for dataset in datasets:
            samples.extend(dataset.samples)
            splits.extend(dataset.splits)
        return LabeledDataset(samples=samples, splits=splits)


def label_to_onehot(label: FaultLabel) -> FloatArray:
    onehot = np.zeros(N_CLASSES, dtype=np.float64)
    onehot[int(label)] = 1.0
    return onehot


def onehot_to_label(vector) -> FaultLabel:
    """argmax decoding; np.argmax returns the lowest index on ties"""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (N_CLASSES,):
        raise SignalException(f"Expected a vector of {N_CLASSES} values, got shape {vector.shape}")
    return FaultLabel(int(np.argmax(vector)))

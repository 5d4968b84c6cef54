from pathlib import Path
from typing import Optional

from pydantic import BaseModel

from faultdx.core import FaultLabel


class Diagnosis(BaseModel):
    label: str
    probabilities: dict[str, float]

    @classmethod
    def from_probabilities(cls, label: FaultLabel, probabilities) -> "Diagnosis":
        return cls(
            label=label.name,
            probabilities={l.name: float(p) for l, p in zip(FaultLabel, probabilities)},
        )


class Explanation(Diagnosis):
    # (frequency_hz, relevance), strongest first
    top_frequencies: list[tuple[float, float]]
    heatmap: Path
    plot: Optional[Path] = None


class ClassHeatmaps(BaseModel):
    heatmaps: dict[str, Path]
    samples: int


class TrainingSummary(BaseModel):
    model: Path
    samples: int
    best_epoch: int
    stop_epoch: int
    best_val_accuracy: float


class Evaluation(BaseModel):
    accuracy: float
    test_size: int
    confusion: list[list[int]]


class ReportFiles(BaseModel):
    table: Path
    csv: Path
    timings: Path
    mean_accuracy: Optional[float] = None
    std_accuracy: Optional[float] = None

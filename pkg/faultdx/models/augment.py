import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator


class Range(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    min: float
    max: float

    @model_validator(mode="after")
    def check_order(self):
        if self.max < self.min:
            raise ValueError(f"Range is empty: min ({self.min}) > max ({self.max})")
        return self

    def is_point(self) -> bool:
        return self.min == self.max


class AugmentParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    # Noise coefficient, multiplied by the signal std when gauss_relative is set
    alpha_gauss: Range = Range(min=0.01, max=0.1)
    gauss_relative: bool = True
    alpha_mask: Range = Range(min=0.01, max=0.1)
    # Shift as a fraction of the signal length, unless shift_samples is given
    shift_fraction: Range = Range(min=-0.05, max=0.05)
    shift_samples: Optional[Range] = None
    alpha_scal: Range = Range(min=0.8, max=1.2)
    alpha_stre: Range = Range(min=0.95, max=1.05)
    # Mixed into every augmentation task seed
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def check_ranges(self):
        if self.alpha_gauss.min < 0:
            raise ValueError("alpha_gauss must be >= 0")
        if self.alpha_mask.min < 0 or self.alpha_mask.max > 1:
            raise ValueError("alpha_mask must lie within [0, 1]")
        if self.alpha_scal.min <= 0:
            raise ValueError("alpha_scal must be > 0")
        if self.alpha_stre.min <= 0:
            raise ValueError("alpha_stre must be > 0")
        if abs(self.shift_fraction.min) >= 1 or abs(self.shift_fraction.max) >= 1:
            raise ValueError("shift_fraction must lie within (-1, 1)")
        return self

    @classmethod
    def identity(cls, seed: int = 0) -> "AugmentParams":
        """Parameters under which every operator returns its input"""
        zero = Range(min=0, max=0)
        one = Range(min=1, max=1)
        return cls(
            alpha_gauss=zero,
            alpha_mask=zero,
            shift_fraction=zero,
            shift_samples=zero,
            alpha_scal=one,
            alpha_stre=one,
            seed=seed,
        )


N_CONDITIONS = 7
N_OPERATORS = 5


class BuildPlan(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_total: int = Field(ge=1)
    n_r: int = Field(ge=1)

    @computed_field
    @property
    def q_aug(self) -> int:
        return math.ceil(self.n_total / (N_CONDITIONS * N_OPERATORS * self.n_r))

    @property
    def n_generated(self) -> int:
        return N_CONDITIONS * N_OPERATORS * self.n_r * self.q_aug

    @property
    def n_excess(self) -> int:
        return self.n_generated - self.n_total

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field


class SpectralConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    f_max_hz: float = Field(default=3500.0, gt=0)
    window: Literal["none", "hann"] = "none"
    detrend_mean: bool = False
    # z-score over the full spectrum before cutting
    normalize_before_cut: bool = False

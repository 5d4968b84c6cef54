from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class MachineSpec(BaseModel):
    """Characteristic frequencies of the monitored machine, all in Hz"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rotation_hz: float = Field(gt=0)
    gmf_hz: Optional[float] = Field(default=None, gt=0)
    bpfo_hz: Optional[float] = Field(default=None, gt=0)
    bpfi_hz: Optional[float] = Field(default=None, gt=0)
    # None resolves to fs/8 of the signal the burst is injected into
    impact_resonance_hz: Optional[float] = Field(default=None, gt=0)
    looseness_harmonic_count: int = Field(default=4, ge=1)
    random_phase: bool = False

    def resonance_for(self, sample_rate_hz: float) -> float:
        if self.impact_resonance_hz is not None:
            return self.impact_resonance_hz
        return sample_rate_hz / 8


class AmplitudeRule(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    min_gain_db: float = Field(default=3.0, ge=0)
    max_gain_db: float = 20.0
    phase_compensated: bool = True
    sideband_scale: float = Field(default=0.5, gt=0)

    @model_validator(mode="after")
    def check_order(self):
        if self.max_gain_db < self.min_gain_db:
            raise ValueError(
                f"max_gain_db ({self.max_gain_db}) must be >= min_gain_db ({self.min_gain_db})"
            )
        return self


class SurrogateConfig(BaseModel):
    """Standalone baseline: rotation tone, white noise and weak random tones"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    sample_rate_hz: float = Field(default=25_000.0, gt=0)
    n_samples: int = Field(default=25_000, ge=2)
    rotation_amplitude: float = Field(default=1.0, ge=0)
    noise_std: float = Field(default=0.1, ge=0)
    n_random_tones: int = Field(default=10, ge=0)
    # Random tone amplitudes are drawn around this multiple of noise_std
    random_tone_level: float = Field(default=1.0, ge=0)

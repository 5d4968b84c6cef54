from pydantic import BaseModel, ConfigDict, Field, model_validator

from faultdx.core import N_CLASSES


class Architecture(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    input_len: int = Field(ge=1)
    conv_filters: int = Field(default=32, ge=1)
    kernel_size: int = Field(default=5, ge=1)
    pool_size: int = Field(default=4, ge=1)
    dropout_rate: float = Field(default=0.5, ge=0, lt=1)
    dense_units: int = Field(default=100, ge=1)
    n_classes: int = Field(default=N_CLASSES, ge=2)

    @model_validator(mode="after")
    def check_shapes(self):
        if self.input_len < self.kernel_size:
            raise ValueError(
                f"input_len ({self.input_len}) must be >= kernel_size ({self.kernel_size})"
            )
        if self.conv_len < self.pool_size:
            raise ValueError(
                f"Convolution output ({self.conv_len}) is shorter than pool_size ({self.pool_size})"
            )
        return self

    @property
    def conv_len(self) -> int:
        return self.input_len - self.kernel_size + 1

    @property
    def pooled_len(self) -> int:
        return self.conv_len // self.pool_size

    @property
    def flat_len(self) -> int:
        return self.pooled_len * self.conv_filters


class LayerSettings(BaseModel):
    """Architecture fields that do not depend on the data"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    conv_filters: int = Field(default=32, ge=1)
    kernel_size: int = Field(default=5, ge=1)
    pool_size: int = Field(default=4, ge=1)
    dropout_rate: float = Field(default=0.5, ge=0, lt=1)
    dense_units: int = Field(default=100, ge=1)

    def for_input(self, input_len: int) -> Architecture:
        return Architecture(input_len=input_len, **self.model_dump())


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
    patience: int = Field(default=8, ge=1)
    min_delta: float = Field(default=0.001, ge=0)
    max_epochs: int = Field(default=200, ge=1)
    validation_fraction: float = Field(default=0.1, gt=0, lt=1)
    seed: int = 0

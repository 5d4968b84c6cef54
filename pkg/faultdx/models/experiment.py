from os import cpu_count, environ
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from faultdx.config_parser import apply_overrides, parse_config
from faultdx.core import FaultDxException
from faultdx.models.augment import AugmentParams
from faultdx.models.machine import AmplitudeRule, MachineSpec, SurrogateConfig
from faultdx.models.network import LayerSettings, TrainConfig
from faultdx.models.spectral import SpectralConfig

DEFAULT_TOTAL_SIZES = [1050, 2100, 3150, 4200, 5250, 6300, 7350, 8400, 9450, 10500]
DEFAULT_REAL_COUNTS = [0, 1, 2, 3, 5, 10, 15, 25, 30, 50, 75]

# Machine of the desk-scale transfer experiment (frequencies of the gearbox cases)
DESK_MACHINE = MachineSpec(rotation_hz=20.6, gmf_hz=711.0, bpfo_hz=107.09, bpfi_hz=155.7)


class ExperimentException(FaultDxException):
    pass


class BaselineSource(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    source: Literal["surrogate", "files"] = "surrogate"
    # Surrogate candidates available for training-pool synthesis
    count: int = Field(default=30, ge=1)


class HeldOutConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    # Held-out baselines that receive injected faults but no augmentation
    n_baselines: int = Field(default=50, ge=1)


class PathsConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    out_dir: Path = Field(default_factory=lambda: Path(environ.get("FAULTDX_OUT", "out")))
    signals_dir: Optional[Path] = None
    test_dir: Optional[Path] = None
    models_dir: Optional[Path] = None
    reports_dir: Optional[Path] = None

    @property
    def models(self) -> Path:
        return self.models_dir or self.out_dir / "models"

    @property
    def reports(self) -> Path:
        return self.reports_dir or self.out_dir / "reports"


class SweepConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    sizes: list[int] = Field(default_factory=lambda: list(DEFAULT_TOTAL_SIZES))
    real_counts: list[int] = Field(default_factory=lambda: list(DEFAULT_REAL_COUNTS))


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "experiment"
    seed: int = Field(default=0, ge=0)
    machine: MachineSpec = DESK_MACHINE
    amplitude: AmplitudeRule = AmplitudeRule()
    surrogate: SurrogateConfig = SurrogateConfig()
    spectral: SpectralConfig = SpectralConfig()
    augment: AugmentParams = AugmentParams()
    network: LayerSettings = LayerSettings()
    train: TrainConfig = TrainConfig()
    baselines: BaselineSource = BaselineSource()
    test: HeldOutConfig = HeldOutConfig()
    paths: PathsConfig = Field(default_factory=PathsConfig)
    sweep: SweepConfig = SweepConfig()
    n_total: int = Field(default=5250, ge=35)
    n_r: int = Field(default=30, ge=0)
    repetitions: int = Field(default=10, ge=1)
    # Process-pool size for runs and pool building, all cores unless set
    workers: int = Field(default_factory=lambda: cpu_count() or 1, ge=1)

    @model_validator(mode="after")
    def check_sources(self):
        if self.baselines.source == "files" and self.paths.signals_dir is None:
            raise ValueError("baselines.source = files needs paths.signals_dir")
        return self

    def check_paths(self):
        """Referenced input directories must exist when a run starts"""
        for name in ("signals_dir", "test_dir"):
            path = getattr(self.paths, name)
            if path is not None and not path.is_dir():
                raise FileNotFoundError(f"paths.{name} ({path}) is not a directory")


def load_experiment_config(
        path: Optional[Union[str, Path]] = None,
        overrides: Optional[list[str]] = None,
        seed: Optional[int] = None,
        out: Optional[Union[str, Path]] = None,
) -> ExperimentConfig:
    """Config file, then `key=value` overrides, then --seed/--out"""

    tree: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"Config file ({path}) not found")
        tree = parse_config(path.read_text(encoding="utf-8"), source=str(path))

    extra = list(overrides or [])
    if seed is not None:
        extra.append(f"seed = {seed}")
    if out is not None:
        extra.append(f"paths.out_dir = {out}")

    return ExperimentConfig.model_validate(apply_overrides(tree, extra))

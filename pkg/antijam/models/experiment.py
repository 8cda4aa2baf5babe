from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Literal

import numpy as np
import yaml
from pydantic import Field, ValidationError, model_validator

from antijam.models.beamforming import AOTrace
from antijam.models.estimation import EstimationConfig
from antijam.models.optimizer import AoConfig, WmmseConfig
from antijam.models.scenario import ScenarioConfig
from antijam.models.shared import SCHEMA_VERSION, ConfigModel
from antijam.schemas.error import InvalidExperimentSpecError, SchemaVersionError

RESULT_COLUMNS = [
    "sweep_axis",
    "sweep_value",
    "scheme",
    "trial",
    "seed",
    "q_watts",
    "jsr_db",
    "min_xi_db",
    "runtime_s",
]


class Scheme(str, Enum):
    AO_AJHBF = "ao-ajhbf"
    WMMSE = "wmmse"
    AO_AJHBF_NOQUANT = "ao-ajhbf-noquant"


class SweepAxis(str, Enum):
    AP_ANTENNAS = "ap_antennas"
    NUM_JAMMERS = "num_jammers"
    NMSE = "nmse"


class Sweep(ConfigModel):
    axis: SweepAxis
    values: list[float] = Field(min_length=1)

    @model_validator(mode="after")
    def check_values(self) -> "Sweep":
        for value in self.values:
            if self.axis == SweepAxis.NMSE:
                if not 0 <= value < 1:
                    raise ValueError(f"nmse values must lie in [0, 1), got {value}")
            elif value != int(value) or value < 1:
                raise ValueError(f"{self.axis.value} values must be positive integers")
        return self


class ExperimentSpec(ConfigModel):
    """
    A batch of seeded trials over one or more one-dimensional sweeps.

    Every sweep varies one axis around the chosen preset; all other scenario
    fields come from the preset and ``scenario`` overrides. When sweeping
    ``num_jammers`` the total jammer antenna count ``jammer_antenna_budget`` is
    split evenly, so each jammer has ``budget // G`` antennas.
    """

    schema_version: int = SCHEMA_VERSION
    name: str = "experiment"
    preset: Literal["desk", "paper"] = "desk"
    scenario: dict[str, Any] = Field(default_factory=dict)
    estimation: EstimationConfig = Field(default_factory=EstimationConfig)
    ao: AoConfig = Field(default_factory=AoConfig)
    wmmse: WmmseConfig = Field(default_factory=WmmseConfig)
    sweeps: list[Sweep] = Field(min_length=1)
    trials: int = Field(default=1, ge=1)
    schemes: list[Scheme] = Field(
        default_factory=lambda: [Scheme.AO_AJHBF, Scheme.WMMSE], min_length=1
    )
    output_dir: str = "results"
    base_seed: int = Field(default=0, ge=0)
    jammer_antenna_budget: int = Field(default=36, ge=1)
    record_runtime: bool = True
    save_traces: bool = False

    @model_validator(mode="before")
    @classmethod
    def check_schema_version(cls, data: Any) -> Any:
        if isinstance(data, dict):
            found = data.get("schema_version", SCHEMA_VERSION)
            if found != SCHEMA_VERSION:
                raise SchemaVersionError(found, SCHEMA_VERSION)
        return data

    @model_validator(mode="after")
    def check_points(self) -> "ExperimentSpec":
        for sweep in self.sweeps:
            for value in sweep.values:
                config = self.scenario_config(sweep.axis, value)
                if config.num_jammers < 1:
                    raise ValueError("experiments need at least one jammer")
        return self

    def points(self) -> list[tuple[SweepAxis, float]]:
        return [(sweep.axis, value) for sweep in self.sweeps for value in sweep.values]

    def scenario_config(self, axis: SweepAxis, value: float) -> ScenarioConfig:
        overrides = dict(self.scenario)
        if axis == SweepAxis.AP_ANTENNAS:
            overrides["ap_antennas"] = int(value)
            overrides["ap_rf_chains"] = max(1, int(value) // 2)
        elif axis == SweepAxis.NUM_JAMMERS:
            jammers = int(value)
            if self.jammer_antenna_budget // jammers < 1:
                raise ValueError(
                    f"jammer antenna budget {self.jammer_antenna_budget} "
                    f"cannot be split over {jammers} jammers"
                )
            overrides["num_jammers"] = jammers
            overrides["jammer_antennas"] = self.jammer_antenna_budget // jammers
        return ScenarioConfig.preset(self.preset, **overrides)

    def estimation_config(self, axis: SweepAxis, value: float) -> EstimationConfig:
        if axis == SweepAxis.NMSE:
            return self.estimation.model_copy(update={"nmse_target": float(value)})
        return self.estimation

    @classmethod
    def from_yaml(cls, path: Path) -> "ExperimentSpec":
        """
        Loads and validates an experiment file.

        Raises:
            InvalidExperimentSpecError: If the file is not a mapping or fails validation.
            SchemaVersionError: If ``schema_version`` is not supported.
        """
        try:
            data = yaml.safe_load(Path(path).read_text())
        except (OSError, yaml.YAMLError) as error:
            raise InvalidExperimentSpecError(f"cannot read {path}: {error}")
        if not isinstance(data, dict):
            raise InvalidExperimentSpecError(f"{path} does not contain a mapping")
        try:
            return cls.model_validate(data)
        except ValidationError as error:
            raise InvalidExperimentSpecError(str(error))


@dataclass
class RunResult:
    sweep_axis: str
    sweep_value: float
    scheme: str
    trial: int
    seed: int
    q_watts: float = 0.0
    jsr_db: float = float("nan")
    min_xi_db: float = float("nan")
    runtime_s: float = 0.0
    xi: np.ndarray | None = None
    trace: AOTrace | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def row(self) -> list[Any]:
        return [getattr(self, column) for column in RESULT_COLUMNS]


@dataclass
class ExperimentReport:
    results: list[RunResult]
    summary: dict[str, Any]
    files: dict[str, Path] = field(default_factory=dict)

    @property
    def failure_rate(self) -> float:
        if not self.results:
            return 0.0
        return sum(result.failed for result in self.results) / len(self.results)

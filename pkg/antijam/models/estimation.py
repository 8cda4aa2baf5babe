from enum import Enum

from pydantic import Field

from antijam.models.shared import ConfigModel

# Distortion factor per quantization bit count.
QUANTIZATION_ALPHA: dict[int, float] = {
    1: 0.6366,
    2: 0.8825,
    3: 0.96546,
    4: 0.990503,
    5: 0.997501,
}


class EstimationMode(str, Enum):
    PILOT_MMSE = "pilot-mmse"
    SYNTHETIC_NMSE = "synthetic-nmse"


class ErrorChain(str, Enum):
    """Order in which estimation error and fronthaul quantization are applied."""

    ESTIMATE_THEN_QUANTIZE = "estimate-then-quantize"
    QUANTIZE_THEN_ESTIMATE = "quantize-then-estimate"


class EstimationConfig(ConfigModel):
    mode: EstimationMode = EstimationMode.SYNTHETIC_NMSE
    tau_p: int = Field(default=40, ge=1)
    rho_p: float = Field(default=0.1, gt=0)
    nmse_target: float = Field(default=0.01, ge=0, lt=1)
    quant_bits: int | None = Field(default=4, ge=1, le=5)
    n_stat: int = Field(default=200, ge=1)
    error_chain: ErrorChain = ErrorChain.ESTIMATE_THEN_QUANTIZE
    pilot_columns: int | None = Field(default=None, ge=1)

    @property
    def alpha(self) -> float:
        if self.quant_bits is None:
            return 1.0
        return QUANTIZATION_ALPHA[self.quant_bits]

import math
from enum import Enum

from pydantic import Field, model_validator

from antijam.models.shared import ConfigModel, db_to_linear, dbm_to_watts

SPEED_OF_LIGHT = 299_792_458.0


def factor_antennas(count: int) -> tuple[int, int]:
    """
    Splits an antenna count into the squarest (horizontal, vertical) pair.

    Args:
        count (int): Total number of array elements.

    Returns:
        tuple[int, int]: ``(m_h, m_v)`` with ``m_h * m_v == count`` and ``m_h >= m_v``.
    """
    if count < 1:
        raise ValueError(f"antenna count must be positive, got {count}")
    m_v = int(math.isqrt(count))
    while count % m_v:
        m_v -= 1
    return count // m_v, m_v


class ArrayGeometry(ConfigModel):
    m_h: int = Field(ge=1)
    m_v: int = Field(ge=1)
    d_h: float = Field(gt=0)
    d_v: float = Field(gt=0)
    wavelength: float = Field(gt=0)

    @property
    def size(self) -> int:
        return self.m_h * self.m_v

    @classmethod
    def half_wavelength(cls, count: int, wavelength: float) -> "ArrayGeometry":
        m_h, m_v = factor_antennas(count)
        return cls(
            m_h=m_h,
            m_v=m_v,
            d_h=wavelength / 2,
            d_v=wavelength / 2,
            wavelength=wavelength,
        )


class LargeScaleModel(str, Enum):
    LOG_DISTANCE = "log-distance"
    FREE_SPACE = "free-space"


class ScenarioConfig(ConfigModel):
    """
    Dimensions, powers, thresholds and geometry of one simulated deployment.

    ``num_jammers`` may be zero, which turns the jamming power search vacuous.
    Powers are in watts and ``gamma_th`` is linear.
    """

    num_aps: int = Field(default=3, ge=1)
    num_ues: int = Field(default=5, ge=1)
    num_jammers: int = Field(default=2, ge=0)
    ap_antennas: int = Field(default=16, ge=1)
    ap_rf_chains: int = Field(default=8, ge=1)
    ue_antennas: int = Field(default=8, ge=1)
    ue_rf_chains: int = Field(default=4, ge=1)
    jammer_antennas: int = Field(default=36, ge=1)
    ap_paths: int = Field(default=3, ge=1)
    jammer_paths: int = Field(default=3, ge=1)
    p_max: float = Field(default=8.0, gt=0)
    sigma2: float = Field(default=dbm_to_watts(-107.0), gt=0)
    gamma_th: float = Field(default=1.0, gt=0)
    region_side: float = Field(default=1000.0, gt=0)
    rng_seed: int = Field(default=0, ge=0, lt=2**64)

    carrier_wavelength: float = Field(default=SPEED_OF_LIGHT / 28e9, gt=0)
    large_scale_model: LargeScaleModel = LargeScaleModel.LOG_DISTANCE
    path_loss_intercept_db: float = -30.5
    path_loss_exponent_db: float = 36.7
    shadowing_std_db: float = Field(default=4.0, ge=0)
    angle_spread_deg: float = Field(default=5.0, ge=0)
    normalize_paths: bool = False

    @model_validator(mode="after")
    def check_chain_counts(self) -> "ScenarioConfig":
        if self.ap_rf_chains > self.ap_antennas:
            raise ValueError("ap_rf_chains must not exceed ap_antennas")
        if self.ue_rf_chains > self.ue_antennas:
            raise ValueError("ue_rf_chains must not exceed ue_antennas")
        return self

    @property
    def ap_geometry(self) -> ArrayGeometry:
        return ArrayGeometry.half_wavelength(self.ap_antennas, self.carrier_wavelength)

    @property
    def ue_geometry(self) -> ArrayGeometry:
        return ArrayGeometry.half_wavelength(self.ue_antennas, self.carrier_wavelength)

    @property
    def jammer_geometry(self) -> ArrayGeometry:
        return ArrayGeometry.half_wavelength(
            self.jammer_antennas, self.carrier_wavelength
        )

    @classmethod
    def preset(cls, name: str, **overrides) -> "ScenarioConfig":
        """
        Builds one of the named deployments.

        ``desk`` halves the antenna counts of ``paper`` so that test suites stay fast.

        Args:
            name (str): ``"desk"`` or ``"paper"``.
            **overrides: Field values replacing the preset ones.

        Returns:
            ScenarioConfig: The validated configuration.
        """
        base = {
            "num_aps": 3,
            "num_ues": 5,
            "num_jammers": 2,
            "ap_paths": 3,
            "jammer_paths": 3,
            "p_max": 8.0,
            "sigma2": dbm_to_watts(-107.0),
            "gamma_th": db_to_linear(0.0),
        }
        if name == "desk":
            base |= {
                "ap_antennas": 16,
                "ap_rf_chains": 8,
                "ue_antennas": 8,
                "ue_rf_chains": 4,
                "jammer_antennas": 36,
            }
        elif name == "paper":
            base |= {
                "ap_antennas": 36,
                "ap_rf_chains": 18,
                "ue_antennas": 16,
                "ue_rf_chains": 8,
                "jammer_antennas": 36,
            }
        else:
            raise ValueError(f"unknown preset {name!r}, expected 'desk' or 'paper'")
        return cls(**(base | overrides))

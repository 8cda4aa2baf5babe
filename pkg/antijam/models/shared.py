import numpy as np
from pydantic import BaseModel, ConfigDict

SCHEMA_VERSION = 1


class ConfigModel(BaseModel):
    model_config = ConfigDict(
        extra="forbid", validate_assignment=True, frozen=False, use_enum_values=False
    )  # type: ignore


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def circular_normal(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Unit-variance circularly symmetric complex Gaussian samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

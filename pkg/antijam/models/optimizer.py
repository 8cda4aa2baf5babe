from pydantic import Field

from antijam.models.shared import ConfigModel


class PgaConfig(ConfigModel):
    """Softmax sharpness, iteration budget and Armijo parameters of the PGA solver."""

    delta: float = Field(default=-4.0, lt=0)
    max_iters: int = Field(default=200, ge=1)
    armijo_init: float = Field(default=1.0, gt=0)
    armijo_shrink: float = Field(default=0.5, gt=0, lt=1)
    armijo_c: float = Field(default=1e-4, gt=0, lt=1)
    max_backtracks: int = Field(default=30, ge=1)
    tol_eta: float = Field(default=1e-5, gt=0)


class SearchConfig(ConfigModel):
    q_hi_factor: float = Field(default=1e6, gt=0)
    rel_tol: float = Field(default=1e-3, gt=0, lt=1)
    max_expansions: int = Field(default=60, ge=0)
    max_bisections: int = Field(default=200, ge=1)


class FactorizationConfig(ConfigModel):
    max_alternations: int = Field(default=50, ge=1)
    tol: float = Field(default=1e-6, gt=0)


class AoConfig(ConfigModel):
    alternations: int = Field(default=3, ge=1)
    kappa_factor: float = Field(default=1e-3, ge=0)
    pga: PgaConfig = Field(default_factory=PgaConfig)
    search: SearchConfig = Field(default_factory=SearchConfig)
    factorization: FactorizationConfig = Field(default_factory=FactorizationConfig)


class WmmseConfig(ConfigModel):
    max_inner: int = Field(default=100, ge=1)
    tol: float = Field(default=1e-5, gt=0)
    lambda_rel_tol: float = Field(default=1e-6, gt=0)
    max_bisections: int = Field(default=200, ge=1)
    max_expansions: int = Field(default=200, ge=1)

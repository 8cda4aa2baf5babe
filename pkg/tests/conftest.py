import numpy as np
import pytest

from antijam.controllers.channel import generate_channels
from antijam.controllers.priors import build_priors
from antijam.models.channel import ChannelSet
from antijam.models.estimation import EstimationConfig
from antijam.models.priors import ErrorCovariance, PriorSet
from antijam.models.scenario import ScenarioConfig
from antijam.models.shared import circular_normal


@pytest.fixture(name="rng", scope="function")
def get_rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(name="scenario", scope="function")
def get_scenario() -> ScenarioConfig:
    """A deployment small enough for every optimizer to finish in milliseconds."""
    return ScenarioConfig(
        num_aps=2,
        num_ues=2,
        num_jammers=1,
        ap_antennas=4,
        ap_rf_chains=2,
        ue_antennas=2,
        ue_rf_chains=1,
        jammer_antennas=4,
        region_side=200.0,
    )


@pytest.fixture(name="estimation", scope="function")
def get_estimation() -> EstimationConfig:
    return EstimationConfig(n_stat=20)


@pytest.fixture(name="channels", scope="function")
def get_channels(scenario: ScenarioConfig) -> ChannelSet:
    return generate_channels(scenario, np.random.default_rng(7))


@pytest.fixture(name="priors", scope="function")
def get_priors(
    channels: ChannelSet, scenario: ScenarioConfig, estimation: EstimationConfig
) -> PriorSet:
    return build_priors(channels, scenario, estimation, np.random.default_rng(8))


def random_priors(
    rng: np.random.Generator,
    num_aps: int = 2,
    num_ues: int = 3,
    ap_antennas: int = 4,
    ue_antennas: int = 2,
    num_jammers: int = 1,
    p_max: float = 1.0,
    sigma2: float = 0.1,
    error_scale: float = 1e-3,
) -> PriorSet:
    """
    Unit-scale statistics with Gaussian channels and random PSD jamming covariances.

    Args:
        rng (np.random.Generator): Source of all draws.
        error_scale (float): ``Q_k`` is ``error_scale * I`` and ``sigma_q2`` half of it.

    Returns:
        PriorSet: Statistics with bounds computed the way ``build_priors`` does.
    """
    n = num_aps * ap_antennas
    hbar = circular_normal(rng, num_ues, ue_antennas, n)
    x = circular_normal(rng, num_jammers, num_ues, ue_antennas, ue_antennas)
    r_jam = x @ x.conj().transpose(0, 1, 3, 2) / ue_antennas
    error_cov = [
        ErrorCovariance(num_aps, ue_antennas, ap_antennas, scale=error_scale)
        for _ in range(num_ues)
    ]
    sigma_q2 = np.full((num_aps, num_ues), error_scale / 2)
    factor = num_aps * num_ues * p_max
    return PriorSet(
        hbar=hbar,
        error_cov=error_cov,
        sigma_q2=sigma_q2,
        r_jam=r_jam,
        alpha=1.0,
        en_ub=np.full(num_ues, factor * error_scale),
        qe_ub=factor * sigma_q2.max(axis=0),
        num_aps=num_aps,
        p_max=p_max,
        sigma2=sigma2,
    )


def random_precoders(
    rng: np.random.Generator, priors: PriorSet, fill: float = 0.9
) -> np.ndarray:
    """Transmit vectors using ``fill * p_max`` at every AP."""
    K, L = priors.num_ues, priors.num_aps
    f = circular_normal(rng, K, L, priors.ap_antennas)
    power = np.sum(np.abs(f) ** 2, axis=(0, 2))
    f *= np.sqrt(fill * priors.p_max / power)[None, :, None]
    return f.reshape(K, -1)


def unit_combiners(rng: np.random.Generator, priors: PriorSet) -> np.ndarray:
    w = circular_normal(rng, priors.num_ues, priors.ue_antennas)
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def tiny_spec_data(**overrides) -> dict:
    """An experiment over the tiny deployment that runs in well under a second."""
    data = {
        "name": "tiny",
        "trials": 2,
        "base_seed": 7,
        "schemes": ["ao-ajhbf"],
        "scenario": {
            "num_aps": 2,
            "num_ues": 2,
            "num_jammers": 1,
            "ap_antennas": 4,
            "ap_rf_chains": 2,
            "ue_antennas": 2,
            "ue_rf_chains": 1,
            "jammer_antennas": 4,
        },
        "estimation": {"n_stat": 20},
        "ao": {"alternations": 2, "pga": {"max_iters": 20}},
        "wmmse": {"max_inner": 20},
        "sweeps": [{"axis": "nmse", "values": [0.01]}],
    }
    return data | overrides

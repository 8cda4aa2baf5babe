from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import block_diag

from antijam.controllers.hybrid import (
    AlternatingOptimizer,
    ao_ajhbf,
    factorization_gap,
    factorize_combiner,
    factorize_matrix,
    factorize_precoder,
    hybrid_effective,
    max_resistible_q,
)
from antijam.controllers.transmit import per_ap_power, sinr_lb
from antijam.models.optimizer import AoConfig, FactorizationConfig, SearchConfig
from antijam.models.priors import ErrorCovariance, PriorSet
from antijam.models.scenario import ScenarioConfig
from antijam.models.shared import circular_normal
from antijam.schemas.error import AlternationFailureError, NumericalBreachError
from tests.conftest import random_precoders, random_priors, unit_combiners


def scalar_priors(r_jam: float = 1.0, sigma2: float = 0.1) -> PriorSet:
    """One AP, one UE, one jammer, single antennas everywhere."""
    return PriorSet(
        hbar=np.ones((1, 1, 1), dtype=complex),
        error_cov=[ErrorCovariance(1, 1, 1, scale=0.0)],
        sigma_q2=np.zeros((1, 1)),
        r_jam=np.full((1, 1, 1, 1), r_jam, dtype=complex),
        alpha=1.0,
        en_ub=np.zeros(1),
        qe_ub=np.zeros(1),
        num_aps=1,
        p_max=1.0,
        sigma2=sigma2,
    )


def test_double_phase_factorization_is_exact(rng: np.random.Generator):
    target = circular_normal(rng, 8, 2)
    analog, digital, residuals = factorize_matrix(target, 4, FactorizationConfig())
    np.testing.assert_allclose(np.abs(analog), 1.0)
    np.testing.assert_allclose(analog @ digital, target, atol=1e-12)
    assert residuals[-1] < 1e-20


def test_alternating_factorization_descends(rng: np.random.Generator):
    target = circular_normal(rng, 8, 3)
    analog, digital, residuals = factorize_matrix(target, 4, FactorizationConfig())
    assert analog.shape == (8, 4) and digital.shape == (4, 3)
    np.testing.assert_allclose(np.abs(analog), 1.0)
    assert np.all(np.diff(residuals) <= 0)
    assert np.linalg.norm(target - analog @ digital) ** 2 == pytest.approx(residuals[-1])


def test_factorize_precoder_respects_budget(rng: np.random.Generator):
    priors = random_priors(rng, num_ues=3, ap_antennas=8)
    f = random_precoders(rng, priors, fill=1.0)
    f_rf, f_bb, histories = factorize_precoder(
        f, priors.num_aps, 2, priors.p_max, FactorizationConfig()
    )
    assert f_rf.shape == (2, 8, 2)
    assert f_bb.shape == (3, 4)
    assert len(histories) == 2
    np.testing.assert_allclose(np.abs(f_rf), 1.0)


def test_factorized_precoder_power_per_ap(rng: np.random.Generator):
    priors = random_priors(rng, num_ues=3, ap_antennas=8)
    f = random_precoders(rng, priors, fill=1.0)
    f_rf, f_bb, _ = factorize_precoder(
        f, priors.num_aps, 2, priors.p_max, FactorizationConfig()
    )
    effective = f_bb @ block_diag(*f_rf).T
    power = per_ap_power(effective, priors.num_aps)
    assert np.all(power <= priors.p_max * (1 + 1e-9))


def test_factorize_combiner_is_unit_norm(rng: np.random.Generator):
    for m_rf in (1, 2, 3):
        w = circular_normal(rng, 4)
        analog, digital = factorize_combiner(w, m_rf, FactorizationConfig())
        assert analog.shape == (4, m_rf)
        assert np.linalg.norm(analog @ digital) == pytest.approx(1.0)


def test_q_search_closed_form_toy():
    # xi(q) = 1 / (0.1 + q), so xi >= 2 holds up to q = 0.4
    result = max_resistible_q(
        np.ones((1, 1)), np.ones((1, 1)), scalar_priors(), 2.0, SearchConfig()
    )
    assert not result.infeasible and not result.unbounded
    assert result.q <= 0.4
    assert result.q == pytest.approx(0.4, rel=1e-3)
    assert result.min_xi >= 2.0


def test_q_search_infeasible_and_unbounded():
    infeasible = max_resistible_q(
        np.ones((1, 1)), np.ones((1, 1)), scalar_priors(), 20.0, SearchConfig()
    )
    assert infeasible.infeasible and infeasible.q == 0.0

    unbounded = max_resistible_q(
        np.ones((1, 1)), np.ones((1, 1)), scalar_priors(r_jam=0.0), 2.0, SearchConfig()
    )
    assert unbounded.unbounded
    assert unbounded.q == pytest.approx(1e6)


def test_q_search_matches_threshold_crossing():
    rng = np.random.default_rng(300)
    config = SearchConfig()
    for _ in range(20):
        priors = random_priors(rng)
        f = random_precoders(rng, priors)
        w = unit_combiners(rng, priors)
        gamma = 0.5 * float(np.min(sinr_lb(f, w, priors, 0.0)))
        result = max_resistible_q(f, w, priors, gamma, config)
        assert np.min(sinr_lb(f, w, priors, result.q)) >= gamma
        beyond = result.q * (1 + 2 * config.rel_tol)
        assert np.min(sinr_lb(f, w, priors, beyond)) < gamma


def test_factorization_gap_vanishes_for_identical_beamformers():
    rng = np.random.default_rng(301)
    priors = random_priors(rng)
    f = random_precoders(rng, priors)
    w = unit_combiners(rng, priors)
    assert factorization_gap(f, w, f, w, priors, 0.3) == 0.0


def test_ao_ajhbf_is_monotone(scenario: ScenarioConfig, priors: PriorSet):
    result = ao_ajhbf(scenario, priors, AoConfig())
    q = np.array(result.trace.q)
    assert len(q) >= 1
    assert np.all(np.diff(q) >= -1e-9)
    assert result.q == q[-1]
    f_h, w_h = hybrid_effective(result.hybrid)
    assert np.all(per_ap_power(f_h, scenario.num_aps) <= scenario.p_max * (1 + 1e-9))
    np.testing.assert_allclose(np.linalg.norm(w_h, axis=1), 1.0)
    assert result.xi.shape == (scenario.num_ues,)
    frame = result.trace.to_frame()
    assert list(frame.columns) == ["alternation", "q_watts", "min_xi", "eta", "seconds"]


def test_ao_hybrid_shapes(scenario: ScenarioConfig, priors: PriorSet):
    result = ao_ajhbf(scenario, priors, AoConfig(alternations=1))
    hybrid = result.hybrid
    assert hybrid.f_rf.shape == (2, 4, 2)
    assert hybrid.f_bb.shape == (2, 4)
    assert hybrid.w_rf.shape == (2, 2, 1)
    assert hybrid.w_bb.shape == (2, 1)
    assert hybrid.precoders().shape == (2, 8)
    assert len(result.trace.records) == 1


def test_alternation_failures_carry_the_index(
    scenario: ScenarioConfig, priors: PriorSet
):
    optimizer = AlternatingOptimizer(scenario, priors, AoConfig())

    def broken(hybrid, f_fd, q):
        raise NumericalBreachError("test quantity", -1.0)

    with pytest.raises(AlternationFailureError) as caught:
        optimizer.run(broken)
    assert caught.value.data["alternation"] == 1
    assert caught.value.data["cause"] == "NumericalBreachError"


def test_infeasible_first_alternation_does_not_stop_the_loop(
    scenario: ScenarioConfig, priors: PriorSet
):
    optimizer = AlternatingOptimizer(scenario, priors, AoConfig(alternations=3))
    start_hybrid, start_f = optimizer.initial_state()
    calls = []

    def starved_then_normal(hybrid, f_fd, q):
        calls.append(q)
        outcome = optimizer.ajhbf_step(start_hybrid, start_f, q)
        if len(calls) == 1:
            outcome = replace(outcome, f_fd=outcome.f_fd * 1e-9)
        return outcome

    result = optimizer.run(starved_then_normal)
    assert result.trace.q[0] == 0.0
    assert len(result.trace.records) >= 2
    assert len(calls) >= 2


@pytest.mark.slow
def test_ao_is_monotone_over_many_desk_trials():
    from antijam.controllers.channel import generate_channels
    from antijam.controllers.priors import build_priors
    from antijam.models.estimation import EstimationConfig

    scenario = ScenarioConfig.preset("desk")
    for seed in range(50):
        rng = np.random.default_rng(seed)
        channels = generate_channels(scenario, rng)
        priors = build_priors(channels, scenario, EstimationConfig(), rng)
        q = np.array(ao_ajhbf(scenario, priors, AoConfig(alternations=3)).trace.q)
        assert np.all(np.diff(q) >= -1e-9)


@pytest.mark.slow
def test_q_search_matches_a_fine_grid_scan():
    rng = np.random.default_rng(302)
    config = SearchConfig()
    for _ in range(20):
        priors = random_priors(rng)
        f = random_precoders(rng, priors)
        w = unit_combiners(rng, priors)
        gamma = 0.5 * float(np.min(sinr_lb(f, w, priors, 0.0)))
        result = max_resistible_q(f, w, priors, gamma, config)
        grid = np.linspace(0.0, 2 * result.q, 10_000)
        feasible = [np.min(sinr_lb(f, w, priors, q)) >= gamma for q in grid]
        oracle = grid[np.flatnonzero(feasible)[-1]]
        step = grid[1] - grid[0]
        assert result.q >= oracle - step
        assert result.q <= oracle + step

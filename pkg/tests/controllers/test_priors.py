import numpy as np
import pytest

from antijam.controllers.channel import link_second_moment
from antijam.controllers.priors import (
    build_priors,
    en_qe_upper_bounds,
    jammer_covariance,
    mmse_estimate,
    monte_carlo_en_qe,
    mrt_jamming_covariance,
    pilot_overlap,
    pilot_selection,
    psd_repair,
    quantization_variance,
    quantize_channel,
    stack_links,
    synthetic_error,
)
from antijam.models.channel import ChannelSet
from antijam.models.estimation import (
    ErrorChain,
    EstimationConfig,
    EstimationMode,
)
from antijam.models.priors import PriorSet
from antijam.models.scenario import ScenarioConfig
from antijam.models.shared import circular_normal
from antijam.schemas.error import (
    BrokenPsdInvariantError,
    InvalidScenarioError,
    UnsupportedQuantizationBitsError,
)
from tests.conftest import random_precoders, unit_combiners


def test_psd_repair_clips_round_off():
    repaired = psd_repair(np.diag([1.0, -1e-12]), "round-off")
    assert np.linalg.eigvalsh(repaired)[0] >= 0
    assert repaired[0, 0] == pytest.approx(1.0)


def test_psd_repair_rejects_real_negatives():
    with pytest.raises(BrokenPsdInvariantError):
        psd_repair(np.diag([1.0, -0.1]), "broken")


def test_psd_repair_keeps_psd_input_hermitian():
    x = np.array([[2.0, 1j], [-1j, 2.0]])
    np.testing.assert_allclose(psd_repair(x, "fine"), x)


def test_pilot_selection_columns():
    assert pilot_selection(8, 5, EstimationConfig(tau_p=40)).shape == (8, 8)
    assert pilot_selection(8, 5, EstimationConfig(tau_p=10)).shape == (8, 2)
    assert pilot_selection(8, 5, EstimationConfig(pilot_columns=3)).shape == (8, 3)
    with pytest.raises(InvalidScenarioError):
        pilot_selection(8, 5, EstimationConfig(tau_p=3))


def test_pilot_overlap_round_robin():
    overlap = pilot_overlap(5, 2)
    assert overlap[0, 2] == 1.0
    assert overlap[0, 1] == 0.0
    np.testing.assert_array_equal(np.diag(overlap), np.ones(5))
    np.testing.assert_array_equal(pilot_overlap(3, 5), np.eye(3))


def test_quantization_variance_with_orthogonal_pilots():
    estimation = EstimationConfig(tau_p=10, rho_p=0.5)
    beta = np.array([[1e-3, 2e-3], [3e-3, 4e-3]])
    alpha = 0.9
    expected = alpha * (1 - alpha) * 5.0 * beta**2
    np.testing.assert_allclose(quantization_variance(alpha, beta, estimation), expected)


def test_quantize_channel_lossless_and_unknown_bits(rng: np.random.Generator):
    estimate = circular_normal(rng, 2, 3, 2, 4)
    beta = np.ones((2, 3))
    hbar, sigma_q2 = quantize_channel(estimate, None, beta, EstimationConfig(), rng)
    np.testing.assert_array_equal(hbar, estimate)
    np.testing.assert_array_equal(sigma_q2, np.zeros((2, 3)))
    with pytest.raises(UnsupportedQuantizationBitsError):
        quantize_channel(estimate, 6, beta, EstimationConfig(), rng)


def test_quantize_channel_scales_by_alpha(rng: np.random.Generator):
    estimate = circular_normal(rng, 1, 1, 2, 2)
    hbar, sigma_q2 = quantize_channel(
        estimate, 4, np.full((1, 1), 1e-9), EstimationConfig(), rng
    )
    assert sigma_q2[0, 0] < 1e-15
    np.testing.assert_allclose(hbar, 0.990503 * estimate, atol=1e-6)


def test_synthetic_error_hits_target_variance(channels: ChannelSet):
    estimate = synthetic_error(channels, 0.1, np.random.default_rng(2))
    L, m_u, m = channels.num_aps, channels.ue_antennas, channels.ap_antennas
    for k, cov in enumerate(estimate.error_cov):
        expected = sum(
            link_second_moment(
                channels.h_paths[l][k], channels.ap_geometry, channels.ue_geometry
            )
            for l in range(L)
        )
        assert cov.scale * L * m * m_u == pytest.approx(0.1 * expected)
        assert cov.lambda_max == pytest.approx(cov.scale)
    assert estimate.hhat.shape == channels.h.shape
    assert not np.allclose(estimate.hhat, channels.h)


def test_synthetic_error_zero_nmse_is_exact(channels: ChannelSet):
    estimate = synthetic_error(channels, 0.0, np.random.default_rng(2))
    np.testing.assert_allclose(estimate.hhat, channels.h)


def test_mmse_estimate_error_covariance(channels: ChannelSet, scenario: ScenarioConfig):
    estimation = EstimationConfig(mode=EstimationMode.PILOT_MMSE)
    estimate = mmse_estimate(
        channels, estimation, scenario.sigma2, np.random.default_rng(4)
    )
    assert estimate.hhat.shape == channels.h.shape
    dim = channels.ue_antennas * channels.ap_antennas
    for cov in estimate.error_cov:
        assert len(cov.blocks) == channels.num_aps
        assert cov.dense().shape == (channels.num_aps * dim, channels.num_aps * dim)
        for spectrum in cov.spectrum():
            assert spectrum[0] >= 0
    for l in range(channels.num_aps):
        for k in range(channels.num_ues):
            second = link_second_moment(
                channels.h_paths[l][k], channels.ap_geometry, channels.ue_geometry
            )
            error = np.real(np.trace(estimate.error_cov[k].blocks[l]))
            assert error <= second * (1 + 1e-9)


def test_mrt_jamming_covariance_of_one_realization(rng: np.random.Generator):
    j = circular_normal(rng, 1, 3, 5)
    covariance = mrt_jamming_covariance(j)
    s = np.linalg.svd(j[0], compute_uv=False)
    assert np.real(np.trace(covariance)) == pytest.approx(s[0] ** 2)
    assert np.linalg.matrix_rank(covariance, tol=1e-9 * s[0] ** 2) == 1


def test_jammer_covariance_is_psd(channels: ChannelSet):
    r_jam = jammer_covariance(channels, 30, np.random.default_rng(6))
    assert r_jam.shape == (1, 2, 2, 2)
    for matrix in r_jam.reshape(-1, 2, 2):
        np.testing.assert_allclose(matrix, matrix.conj().T)
        assert np.linalg.eigvalsh(matrix)[0] > -1e-12 * np.abs(matrix).max()


def test_en_qe_upper_bounds(scenario: ScenarioConfig):
    en, qe = en_qe_upper_bounds(np.array([1e-3, 2e-3]), np.array([1e-4, 0.0]), scenario)
    factor = scenario.num_aps * scenario.num_ues * scenario.p_max
    np.testing.assert_allclose(en, factor * np.array([1e-3, 2e-3]))
    np.testing.assert_allclose(qe, factor * np.array([1e-4, 0.0]))
    with pytest.raises(BrokenPsdInvariantError):
        en_qe_upper_bounds(np.array([1.0, -0.5]), np.zeros(2), scenario)


def test_stack_links_places_ap_blocks_side_by_side(channels: ChannelSet):
    stacked = stack_links(channels.h)
    for k in range(channels.num_ues):
        np.testing.assert_array_equal(stacked[k], channels.stacked(k))


def test_build_priors(priors: PriorSet, scenario: ScenarioConfig):
    assert priors.hbar.shape == (2, 2, 8)
    assert priors.r_jam.shape == (1, 2, 2, 2)
    assert priors.sigma_q2.shape == (2, 2)
    assert priors.alpha == 0.990503
    assert priors.num_jammers == 1
    np.testing.assert_array_equal(priors.link(1, 0), priors.hbar[0, :, 4:])
    assert np.all(priors.bound >= 0)
    assert priors.p_max == scenario.p_max


def test_lossless_priors_share_estimation_and_jamming_draws(
    channels: ChannelSet, scenario: ScenarioConfig, estimation: EstimationConfig
):
    quantized = build_priors(channels, scenario, estimation, np.random.default_rng(8))
    lossless = build_priors(
        channels,
        scenario,
        estimation.model_copy(update={"quant_bits": None}),
        np.random.default_rng(8),
    )
    np.testing.assert_array_equal(quantized.hhat, lossless.hhat)
    np.testing.assert_array_equal(quantized.r_jam, lossless.r_jam)
    np.testing.assert_array_equal(lossless.hbar, lossless.hhat)
    np.testing.assert_array_equal(lossless.qe_ub, np.zeros(2))
    assert lossless.alpha == 1.0


def test_quantize_then_estimate_needs_synthetic_mode(
    channels: ChannelSet, scenario: ScenarioConfig
):
    synthetic = EstimationConfig(
        n_stat=5, error_chain=ErrorChain.QUANTIZE_THEN_ESTIMATE
    )
    priors = build_priors(channels, scenario, synthetic, np.random.default_rng(1))
    assert priors.hbar.shape == (2, 2, 8)

    pilot = synthetic.model_copy(update={"mode": EstimationMode.PILOT_MMSE})
    with pytest.raises(InvalidScenarioError):
        build_priors(channels, scenario, pilot, np.random.default_rng(1))


def test_pilot_priors_build(channels: ChannelSet, scenario: ScenarioConfig):
    estimation = EstimationConfig(mode=EstimationMode.PILOT_MMSE, n_stat=5)
    priors = build_priors(channels, scenario, estimation, np.random.default_rng(3))
    assert np.all(priors.lambda_max_q >= 0)
    assert priors.error_cov[0].blocks is not None


def test_leakage_bounds_hold_by_monte_carlo(priors: PriorSet):
    rng = np.random.default_rng(21)
    f = random_precoders(rng, priors, fill=1.0)
    w = unit_combiners(rng, priors)
    en, qe = monte_carlo_en_qe(f, w, priors, rng, draws=300)
    assert np.all(en <= priors.en_ub)
    assert np.all(qe <= priors.qe_ub)


def test_expected_leakage_matches_monte_carlo(priors: PriorSet):
    rng = np.random.default_rng(22)
    f = random_precoders(rng, priors, fill=1.0)
    w = unit_combiners(rng, priors)
    cov = priors.error_cov[0]
    exact = cov.expected_leakage(w[0], f[1])
    samples = [
        np.abs(w[0].conj() @ cov.sample(rng) @ f[1]) ** 2 for _ in range(4000)
    ]
    assert np.mean(samples) == pytest.approx(exact, rel=0.1)

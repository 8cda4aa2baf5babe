import numpy as np
import pytest

from antijam.controllers.channel import (
    channel_covariance,
    channel_from_paths,
    facing_frame,
    generate_channels,
    generate_scenario,
    large_scale_gain,
    link_second_moment,
    redraw_paths,
    redraw_small_scale,
    steering_vector,
    synthesize_channel,
    virtual_angles,
)
from antijam.models.channel import ChannelSet, LinkGeometry, PathComponent
from antijam.models.scenario import ArrayGeometry, LargeScaleModel, ScenarioConfig
from antijam.schemas.error import InvalidPathCountError, InvalidVirtualAngleError


def test_steering_vector_unit_modulus(rng: np.random.Generator):
    geometry = ArrayGeometry.half_wavelength(12, 0.01)
    for mu, nu in rng.uniform(-1, 1, size=(100, 2)):
        a = steering_vector(geometry, mu, nu)
        assert a.shape == (12,)
        np.testing.assert_allclose(np.abs(a), 1.0)
        assert np.linalg.norm(a) == pytest.approx(np.sqrt(12))


def test_steering_vector_broadside_is_all_ones():
    geometry = ArrayGeometry.half_wavelength(16, 0.01)
    np.testing.assert_allclose(steering_vector(geometry, 0.0, 0.0), np.ones(16))


def test_steering_vector_is_horizontal_kron_vertical():
    geometry = ArrayGeometry.half_wavelength(8, 0.01)
    a = steering_vector(geometry, 0.3, -0.2)
    a_h = np.exp(1j * np.pi * np.arange(4) * 0.3)
    a_v = np.exp(1j * np.pi * np.arange(2) * -0.2)
    np.testing.assert_allclose(a, np.kron(a_h, a_v))


def test_steering_vector_rejects_out_of_range_angles():
    geometry = ArrayGeometry.half_wavelength(4, 0.01)
    with pytest.raises(InvalidVirtualAngleError):
        steering_vector(geometry, 1.5, 0.0)


def test_virtual_angles_of_boresight_and_side():
    frame = facing_frame(np.zeros(3), np.array([1.0, 0.0, 0.0]))
    assert virtual_angles(np.array([1.0, 0.0, 0.0]), frame) == pytest.approx((0.0, 0.0))
    mu, nu = virtual_angles(np.array([0.0, 0.0, 1.0]), frame)
    assert nu == pytest.approx(1.0)


def test_large_scale_gain_log_distance():
    config = ScenarioConfig(shadowing_std_db=0.0)
    rng = np.random.default_rng(0)
    assert large_scale_gain(10.0, config, rng) == pytest.approx(10 ** (-6.72))
    assert large_scale_gain(0.5, config, rng) == pytest.approx(10 ** (-3.05))


def test_large_scale_gain_free_space():
    config = ScenarioConfig(
        shadowing_std_db=0.0, large_scale_model=LargeScaleModel.FREE_SPACE
    )
    expected = (config.carrier_wavelength / (4 * np.pi * 100.0)) ** 2
    gain = large_scale_gain(100.0, config, np.random.default_rng(0))
    assert gain == pytest.approx(expected)


def test_generate_scenario_places_aps_on_one_face(scenario: ScenarioConfig):
    deployment = generate_scenario(scenario, np.random.default_rng(3))
    np.testing.assert_allclose(deployment.ap_positions[:, 0], 0.0)
    np.testing.assert_allclose(deployment.ap_positions[:, 2], scenario.region_side / 2)
    assert np.all(deployment.ue_positions >= 0)
    assert np.all(deployment.ue_positions <= scenario.region_side)
    assert len(deployment.jammer_frames) == scenario.num_jammers


def test_generate_channels_shapes(channels: ChannelSet, scenario: ScenarioConfig):
    assert channels.h.shape == (2, 2, 2, 4)
    assert channels.j.shape == (1, 2, 2, 4)
    assert channels.beta_h.shape == (2, 2)
    assert np.all(channels.beta_h > 0)
    assert len(channels.h_paths[0][0]) == scenario.ap_paths
    assert channels.stacked(1).shape == (2, 8)
    np.testing.assert_array_equal(channels.stacked(1)[:, 4:], channels.h[1, 1])


def test_generate_channels_is_deterministic(scenario: ScenarioConfig):
    first = generate_channels(scenario, np.random.default_rng(11))
    second = generate_channels(scenario, np.random.default_rng(11))
    np.testing.assert_array_equal(first.h, second.h)
    np.testing.assert_array_equal(first.j, second.j)


def test_channel_is_sum_of_path_outer_products(channels: ChannelSet):
    paths = channels.h_paths[1][0]
    rebuilt = channel_from_paths(paths, channels.ap_geometry, channels.ue_geometry)
    np.testing.assert_allclose(rebuilt, channels.h[1, 0])


def test_single_path_channel_has_rank_one(rng: np.random.Generator):
    geometry = ArrayGeometry.half_wavelength(4, 0.01)
    path = PathComponent(
        gain_small=0.3 - 0.4j, gain_large=2.0, mu_rx=0.1, nu_rx=0.2, mu_tx=-0.5, nu_tx=0.0
    )
    h = channel_from_paths([path], geometry, geometry)
    assert np.linalg.matrix_rank(h) == 1
    assert np.linalg.norm(h) ** 2 == pytest.approx(0.25 * 2.0 * 16)


def test_path_component_validates_angles():
    with pytest.raises(ValueError):
        PathComponent(1.0, 1.0, 1.2, 0.0, 0.0, 0.0)


def test_synthesize_channel_needs_a_path(channels: ChannelSet, rng: np.random.Generator):
    deployment = channels.deployment
    link = LinkGeometry(
        tx_position=deployment.ap_positions[0],
        tx_frame=deployment.ap_frames[0],
        rx_position=deployment.ue_positions[0],
        rx_frame=deployment.ue_frames[0],
        beta=1.0,
    )
    with pytest.raises(InvalidPathCountError):
        synthesize_channel(link, 0, channels.ap_geometry, channels.ue_geometry, rng)


def test_redraw_small_scale_keeps_statistics(channels: ChannelSet):
    redrawn = redraw_small_scale(channels, np.random.default_rng(99))
    np.testing.assert_array_equal(redrawn.beta_h, channels.beta_h)
    before, after = channels.h_paths[0][1], redrawn.h_paths[0][1]
    assert [p.mu_rx for p in before] == [p.mu_rx for p in after]
    assert [p.gain_large for p in before] == [p.gain_large for p in after]
    assert not np.allclose(redrawn.h, channels.h)
    assert redrawn.j.shape == channels.j.shape


def test_second_moment_matches_covariance_trace(channels: ChannelSet):
    paths = channels.h_paths[0][0]
    covariance = channel_covariance(paths, channels.ap_geometry, channels.ue_geometry)
    moment = link_second_moment(paths, channels.ap_geometry, channels.ue_geometry)
    assert np.real(np.trace(covariance)) == pytest.approx(moment)
    np.testing.assert_allclose(covariance, covariance.conj().T)
    assert np.linalg.eigvalsh(covariance)[0] > -1e-12 * moment


def test_second_moment_matches_monte_carlo(channels: ChannelSet):
    rng = np.random.default_rng(5)
    paths = channels.h_paths[0][1]
    moment = link_second_moment(paths, channels.ap_geometry, channels.ue_geometry)
    draws = [
        np.linalg.norm(
            channel_from_paths(
                redraw_paths(paths, rng), channels.ap_geometry, channels.ue_geometry
            )
        )
        ** 2
        for _ in range(4000)
    ]
    assert np.mean(draws) == pytest.approx(moment, rel=0.1)


def test_normalized_paths_divide_power(channels: ChannelSet):
    paths = channels.h_paths[0][0]
    plain = link_second_moment(paths, channels.ap_geometry, channels.ue_geometry)
    scaled = link_second_moment(
        paths, channels.ap_geometry, channels.ue_geometry, normalize=True
    )
    assert scaled == pytest.approx(plain / len(paths))

from dataclasses import replace

import numpy as np
from loguru import logger

from antijam.models.channel import (
    ArrayFrame,
    ChannelSet,
    Deployment,
    LinkGeometry,
    PathComponent,
)
from antijam.models.scenario import ArrayGeometry, LargeScaleModel, ScenarioConfig
from antijam.models.shared import circular_normal
from antijam.schemas.error import InvalidPathCountError, InvalidVirtualAngleError

AP_FRAME = ArrayFrame(
    normal=np.array([1.0, 0.0, 0.0]),
    horizontal=np.array([0.0, 1.0, 0.0]),
    vertical=np.array([0.0, 0.0, 1.0]),
)
UE_FRAME = ArrayFrame(
    normal=np.array([-1.0, 0.0, 0.0]),
    horizontal=np.array([0.0, -1.0, 0.0]),
    vertical=np.array([0.0, 0.0, 1.0]),
)


def steering_vector(geom: ArrayGeometry, mu: float, nu: float) -> np.ndarray:
    """
    Array response of a uniform planar array.

    Entry ``p * m_v + q`` carries the phase ramp of horizontal element ``p`` and
    vertical element ``q``.

    Args:
        geom (ArrayGeometry): Element counts, spacings and wavelength.
        mu (float): Horizontal virtual angle in [-1, 1].
        nu (float): Vertical virtual angle in [-1, 1].

    Returns:
        np.ndarray: Complex vector of length ``m_h * m_v`` with unit-modulus entries.

    Raises:
        InvalidVirtualAngleError: If either virtual angle leaves [-1, 1].
    """
    if abs(mu) > 1.0 or abs(nu) > 1.0:
        raise InvalidVirtualAngleError(mu, nu)
    a_h = np.exp(2j * np.pi * geom.d_h / geom.wavelength * np.arange(geom.m_h) * mu)
    a_v = np.exp(2j * np.pi * geom.d_v / geom.wavelength * np.arange(geom.m_v) * nu)
    return np.kron(a_h, a_v)


def facing_frame(position: np.ndarray, target: np.ndarray) -> ArrayFrame:
    """Frame of an array at ``position`` whose boresight points at ``target``."""
    normal = target - position
    norm = np.linalg.norm(normal)
    normal = AP_FRAME.normal if norm == 0 else normal / norm
    up = np.array([0.0, 0.0, 1.0])
    vertical = up - (up @ normal) * normal
    if np.linalg.norm(vertical) < 1e-12:
        vertical = np.array([1.0, 0.0, 0.0])
    vertical = vertical / np.linalg.norm(vertical)
    horizontal = np.cross(vertical, normal)
    return ArrayFrame(normal=normal, horizontal=horizontal, vertical=vertical)


def virtual_angles(
    direction: np.ndarray, frame: ArrayFrame, spread: tuple[float, float] = (0.0, 0.0)
) -> tuple[float, float]:
    """
    Converts a departure or arrival direction into ``(mu, nu)`` in the array frame.

    The azimuth and elevation offsets in ``spread`` (radians) are added before the
    conversion ``mu = sin(theta) sin(phi)``, ``nu = cos(theta)``.
    """
    unit = direction / np.linalg.norm(direction)
    theta = np.arccos(np.clip(unit @ frame.vertical, -1.0, 1.0)) + spread[1]
    phi = np.arctan2(unit @ frame.horizontal, unit @ frame.normal) + spread[0]
    mu = float(np.clip(np.sin(theta) * np.sin(phi), -1.0, 1.0))
    nu = float(np.clip(np.cos(theta), -1.0, 1.0))
    return mu, nu


def generate_scenario(config: ScenarioConfig, rng: np.random.Generator) -> Deployment:
    """
    Places APs, UEs and jammers in the cubic region.

    APs sit evenly spaced along ``y`` on the ``x = 0`` face at half height with
    their arrays in the yoz plane; UEs and jammers are uniform in the cube.
    """
    side = config.region_side
    ue_positions = rng.uniform(0.0, side, size=(config.num_ues, 3))
    jammer_positions = rng.uniform(0.0, side, size=(config.num_jammers, 3))
    ap_positions = np.zeros((config.num_aps, 3))
    ap_positions[:, 1] = side * (np.arange(config.num_aps) + 0.5) / config.num_aps
    ap_positions[:, 2] = side / 2
    centroid = np.full(3, side / 2)
    return Deployment(
        ap_positions=ap_positions,
        ue_positions=ue_positions,
        jammer_positions=jammer_positions,
        ap_frames=[AP_FRAME] * config.num_aps,
        ue_frames=[UE_FRAME] * config.num_ues,
        jammer_frames=[facing_frame(p, centroid) for p in jammer_positions],
    )


def large_scale_gain(
    distance: float, config: ScenarioConfig, rng: np.random.Generator
) -> float:
    """Linear large-scale gain of one link, shadowing included."""
    d = max(distance, 1.0)
    if config.large_scale_model == LargeScaleModel.FREE_SPACE:
        gain_db = 20 * np.log10(config.carrier_wavelength / (4 * np.pi * d))
    else:
        gain_db = config.path_loss_intercept_db - config.path_loss_exponent_db * np.log10(d)
    gain_db += rng.normal(0.0, config.shadowing_std_db)
    return float(10 ** (gain_db / 10))


def channel_from_paths(
    paths: list[PathComponent],
    geom_tx: ArrayGeometry,
    geom_rx: ArrayGeometry,
    normalize: bool = False,
) -> np.ndarray:
    h = np.zeros((geom_rx.size, geom_tx.size), dtype=complex)
    for path in paths:
        a_rx = steering_vector(geom_rx, path.mu_rx, path.nu_rx)
        a_tx = steering_vector(geom_tx, path.mu_tx, path.nu_tx)
        h += path.gain_small * np.sqrt(path.gain_large) * np.outer(a_rx, a_tx.conj())
    if normalize:
        h /= np.sqrt(len(paths))
    return h


def synthesize_channel(
    link: LinkGeometry,
    paths: int,
    geom_tx: ArrayGeometry,
    geom_rx: ArrayGeometry,
    rng: np.random.Generator,
    spread_deg: float = 5.0,
    normalize: bool = False,
) -> tuple[np.ndarray, list[PathComponent]]:
    """
    Draws one geometric multipath channel ``H = sum_p alpha_p sqrt(beta_p) a_rx a_tx^H``.

    Every path departs and arrives around the line-of-sight direction with
    independent uniform azimuth and elevation offsets of at most ``spread_deg``.
    All paths of a link share the link's large-scale gain.

    Args:
        link (LinkGeometry): End points, array frames and large-scale gain.
        paths (int): Number of propagation paths.
        geom_tx (ArrayGeometry): Transmit array.
        geom_rx (ArrayGeometry): Receive array.
        rng (np.random.Generator): Source of small-scale fading and angle spread.
        spread_deg (float): Half width of the angle spread in degrees.
        normalize (bool): Divide the sum by ``sqrt(paths)``.

    Returns:
        tuple[np.ndarray, list[PathComponent]]: The ``N_rx x N_tx`` matrix and its paths.

    Raises:
        InvalidPathCountError: If ``paths`` is smaller than one.
    """
    if paths < 1:
        raise InvalidPathCountError(paths)
    spread = np.deg2rad(spread_deg)
    towards_rx = link.rx_position - link.tx_position
    components = []
    for _ in range(paths):
        d_phi_rx, d_theta_rx, d_phi_tx, d_theta_tx = rng.uniform(-spread, spread, 4)
        mu_rx, nu_rx = virtual_angles(-towards_rx, link.rx_frame, (d_phi_rx, d_theta_rx))
        mu_tx, nu_tx = virtual_angles(towards_rx, link.tx_frame, (d_phi_tx, d_theta_tx))
        components.append(
            PathComponent(
                gain_small=complex(circular_normal(rng)),
                gain_large=link.beta,
                mu_rx=mu_rx,
                nu_rx=nu_rx,
                mu_tx=mu_tx,
                nu_tx=nu_tx,
            )
        )
    return channel_from_paths(components, geom_tx, geom_rx, normalize), components


def generate_channels(config: ScenarioConfig, rng: np.random.Generator) -> ChannelSet:
    """
    Builds every AP-to-UE and jammer-to-UE channel of one deployment.

    Args:
        config (ScenarioConfig): The deployment to simulate.
        rng (np.random.Generator): Owned by the caller; consumed in a fixed order.

    Returns:
        ChannelSet: True channels together with their path statistics.
    """
    deployment = generate_scenario(config, rng)
    geom_ap, geom_ue, geom_jam = (
        config.ap_geometry,
        config.ue_geometry,
        config.jammer_geometry,
    )
    L, K, G = config.num_aps, config.num_ues, config.num_jammers

    h = np.zeros((L, K, geom_ue.size, geom_ap.size), dtype=complex)
    beta_h = np.zeros((L, K))
    h_paths: list[list[list[PathComponent]]] = [[[] for _ in range(K)] for _ in range(L)]
    for l in range(L):
        for k in range(K):
            link = _link(deployment, config, rng, l, k, jammer=False)
            beta_h[l, k] = link.beta
            h[l, k], h_paths[l][k] = synthesize_channel(
                link,
                config.ap_paths,
                geom_ap,
                geom_ue,
                rng,
                config.angle_spread_deg,
                config.normalize_paths,
            )

    j = np.zeros((G, K, geom_ue.size, geom_jam.size), dtype=complex)
    beta_j = np.zeros((G, K))
    j_paths: list[list[list[PathComponent]]] = [[[] for _ in range(K)] for _ in range(G)]
    for g in range(G):
        for k in range(K):
            link = _link(deployment, config, rng, g, k, jammer=True)
            beta_j[g, k] = link.beta
            j[g, k], j_paths[g][k] = synthesize_channel(
                link,
                config.jammer_paths,
                geom_jam,
                geom_ue,
                rng,
                config.angle_spread_deg,
                config.normalize_paths,
            )

    logger.debug(
        f"Generated channels for L={L}, K={K}, G={G} "
        f"(mean AP link gain {10 * np.log10(beta_h.mean()):.1f} dB)"
    )
    return ChannelSet(
        h=h,
        j=j,
        h_paths=h_paths,
        j_paths=j_paths,
        beta_h=beta_h,
        beta_j=beta_j,
        ap_geometry=geom_ap,
        ue_geometry=geom_ue,
        jammer_geometry=geom_jam,
        normalize_paths=config.normalize_paths,
        deployment=deployment,
    )


def redraw_paths(
    paths: list[PathComponent], rng: np.random.Generator
) -> list[PathComponent]:
    """New small-scale gains, same angles and large-scale gains."""
    return [replace(path, gain_small=complex(circular_normal(rng))) for path in paths]


def redraw_links(
    grid: list[list[list[PathComponent]]],
    geom_tx: ArrayGeometry,
    geom_rx: ArrayGeometry,
    rng: np.random.Generator,
    normalize: bool = False,
) -> tuple[np.ndarray, list[list[list[PathComponent]]]]:
    new_grid = [[redraw_paths(paths, rng) for paths in row] for row in grid]
    rows, cols = len(grid), len(grid[0]) if grid else 0
    matrices = np.zeros((rows, cols, geom_rx.size, geom_tx.size), dtype=complex)
    for a, row in enumerate(new_grid):
        for b, paths in enumerate(row):
            matrices[a, b] = channel_from_paths(paths, geom_tx, geom_rx, normalize)
    return matrices, new_grid


def redraw_small_scale(channels: ChannelSet, rng: np.random.Generator) -> ChannelSet:
    """Re-samples only the small-scale fading of every link."""
    h, h_paths = redraw_links(
        channels.h_paths,
        channels.ap_geometry,
        channels.ue_geometry,
        rng,
        channels.normalize_paths,
    )
    if channels.num_jammers:
        j, j_paths = redraw_links(
            channels.j_paths,
            channels.jammer_geometry,
            channels.ue_geometry,
            rng,
            channels.normalize_paths,
        )
    else:
        j, j_paths = channels.j.copy(), []
    return replace(channels, h=h, j=j, h_paths=h_paths, j_paths=j_paths)


def link_second_moment(
    paths: list[PathComponent],
    geom_tx: ArrayGeometry,
    geom_rx: ArrayGeometry,
    normalize: bool = False,
) -> float:
    """Closed-form ``E ||H||_F^2`` over the small-scale fading of a link."""
    total = sum(path.gain_large for path in paths) * geom_tx.size * geom_rx.size
    return total / len(paths) if normalize else total


def channel_covariance(
    paths: list[PathComponent],
    geom_tx: ArrayGeometry,
    geom_rx: ArrayGeometry,
    normalize: bool = False,
) -> np.ndarray:
    """
    Covariance of the column-major ``vec(H)`` of a link, ``U diag(beta) U^H``.

    Column ``p`` of ``U`` is ``vec(a_rx a_tx^H) = conj(a_tx) kron a_rx``.
    """
    columns = [
        np.kron(
            steering_vector(geom_tx, p.mu_tx, p.nu_tx).conj(),
            steering_vector(geom_rx, p.mu_rx, p.nu_rx),
        )
        for p in paths
    ]
    u = np.stack(columns, axis=1)
    betas = np.array([p.gain_large for p in paths])
    if normalize:
        betas = betas / len(paths)
    return (u * betas) @ u.conj().T


def _link(
    deployment: Deployment,
    config: ScenarioConfig,
    rng: np.random.Generator,
    tx: int,
    k: int,
    jammer: bool,
) -> LinkGeometry:
    if jammer:
        position, frame = deployment.jammer_positions[tx], deployment.jammer_frames[tx]
    else:
        position, frame = deployment.ap_positions[tx], deployment.ap_frames[tx]
    rx_position = deployment.ue_positions[k]
    distance = float(np.linalg.norm(rx_position - position))
    return LinkGeometry(
        tx_position=position,
        tx_frame=frame,
        rx_position=rx_position,
        rx_frame=deployment.ue_frames[k],
        beta=large_scale_gain(distance, config, rng),
    )

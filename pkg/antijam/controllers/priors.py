from dataclasses import dataclass, replace

import numpy as np
from loguru import logger
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from antijam.controllers.channel import (
    channel_covariance,
    link_second_moment,
    redraw_links,
)
from antijam.models.channel import ChannelSet
from antijam.models.estimation import (
    QUANTIZATION_ALPHA,
    ErrorChain,
    EstimationConfig,
    EstimationMode,
)
from antijam.models.priors import ChannelEstimate, ErrorCovariance, PriorSet
from antijam.models.scenario import ScenarioConfig
from antijam.models.shared import circular_normal
from antijam.schemas.error import (
    BrokenPsdInvariantError,
    InvalidScenarioError,
    SingularCovarianceError,
    UnsupportedQuantizationBitsError,
)

PSD_TOLERANCE = 1e-10


def psd_repair(
    matrix: np.ndarray, label: str, reference: float | None = None
) -> np.ndarray:
    """
    Returns the Hermitian part of ``matrix`` with round-off negative eigenvalues removed.

    Eigenvalues above ``-1e-10 * reference`` are clipped to zero; anything more
    negative means the matrix was never PSD. ``reference`` defaults to the largest
    eigenvalue.

    Raises:
        BrokenPsdInvariantError: If an eigenvalue is negative beyond the tolerance.
    """
    hermitian = (matrix + matrix.conj().T) / 2
    eigenvalues, vectors = np.linalg.eigh(hermitian)
    scale = max(float(eigenvalues[-1]), 0.0) if reference is None else reference
    if eigenvalues[0] >= 0:
        return hermitian
    if eigenvalues[0] < -PSD_TOLERANCE * scale:
        raise BrokenPsdInvariantError(label, float(eigenvalues[0]), float(eigenvalues[-1]))
    clipped = np.clip(eigenvalues, 0.0, None)
    return (vectors * clipped) @ vectors.conj().T


def pilot_selection(
    ue_antennas: int, num_ues: int, estimation: EstimationConfig
) -> np.ndarray:
    """
    Pilot precoder ``F_k``: the first columns of the identity.

    As many columns as orthogonal pilots allow, ``tau_p // K``, capped by the array
    size and by ``pilot_columns``.
    """
    columns = min(
        ue_antennas,
        estimation.tau_p // num_ues,
        estimation.pilot_columns or ue_antennas,
    )
    if columns < 1:
        raise InvalidScenarioError(
            f"pilot mode needs tau_p >= K orthogonal pilots, got tau_p="
            f"{estimation.tau_p} for K={num_ues}"
        )
    return np.eye(ue_antennas)[:, :columns]


@dataclass
class LinkEstimator:
    """
    Linear MMSE estimator of ``vec(H)`` for one link.

    The observation is ``y = tau_p Ftilde h + n`` with ``n ~ CN(0, tau_p sigma2 I)``,
    so the estimate is ``R Ftilde^H Psi^{-1} y`` with
    ``Psi = tau_p Ftilde R Ftilde^H + sigma2 I``.
    """

    covariance: np.ndarray
    observation: np.ndarray
    tau_p: int
    sigma2: float
    link: tuple[int, int] = (0, 0)

    def __post_init__(self):
        f_t, r = self.observation, self.covariance
        psi = self.tau_p * f_t @ r @ f_t.conj().T + self.sigma2 * np.eye(f_t.shape[0])
        try:
            factor = cho_factor(psi)
        except LinAlgError:
            raise SingularCovarianceError(self.link, float(np.linalg.cond(psi)))
        self.filter = cho_solve(factor, f_t @ r).conj().T

    @property
    def estimate_covariance(self) -> np.ndarray:
        return self.tau_p * self.filter @ self.observation @ self.covariance

    @property
    def error_covariance(self) -> np.ndarray:
        return psd_repair(
            self.covariance - self.estimate_covariance,
            f"error covariance of link {self.link}",
            reference=float(np.linalg.eigvalsh(self.covariance)[-1]),
        )

    def observe(self, h_vec: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        noise = np.sqrt(self.tau_p * self.sigma2) * circular_normal(
            rng, self.observation.shape[0]
        )
        return self.tau_p * self.observation @ h_vec + noise

    def estimate(self, y: np.ndarray) -> np.ndarray:
        return self.filter @ y


def mmse_estimate(
    channels: ChannelSet,
    estimation: EstimationConfig,
    sigma2: float,
    rng: np.random.Generator,
) -> ChannelEstimate:
    """
    Pilot-based MMSE estimation of every AP-to-UE link.

    Args:
        channels (ChannelSet): True channels and their path statistics.
        estimation (EstimationConfig): Pilot length and column selection.
        sigma2 (float): Receiver noise power.
        rng (np.random.Generator): Source of the pilot observation noise.

    Returns:
        ChannelEstimate: Estimates, estimate covariances and block-diagonal ``Q_k``.
    """
    L, K = channels.num_aps, channels.num_ues
    m_u, m = channels.ue_antennas, channels.ap_antennas
    selection = pilot_selection(m_u, K, estimation)
    observation = np.kron(np.eye(m), selection.T)

    hhat = np.zeros_like(channels.h)
    estimate_cov: list[list[np.ndarray]] = [[] for _ in range(L)]
    error_blocks: list[list[np.ndarray]] = [[] for _ in range(K)]
    for l in range(L):
        for k in range(K):
            estimator = LinkEstimator(
                covariance=channel_covariance(
                    channels.h_paths[l][k],
                    channels.ap_geometry,
                    channels.ue_geometry,
                    channels.normalize_paths,
                ),
                observation=observation,
                tau_p=estimation.tau_p,
                sigma2=sigma2,
                link=(l, k),
            )
            y = estimator.observe(channels.h[l, k].reshape(-1, order="F"), rng)
            hhat[l, k] = estimator.estimate(y).reshape((m_u, m), order="F")
            estimate_cov[l].append(estimator.estimate_covariance)
            error_blocks[k].append(estimator.error_covariance)

    error_cov = [
        ErrorCovariance(num_aps=L, ue_antennas=m_u, ap_antennas=m, blocks=blocks)
        for blocks in error_blocks
    ]
    return ChannelEstimate(hhat=hhat, error_cov=error_cov, estimate_cov=estimate_cov)


def synthetic_error(
    channels: ChannelSet, nmse_target: float, rng: np.random.Generator
) -> ChannelEstimate:
    """
    Injects i.i.d. Gaussian estimation error at a prescribed NMSE.

    The per-entry variance of UE ``k`` is ``nmse * E||H_k||^2 / (L M M_U)``, so
    ``Q_k`` is that variance times the identity.
    """
    L, K = channels.num_aps, channels.num_ues
    m_u, m = channels.ue_antennas, channels.ap_antennas
    hhat = np.zeros_like(channels.h)
    error_cov = []
    for k in range(K):
        expected = sum(
            link_second_moment(
                channels.h_paths[l][k],
                channels.ap_geometry,
                channels.ue_geometry,
                channels.normalize_paths,
            )
            for l in range(L)
        )
        variance = nmse_target * expected / (L * m * m_u)
        for l in range(L):
            error = np.sqrt(variance) * circular_normal(rng, m_u, m)
            hhat[l, k] = channels.h[l, k] - error
        error_cov.append(
            ErrorCovariance(num_aps=L, ue_antennas=m_u, ap_antennas=m, scale=variance)
        )
    return ChannelEstimate(hhat=hhat, error_cov=error_cov)


def pilot_overlap(num_ues: int, tau_p: int) -> np.ndarray:
    """``|phi_k^H phi_j|^2`` for unit-norm pilots assigned round-robin."""
    index = np.arange(num_ues) % tau_p
    return (index[:, None] == index[None, :]).astype(float)


def quantization_variance(
    alpha: float, beta: np.ndarray, estimation: EstimationConfig
) -> np.ndarray:
    """
    Fronthaul quantization variance per link, shape ``(L, K)``.

    Pilot interference enters through the round-robin pilot overlap; with
    ``tau_p >= K`` the pilots are orthogonal and the interference sum vanishes.
    """
    power = estimation.tau_p * estimation.rho_p
    overlap = pilot_overlap(beta.shape[1], estimation.tau_p)
    np.fill_diagonal(overlap, 0.0)
    interference = power * beta @ overlap.T
    return alpha * (1 - alpha) * power * beta**2 / (interference + 1)


def quantize_channel(
    estimate: np.ndarray,
    quant_bits: int | None,
    beta: np.ndarray,
    estimation: EstimationConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Applies the fronthaul distortion model ``Hbar = alpha Hhat + Sigma``.

    Args:
        estimate (np.ndarray): Per-link estimates, shape ``(L, K, M_U, M)``.
        quant_bits (int | None): Bits per sample, ``None`` for a lossless fronthaul.
        beta (np.ndarray): Large-scale gains, shape ``(L, K)``.
        estimation (EstimationConfig): Pilot length and power.
        rng (np.random.Generator): Source of the quantization noise.

    Returns:
        tuple[np.ndarray, np.ndarray]: Quantized channels and ``sigma_q2`` per link.

    Raises:
        UnsupportedQuantizationBitsError: If ``quant_bits`` has no tabulated alpha.
    """
    if quant_bits is None:
        return estimate.copy(), np.zeros(beta.shape)
    if quant_bits not in QUANTIZATION_ALPHA:
        raise UnsupportedQuantizationBitsError(quant_bits)
    alpha = QUANTIZATION_ALPHA[quant_bits]
    sigma_q2 = quantization_variance(alpha, beta, estimation)
    noise = circular_normal(rng, *estimate.shape)
    hbar = alpha * estimate + np.sqrt(sigma_q2)[:, :, None, None] * noise
    return hbar, sigma_q2


def mrt_jamming_covariance(realizations: np.ndarray) -> np.ndarray:
    """
    Sample average of ``J w_J w_J^H J^H`` where each jammer beamforms along the
    dominant right singular vector of its own realization.

    Args:
        realizations (np.ndarray): Jammer channels, shape ``(N, M_U, M_J)``.
    """
    u, s, _ = np.linalg.svd(realizations)
    dominant = u[:, :, 0] * s[:, 0, None]
    covariance = np.einsum("ni,nj->ij", dominant, dominant.conj()) / len(realizations)
    return (covariance + covariance.conj().T) / 2


def jammer_covariance(
    channels: ChannelSet, n_stat: int, rng: np.random.Generator
) -> np.ndarray:
    """
    Jamming covariances ``R_{g,k}`` from ``n_stat`` small-scale redraws at fixed geometry.

    Returns:
        np.ndarray: Shape ``(G, K, M_U, M_U)``.
    """
    G, K, m_u = channels.num_jammers, channels.num_ues, channels.ue_antennas
    if G == 0:
        return np.zeros((0, K, m_u, m_u), dtype=complex)
    draws = np.zeros((n_stat, G, K, m_u, channels.jammer_geometry.size), dtype=complex)
    for n in range(n_stat):
        draws[n], _ = redraw_links(
            channels.j_paths,
            channels.jammer_geometry,
            channels.ue_geometry,
            rng,
            channels.normalize_paths,
        )
    r_jam = np.zeros((G, K, m_u, m_u), dtype=complex)
    for g in range(G):
        for k in range(K):
            r_jam[g, k] = mrt_jamming_covariance(draws[:, g, k])
    return r_jam


def en_qe_upper_bounds(
    lambda_max_q: np.ndarray, omega: np.ndarray, config: ScenarioConfig
) -> tuple[np.ndarray, np.ndarray]:
    """
    Deterministic bounds on the estimation and quantization error leakage.

    ``EN^UB = L K P_max lambda_max(Q_k)`` and ``QE^UB = L K P_max omega_k``.

    Raises:
        BrokenPsdInvariantError: If some ``lambda_max(Q_k)`` is negative beyond round-off.
    """
    lambda_max_q = np.asarray(lambda_max_q, dtype=float)
    scale = float(np.abs(lambda_max_q).max(initial=0.0))
    for k, value in enumerate(lambda_max_q):
        if value < -PSD_TOLERANCE * scale:
            raise BrokenPsdInvariantError(f"Q_{k}", float(value), scale)
    factor = config.num_aps * config.num_ues * config.p_max
    return factor * np.clip(lambda_max_q, 0.0, None), factor * np.asarray(omega)


def build_priors(
    channels: ChannelSet,
    scenario: ScenarioConfig,
    estimation: EstimationConfig,
    rng: np.random.Generator,
) -> PriorSet:
    """
    Composes estimation, fronthaul quantization, jammer statistics and the leakage
    bounds into the prior set the optimizers consume.

    ``rng`` is split into independent streams for estimation, quantization and
    jammer statistics, so switching quantization off leaves the other draws intact.

    Args:
        channels (ChannelSet): True channels of the deployment.
        scenario (ScenarioConfig): Dimensions and power budget.
        estimation (EstimationConfig): Estimation mode, quantization and ordering.
        rng (np.random.Generator): Trial-owned generator.

    Returns:
        PriorSet: Read-only statistics shared by every scheme of a trial.
    """
    est_rng, quant_rng, jam_rng = rng.spawn(3)
    beta = channels.beta_h

    if estimation.error_chain == ErrorChain.QUANTIZE_THEN_ESTIMATE:
        if estimation.mode == EstimationMode.PILOT_MMSE:
            raise InvalidScenarioError(
                "quantize-then-estimate is only defined for synthetic estimation"
            )
        quantized, sigma_q2 = quantize_channel(
            channels.h, estimation.quant_bits, beta, estimation, quant_rng
        )
        # error scale follows the unquantized channel second moment
        estimate = synthetic_error(
            replace(channels, h=quantized), estimation.nmse_target, est_rng
        )
        hbar = estimate.hhat
    else:
        if estimation.mode == EstimationMode.PILOT_MMSE:
            estimate = mmse_estimate(channels, estimation, scenario.sigma2, est_rng)
        else:
            estimate = synthetic_error(channels, estimation.nmse_target, est_rng)
        hbar, sigma_q2 = quantize_channel(
            estimate.hhat, estimation.quant_bits, beta, estimation, quant_rng
        )

    lambda_max_q = np.array([cov.lambda_max for cov in estimate.error_cov])
    en_ub, qe_ub = en_qe_upper_bounds(lambda_max_q, sigma_q2.max(axis=0), scenario)
    r_jam = jammer_covariance(channels, estimation.n_stat, jam_rng)

    logger.debug(
        f"Priors built with alpha={estimation.alpha}, mode={estimation.mode.value}, "
        f"max EN bound {en_ub.max():.3e}, max QE bound {qe_ub.max():.3e}"
    )
    return PriorSet(
        hbar=stack_links(hbar),
        error_cov=estimate.error_cov,
        sigma_q2=sigma_q2,
        r_jam=r_jam,
        alpha=estimation.alpha,
        en_ub=en_ub,
        qe_ub=qe_ub,
        num_aps=scenario.num_aps,
        p_max=scenario.p_max,
        sigma2=scenario.sigma2,
        hhat=stack_links(estimate.hhat),
    )


def stack_links(per_link: np.ndarray) -> np.ndarray:
    """``(L, K, M_U, M)`` to ``(K, M_U, L*M)`` with AP blocks side by side."""
    L, K, m_u, m = per_link.shape
    return per_link.transpose(1, 2, 0, 3).reshape(K, m_u, L * m)


def monte_carlo_en_qe(
    f: np.ndarray,
    w: np.ndarray,
    priors: PriorSet,
    rng: np.random.Generator,
    draws: int = 1000,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Sample averages of the estimation-error and quantization-error leakage
    ``sum_j E|w_k^H X_k f_j|^2`` for given beamformers.

    Args:
        f (np.ndarray): Transmit vectors, shape ``(K, L*M)``.
        w (np.ndarray): Receive vectors, shape ``(K, M_U)``.
        priors (PriorSet): Error statistics.
        rng (np.random.Generator): Source of the error draws.
        draws (int): Number of realizations.

    Returns:
        tuple[np.ndarray, np.ndarray]: Per-UE averages of the two leakage terms.
    """
    K, m_u, m = priors.num_ues, priors.ue_antennas, priors.ap_antennas
    en = np.zeros(K)
    qe = np.zeros(K)
    q_std = np.repeat(np.sqrt(priors.sigma_q2), m, axis=0)
    for _ in range(draws):
        for k in range(K):
            error = priors.error_cov[k].sample(rng)
            en[k] += np.sum(np.abs(w[k].conj() @ error @ f.T) ** 2)
            distortion = q_std[:, k] * circular_normal(rng, m_u, priors.hbar.shape[2])
            qe[k] += np.sum(np.abs(w[k].conj() @ distortion @ f.T) ** 2)
    return en / draws, qe / draws

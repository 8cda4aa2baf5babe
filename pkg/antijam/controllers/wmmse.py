import numpy as np
from loguru import logger
from scipy.linalg import solve

from antijam.controllers.hybrid import AlternatingOptimizer, StepOutcome
from antijam.controllers.receive import fix_phase, jamming_matrices, link_gains
from antijam.controllers.transmit import (
    effective_gains,
    project_power,
    sinr_lb,
    softmax_eta,
    zeta,
)
from antijam.models.beamforming import AoResult, HybridSet, WmmseState
from antijam.models.optimizer import AoConfig, WmmseConfig
from antijam.models.priors import PriorSet
from antijam.models.scenario import ScenarioConfig
from antijam.schemas.error import BracketFailureError, NumericalBreachError

NULL_TOL = 1e-12


def effective_noise(priors: PriorSet) -> np.ndarray:
    """``sigma2 + EN^UB + QE^UB`` per UE."""
    return priors.sigma2 + priors.bound


def mse_covariance(
    f: np.ndarray, priors: PriorSet, q: float | np.ndarray
) -> np.ndarray:
    """Received covariance ``J_k`` with jamming and bound terms, ``(K, M_U, M_U)``."""
    gains = link_gains(priors, f)
    grams = np.einsum("kju,kjv->kuv", gains, gains.conj())
    eye = np.eye(priors.ue_antennas)
    noise = effective_noise(priors)[:, None, None] * eye
    return grams + jamming_matrices(priors, q) + noise


def wmmse_receiver(
    f: np.ndarray, priors: PriorSet, q: float | np.ndarray
) -> np.ndarray:
    """
    MMSE combiners ``w_k = J_k^{-1} Hbar_k f_k``.

    Args:
        f (np.ndarray): Transmit vectors, shape ``(K, L*M)``.
        priors (PriorSet): Channel statistics.
        q (float | np.ndarray): Jamming power.

    Returns:
        np.ndarray: Unnormalized combiners, shape ``(K, M_U)``.
    """
    covariance = mse_covariance(f, priors, q)
    desired = np.einsum("kul,kl->ku", priors.hbar, f)
    return np.stack(
        [solve(covariance[k], desired[k], assume_a="pos") for k in range(len(f))]
    )


def wmmse_mse(
    w: np.ndarray, f: np.ndarray, priors: PriorSet, q: float | np.ndarray
) -> np.ndarray:
    """Mean squared error of every UE's symbol estimate for arbitrary combiners."""
    gains = effective_gains(f, w, priors)
    power = np.abs(gains) ** 2
    return power.sum(axis=1) - 2 * np.real(np.diag(gains)) + 1 + zeta(w, priors, q)


def minimum_mse(f: np.ndarray, priors: PriorSet, q: float | np.ndarray) -> np.ndarray:
    """``1 - b_k^H J_k^{-1} b_k``, the MSE reached by the MMSE combiner."""
    covariance = mse_covariance(f, priors, q)
    desired = np.einsum("kul,kl->ku", priors.hbar, f)
    explained = [
        np.real(desired[k].conj() @ solve(covariance[k], desired[k], assume_a="pos"))
        for k in range(len(f))
    ]
    return 1 - np.array(explained)


def wmmse_weight(mse: np.ndarray) -> np.ndarray:
    """
    Optimal MSE weights ``W_k = 1 / E_k``.

    Raises:
        NumericalBreachError: If some ``E_k`` is not strictly positive.
    """
    mse = np.asarray(mse, dtype=float)
    bad = ~np.isfinite(mse) | (mse <= 0)
    if np.any(bad):
        raise NumericalBreachError("MSE", float(mse[bad][0]))
    return 1 / mse


def wmmse_objective(mse: np.ndarray, weights: np.ndarray) -> float:
    """``sum_k W_k E_k - log W_k``; non-increasing under the block updates."""
    return float(np.sum(weights * mse - np.log(weights)))


def _power_constrained_solve(
    gram: np.ndarray, rhs: np.ndarray, p_max: float, config: WmmseConfig
) -> tuple[np.ndarray, float]:
    # Solves (gram + lam I) x_k = rhs_k for all k with sum_k ||x_k||^2 <= p_max.
    eigenvalues, vectors = np.linalg.eigh(gram)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    coefficients = rhs @ vectors.conj()
    weight = np.sum(np.abs(coefficients) ** 2, axis=0)
    # rhs lies in the range of gram; null-space weight is round-off
    singular = eigenvalues <= NULL_TOL * max(eigenvalues[-1], 0.0)
    noise = singular & (weight <= NULL_TOL * weight.max())
    coefficients[:, noise] = 0.0
    weight[noise] = 0.0

    def power(lam: float) -> float:
        denom = eigenvalues + lam
        if np.any((denom <= 0) & (weight > 0)):
            return np.inf
        ratio = np.divide(weight, denom**2, where=weight > 0, out=np.zeros_like(weight))
        return float(np.sum(ratio))

    def solution(lam: float) -> np.ndarray:
        denom = eigenvalues + lam
        scaled = np.divide(
            coefficients, denom, where=denom > 0, out=np.zeros_like(coefficients)
        )
        return scaled @ vectors.T

    if not np.any(singular & (weight > 0)) and power(0.0) <= p_max:
        return solution(0.0), 0.0

    low = 0.0
    high = float(np.sqrt(weight.sum() / p_max))
    if high == 0:
        return np.zeros_like(rhs), 0.0
    for _ in range(config.max_expansions):
        if power(high) <= p_max:
            break
        low, high = high, 2 * high
    else:
        raise BracketFailureError("power multiplier", low, high)

    for _ in range(config.max_bisections):
        if high - low <= config.lambda_rel_tol * high:
            break
        mid = (low + high) / 2
        if power(mid) > p_max:
            low = mid
        else:
            high = mid
    return solution(high), high


def wmmse_precoder(
    w: np.ndarray,
    weights: np.ndarray,
    priors: PriorSet,
    f_prev: np.ndarray,
    config: WmmseConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Weighted-MMSE precoders by exact block minimization, one AP at a time.

    The block of AP ``l`` solves
    ``(sum_j W_j a_lj a_lj^H + lambda_l I) f_lk = W_k a_lk - sum_j W_j a_lj c_jk``
    where ``a_lj = Hbar_lj^H w_j`` and ``c_jk`` is the contribution of the other APs
    to ``w_j^H Hbar_j f_k``. Updated blocks are used immediately by the next AP.
    ``lambda_l`` is zero when the unconstrained block fits the budget and is found
    by bisection otherwise.

    Args:
        w (np.ndarray): Combiners, shape ``(K, M_U)``.
        weights (np.ndarray): MSE weights, shape ``(K,)``.
        priors (PriorSet): Channel statistics.
        f_prev (np.ndarray): Current precoders, shape ``(K, L*M)``.
        config (WmmseConfig): Bisection settings.

    Returns:
        tuple[np.ndarray, np.ndarray]: New precoders and the multipliers ``lambda_l``.

    Raises:
        BracketFailureError: If no multiplier satisfying the budget is bracketed.
    """
    K, L = priors.num_ues, priors.num_aps
    a = np.einsum("kul,ku->kl", priors.hbar.conj(), w).reshape(K, L, -1)
    f = f_prev.reshape(K, L, -1).copy()
    lam = np.zeros(L)
    for l in range(L):
        a_l = a[:, l]
        gram = (a_l.T * weights) @ a_l.conj()
        others = np.einsum("jim,kim->jk", a.conj(), f) - a_l.conj() @ f[:, l].T
        rhs = weights[:, None] * a_l - np.einsum("j,jm,jk->km", weights, a_l, others)
        f[:, l], lam[l] = _power_constrained_solve(gram, rhs, priors.p_max, config)
    return f.reshape(K, -1), lam


def wmmse_solve(
    f0: np.ndarray, priors: PriorSet, q: float | np.ndarray, config: WmmseConfig
) -> WmmseState:
    """
    Alternates receiver, weight and precoder updates until the weighted MSE
    objective changes by less than ``config.tol``.
    """
    f = project_power(f0, priors.num_aps, priors.p_max)
    w = wmmse_receiver(f, priors, q)
    weights = wmmse_weight(wmmse_mse(w, f, priors, q))
    trace: list[float] = []
    lam = np.zeros(priors.num_aps)
    iterations = 0
    for iterations in range(1, config.max_inner + 1):
        f, lam = wmmse_precoder(w, weights, priors, f, config)
        trace.append(wmmse_objective(wmmse_mse(w, f, priors, q), weights))
        if len(trace) > 1 and abs(trace[-2] - trace[-1]) < config.tol:
            break
        w = wmmse_receiver(f, priors, q)
        weights = wmmse_weight(wmmse_mse(w, f, priors, q))

    w = wmmse_receiver(f, priors, q)
    mse = wmmse_mse(w, f, priors, q)
    return WmmseState(
        w=w,
        weights=wmmse_weight(mse),
        f=f,
        lam=lam,
        mse=mse,
        objective_trace=trace,
        iterations=iterations,
    )


def wmmse_ao(
    scenario: ScenarioConfig,
    priors: PriorSet,
    config: AoConfig,
    wmmse: WmmseConfig,
) -> AoResult:
    """
    Jamming-aware WMMSE baseline inside the same alternation, factorization and
    jamming power search as the proposed scheme.

    Both beamforming updates of an alternation are replaced by a WMMSE solve at the
    incumbent ``q``; the resulting combiners are normalized before factorization.
    """
    optimizer = AlternatingOptimizer(scenario, priors, config)

    def step(hybrid: HybridSet, f_fd: np.ndarray, q: float) -> StepOutcome:
        state = wmmse_solve(f_fd, priors, q, wmmse)
        norms = np.linalg.norm(state.w, axis=1, keepdims=True)
        unit = state.w / np.where(norms > 0, norms, 1)
        w_fd = np.stack([fix_phase(v) for v in unit])
        w_rf, w_bb = optimizer.factorize_receive(w_fd)
        eta = softmax_eta(sinr_lb(state.f, w_fd, priors, q), config.pga.delta)
        logger.debug(
            f"WMMSE converged in {state.iterations} iterations, "
            f"objective {state.objective_trace[-1]:.6f}"
        )
        return StepOutcome(w_fd=w_fd, w_rf=w_rf, w_bb=w_bb, f_fd=state.f, eta=eta)

    return optimizer.run(step, label="wmmse")

import numpy as np
from loguru import logger
from scipy.special import softmax

from antijam.controllers.receive import fix_phase, jamming_matrices
from antijam.models.beamforming import TxState
from antijam.models.optimizer import PgaConfig
from antijam.models.priors import PriorSet


def effective_gains(f: np.ndarray, w: np.ndarray, priors: PriorSet) -> np.ndarray:
    """``w_k^H Hbar_k f_j`` indexed ``[k, j]``."""
    return np.einsum("ku,kul,jl->kj", w.conj(), priors.hbar, f)


def zeta(w: np.ndarray, priors: PriorSet, q: float | np.ndarray) -> np.ndarray:
    """Per-UE denominator terms that do not depend on the transmit vectors."""
    jamming = np.real(
        np.einsum("ku,kuv,kv->k", w.conj(), jamming_matrices(priors, q), w)
    )
    return jamming + (priors.bound + priors.sigma2) * np.sum(np.abs(w) ** 2, axis=1)


def sinr_lb(
    f: np.ndarray, w: np.ndarray, priors: PriorSet, q: float | np.ndarray
) -> np.ndarray:
    """
    SINR lower bound of every UE.

    Args:
        f (np.ndarray): Transmit vectors, shape ``(K, L*M)``.
        w (np.ndarray): Receive vectors, shape ``(K, M_U)``.
        priors (PriorSet): Channel statistics.
        q (float | np.ndarray): Jamming power.

    Returns:
        np.ndarray: ``xi_k`` per UE.
    """
    power = np.abs(effective_gains(f, w, priors)) ** 2
    signal = np.diag(power)
    return signal / (power.sum(axis=1) - signal + zeta(w, priors, q))


def softmax_eta(xi: np.ndarray, delta: float) -> float:
    """Softmax-weighted average of ``xi``; tends to ``min(xi)`` as ``delta -> -inf``."""
    xi = np.asarray(xi, dtype=float)
    return float(softmax(delta * xi) @ xi)


def eta_gradient(
    f: np.ndarray,
    w: np.ndarray,
    priors: PriorSet,
    q: float | np.ndarray,
    delta: float,
) -> np.ndarray:
    """
    Gradient of the softmax surrogate with respect to every transmit vector.

    The returned ``g`` satisfies ``eta(f + eps u) - eta(f) = 2 eps Re<g, u>`` to
    first order for real ``eps``.

    Args:
        f (np.ndarray): Transmit vectors, shape ``(K, L*M)``.
        w (np.ndarray): Receive vectors, shape ``(K, M_U)``.
        priors (PriorSet): Channel statistics.
        q (float | np.ndarray): Jamming power.
        delta (float): Softmax sharpness, negative.

    Returns:
        np.ndarray: Shape ``(K, L*M)``.
    """
    gains = effective_gains(f, w, priors)
    power = np.abs(gains) ** 2
    signal = np.diag(power)
    denom = power.sum(axis=1) - signal + zeta(w, priors, q)
    xi = signal / denom

    weights = softmax(delta * xi)
    eta = weights @ xi
    d_eta = weights * (1 + delta * (xi - eta))

    # coef[kt, k] multiplies a_kt in the gradient of xi_kt with respect to f_k
    coef = -(signal / denom**2)[:, None] * gains
    np.fill_diagonal(coef, np.diag(gains) / denom)
    coef *= d_eta[:, None]
    a = np.einsum("kul,ku->kl", priors.hbar.conj(), w)
    return coef.T @ a


def per_ap_power(f: np.ndarray, num_aps: int) -> np.ndarray:
    K = f.shape[0]
    return np.sum(np.abs(f.reshape(K, num_aps, -1)) ** 2, axis=(0, 2))


def project_power(f: np.ndarray, num_aps: int, p_max: float) -> np.ndarray:
    """
    Scales the blocks of every AP whose total power exceeds ``p_max`` back onto
    the budget; compliant APs are left untouched.
    """
    K = f.shape[0]
    blocks = f.reshape(K, num_aps, -1)
    power = np.sum(np.abs(blocks) ** 2, axis=(0, 2))
    scale = np.ones(num_aps)
    over = power > p_max
    scale[over] = np.sqrt(p_max / power[over])
    return (blocks * scale[None, :, None]).reshape(f.shape)


def dominant_combiners(priors: PriorSet) -> np.ndarray:
    """Dominant left singular vector of each ``Hbar_k``."""
    u, _, _ = np.linalg.svd(priors.hbar, full_matrices=False)
    return np.stack([fix_phase(vector) for vector in u[:, :, 0]])


def mrt_initialization(priors: PriorSet, w: np.ndarray, p_max: float) -> np.ndarray:
    """
    Maximum-ratio start: every AP steers ``Hbar_{l,k}^H w_k`` to UE ``k`` with an
    equal share ``p_max / K`` of its budget.
    """
    K, L = priors.num_ues, priors.num_aps
    a = np.einsum("kul,ku->kl", priors.hbar.conj(), w).reshape(K, L, -1)
    norms = np.linalg.norm(a, axis=2, keepdims=True)
    f = np.divide(a, norms, out=np.zeros_like(a), where=norms > 0)
    f *= np.sqrt(p_max / K)
    return project_power(f.reshape(K, -1), L, p_max)


def pga_solve(
    f0: np.ndarray,
    w: np.ndarray,
    priors: PriorSet,
    q: float | np.ndarray,
    config: PgaConfig,
) -> TxState:
    """
    Projected gradient ascent on the softmax surrogate with Armijo backtracking.

    The first trial step of every iteration is ``armijo_init * ||f|| / ||g||``.
    A step is accepted only if it satisfies the sufficient increase condition,
    so the surrogate never decreases. When no acceptable step is found within
    ``max_backtracks`` the current iterate is returned with ``stalled`` set.

    Args:
        f0 (np.ndarray): Power-feasible start, shape ``(K, L*M)``.
        w (np.ndarray): Fixed receive vectors, shape ``(K, M_U)``.
        priors (PriorSet): Channel statistics.
        q (float | np.ndarray): Jamming power.
        config (PgaConfig): Sharpness, iteration budget and line-search parameters.

    Returns:
        TxState: Final transmit vectors, their SINR bounds and the surrogate trace.
    """
    L, p_max = priors.num_aps, priors.p_max
    f = project_power(f0, L, p_max)
    xi = sinr_lb(f, w, priors, q)
    eta = softmax_eta(xi, config.delta)
    trace = [eta]
    stalled = False
    iterations = 0

    while iterations < config.max_iters:
        g = eta_gradient(f, w, priors, q, config.delta)
        g_norm = np.linalg.norm(g)
        if g_norm == 0 or not np.isfinite(g_norm):
            break
        f_norm = np.linalg.norm(f)
        step = config.armijo_init * (f_norm or np.sqrt(L * p_max)) / g_norm

        for _ in range(config.max_backtracks):
            candidate = project_power(f + step * g, L, p_max)
            cand_xi = sinr_lb(candidate, w, priors, q)
            cand_eta = softmax_eta(cand_xi, config.delta)
            increase = 2 * np.real(np.vdot(g, candidate - f))
            if cand_eta >= eta + config.armijo_c * increase and cand_eta >= eta:
                break
            step *= config.armijo_shrink
        else:
            stalled = True
            logger.debug(f"PGA line search stalled after {iterations} iterations")
            break

        iterations += 1
        change = cand_eta - eta
        f, xi, eta = candidate, cand_xi, cand_eta
        trace.append(eta)
        if abs(change) < config.tol_eta:
            break

    return TxState(
        f=f,
        zeta=zeta(w, priors, q),
        xi=xi,
        eta=eta,
        eta_trace=trace,
        iterations=iterations,
        stalled=stalled,
    )

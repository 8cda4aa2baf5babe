import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from antijam.models.beamforming import GrqOperands
from antijam.models.priors import PriorSet
from antijam.schemas.error import (
    InvalidScenarioError,
    NonFiniteInputError,
    SingularOperandError,
)

JITTER = 1e-12


def jamming_powers(q: float | np.ndarray, priors: PriorSet) -> np.ndarray:
    """Broadcasts a scalar or per-(g, k) jamming power to shape ``(G, K)``."""
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise NonFiniteInputError("jamming power")
    if np.any(q < 0):
        raise InvalidScenarioError("jamming powers must be nonnegative")
    return np.broadcast_to(q, (priors.num_jammers, priors.num_ues))


def jamming_matrices(priors: PriorSet, q: float | np.ndarray) -> np.ndarray:
    """``sum_g q_{g,k} R_{g,k}`` per UE, shape ``(K, M_U, M_U)``."""
    return np.einsum("gk,gkij->kij", jamming_powers(q, priors), priors.r_jam)


def link_gains(priors: PriorSet, f: np.ndarray) -> np.ndarray:
    """``Hbar_k f_j`` for every pair, shape ``(K, K, M_U)`` indexed ``[k, j]``."""
    return np.einsum("kul,jl->kju", priors.hbar, f)


def build_grq_operands(
    priors: PriorSet, f: np.ndarray, q: float | np.ndarray
) -> list[GrqOperands]:
    """
    Builds the receive quotient of every UE for fixed transmit beamformers.

    ``a_k = Hbar_k f_k`` and ``B_k`` collects multiuser interference, jamming,
    the leakage bounds and the receiver noise.

    Args:
        priors (PriorSet): Channel statistics.
        f (np.ndarray): Full-digital transmit vectors, shape ``(K, L*M)``.
        q (float | np.ndarray): Jamming power, scalar or per ``(g, k)``.

    Returns:
        list[GrqOperands]: One entry per UE.

    Raises:
        NonFiniteInputError: If ``f`` or ``q`` carries NaN or infinity.
    """
    if not np.all(np.isfinite(f)):
        raise NonFiniteInputError("transmit beamformers")
    gains = link_gains(priors, f)
    jamming = jamming_matrices(priors, q)
    floor = priors.bound + priors.sigma2
    eye = np.eye(priors.ue_antennas)

    operands = []
    for k in range(priors.num_ues):
        others = np.delete(gains[k], k, axis=0)
        b = others.T @ others.conj() + jamming[k] + floor[k] * eye
        operands.append(GrqOperands(a=gains[k, k].copy(), b=(b + b.conj().T) / 2))
    return operands


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotates ``v`` so that its largest-magnitude entry is real and nonnegative."""
    pivot = v[np.argmax(np.abs(v))]
    if pivot == 0:
        return v
    return v * np.exp(-1j * np.angle(pivot))


def xi_of(w: np.ndarray, ops: GrqOperands) -> float:
    return float(np.abs(w.conj() @ ops.a) ** 2 / np.real(w.conj() @ ops.b @ w))


def grq_receiver(ops: GrqOperands, ue: int = 0) -> tuple[np.ndarray, float]:
    """
    Maximizes ``w^H A w / w^H B w`` over unit vectors.

    ``A`` has rank one, so the maximizer is ``B^{-1} a`` up to scaling.

    Args:
        ops (GrqOperands): The quotient of one UE.
        ue (int): Index used in diagnostics.

    Returns:
        tuple[np.ndarray, float]: The unit-norm combiner and its quotient value.

    Raises:
        SingularOperandError: If ``B`` cannot be factorized even after jitter.
    """
    b = ops.b
    try:
        factor = cho_factor(b)
    except LinAlgError:
        jitter = JITTER * np.real(np.trace(b)) / len(b)
        try:
            factor = cho_factor(b + jitter * np.eye(len(b)))
        except LinAlgError:
            raise SingularOperandError(ue)
    x = cho_solve(factor, ops.a)
    norm = np.linalg.norm(x)
    if norm == 0:
        w = np.zeros(len(b), dtype=complex)
        w[0] = 1.0
        return w, 0.0
    w = fix_phase(x / norm)
    return w, xi_of(w, ops)


def receive_beamformers(
    priors: PriorSet, f: np.ndarray, q: float | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Full-digital combiners ``(K, M_U)`` and their SINR lower bounds."""
    operands = build_grq_operands(priors, f, q)
    results = [grq_receiver(ops, ue) for ue, ops in enumerate(operands)]
    w = np.stack([result[0] for result in results])
    xi = np.array([result[1] for result in results])
    return w, xi

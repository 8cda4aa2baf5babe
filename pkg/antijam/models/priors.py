from dataclasses import dataclass
from functools import cached_property

import numpy as np

from antijam.models.shared import circular_normal


@dataclass
class ErrorCovariance:
    """
    Estimation error covariance ``Q_k`` of one UE.

    ``Q_k`` is block diagonal with one block per AP, each acting on the column-major
    vectorization of the ``M_U x M`` error matrix of that link. Pilot estimation
    fills ``blocks`` with dense matrices; synthetic injection leaves it empty and
    describes ``Q_k = scale * I``.
    """

    num_aps: int
    ue_antennas: int
    ap_antennas: int
    blocks: list[np.ndarray] | None = None
    scale: float = 0.0

    @property
    def block_dim(self) -> int:
        return self.ue_antennas * self.ap_antennas

    @property
    def lambda_max(self) -> float:
        if self.blocks is None:
            return float(self.scale)
        return max(float(np.linalg.eigvalsh(block)[-1]) for block in self.blocks)

    def dense(self) -> np.ndarray:
        dim = self.block_dim
        full = np.zeros((self.num_aps * dim, self.num_aps * dim), dtype=complex)
        for l in range(self.num_aps):
            sl = slice(l * dim, (l + 1) * dim)
            full[sl, sl] = self._block(l)
        return full

    def spectrum(self) -> list[np.ndarray]:
        """Eigenvalues of each AP block, ascending."""
        if self.blocks is None:
            return [np.full(self.block_dim, self.scale) for _ in range(self.num_aps)]
        return [np.linalg.eigvalsh(block) for block in self.blocks]

    def expected_leakage(self, w: np.ndarray, f: np.ndarray) -> float:
        """
        Returns ``E|w^H Htilde_k f|^2`` for a stacked transmit vector ``f`` of length ``L*M``.
        """
        total = 0.0
        for l in range(self.num_aps):
            f_l = f[l * self.ap_antennas : (l + 1) * self.ap_antennas]
            s = np.kron(f_l, w.conj())
            total += float(np.real(s @ self._block(l) @ s.conj()))
        return total

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Draws one error realization as an ``M_U x (L*M)`` matrix."""
        shape = (self.ue_antennas, self.ap_antennas)
        parts = []
        for l in range(self.num_aps):
            z = circular_normal(rng, self.block_dim)
            if self.blocks is None:
                x = np.sqrt(self.scale) * z
            else:
                x = self._factors[l] @ z
            parts.append(x.reshape(shape, order="F"))
        return np.concatenate(parts, axis=1)

    @cached_property
    def _factors(self) -> list[np.ndarray]:
        factors = []
        for block in self.blocks or []:
            eigenvalues, vectors = np.linalg.eigh(block)
            factors.append(vectors * np.sqrt(np.clip(eigenvalues, 0.0, None)))
        return factors

    def _block(self, l: int) -> np.ndarray:
        if self.blocks is None:
            return self.scale * np.eye(self.block_dim)
        return self.blocks[l]


@dataclass
class PriorSet:
    """
    What the central processor knows about the channels of one deployment.

    Attributes:
        hbar: Quantized estimates stacked per UE, shape ``(K, M_U, L*M)``.
        error_cov: One :class:`ErrorCovariance` per UE.
        sigma_q2: Quantization variance per link, shape ``(L, K)``.
        r_jam: Jamming covariances, shape ``(G, K, M_U, M_U)``.
        alpha: Fronthaul distortion factor applied to the estimates.
        en_ub: Estimation-error leakage bound per UE.
        qe_ub: Quantization-error leakage bound per UE.
        num_aps: Number of APs ``L``.
        p_max: Per-AP power budget in watts.
        sigma2: Receiver noise power in watts.
        hhat: Unquantized estimates, same layout as ``hbar``.
    """

    hbar: np.ndarray
    error_cov: list[ErrorCovariance]
    sigma_q2: np.ndarray
    r_jam: np.ndarray
    alpha: float
    en_ub: np.ndarray
    qe_ub: np.ndarray
    num_aps: int
    p_max: float
    sigma2: float
    hhat: np.ndarray | None = None

    @property
    def num_ues(self) -> int:
        return self.hbar.shape[0]

    @property
    def ue_antennas(self) -> int:
        return self.hbar.shape[1]

    @property
    def ap_antennas(self) -> int:
        return self.hbar.shape[2] // self.num_aps

    @property
    def num_jammers(self) -> int:
        return self.r_jam.shape[0]

    @property
    def lambda_max_q(self) -> np.ndarray:
        return np.array([cov.lambda_max for cov in self.error_cov])

    @property
    def omega(self) -> np.ndarray:
        return self.sigma_q2.max(axis=0)

    @property
    def bound(self) -> np.ndarray:
        """``EN^UB + QE^UB`` per UE."""
        return self.en_ub + self.qe_ub

    def link(self, l: int, k: int) -> np.ndarray:
        m = self.ap_antennas
        return self.hbar[k, :, l * m : (l + 1) * m]


@dataclass
class ChannelEstimate:
    """
    Per-link channel estimates ``hhat[l, k]`` and the matching error covariances.

    ``estimate_cov`` holds the covariance of each estimate when it was obtained
    from pilots; synthetic injection leaves it empty.
    """

    hhat: np.ndarray
    error_cov: list[ErrorCovariance]
    estimate_cov: list[list[np.ndarray]] | None = None

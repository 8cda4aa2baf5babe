from dataclasses import dataclass
from time import perf_counter
from typing import Callable

import numpy as np
from loguru import logger

from antijam.controllers.receive import receive_beamformers
from antijam.controllers.transmit import (
    dominant_combiners,
    effective_gains,
    mrt_initialization,
    pga_solve,
    sinr_lb,
)
from antijam.models.beamforming import (
    AoRecord,
    AoResult,
    AOTrace,
    HybridSet,
    QSearchResult,
)
from antijam.models.optimizer import AoConfig, FactorizationConfig, SearchConfig
from antijam.models.priors import PriorSet
from antijam.models.scenario import ScenarioConfig
from antijam.schemas.error import AlternationFailureError, BaseError


def dft_columns(n: int, count: int) -> np.ndarray:
    return np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(count)) / n)


def _double_phase(
    target: np.ndarray, n_rf: int
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    # x = (m / 2) (e^{j(phase + s)} + e^{j(phase - s)}) with cos(s) = |x| / m
    n, streams = target.shape
    analog = dft_columns(n, n_rf)
    digital = np.zeros((n_rf, streams), dtype=complex)
    for i in range(streams):
        column = target[:, i]
        peak = np.abs(column).max()
        if peak == 0:
            continue
        phase = np.angle(column)
        spread = np.arccos(np.clip(np.abs(column) / peak, 0.0, 1.0))
        analog[:, 2 * i] = np.exp(1j * (phase + spread))
        analog[:, 2 * i + 1] = np.exp(1j * (phase - spread))
        digital[2 * i : 2 * i + 2, i] = peak / 2
    residual = float(np.linalg.norm(target - analog @ digital) ** 2)
    return analog, digital, [residual]


def factorize_matrix(
    target: np.ndarray, n_rf: int, config: FactorizationConfig
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """
    Approximates ``target`` by ``analog @ digital`` with a unit-modulus ``analog``.

    With at least two RF chains per column the factorization is exact: every
    entry is written as a sum of two unit-modulus terms. Otherwise analog and
    digital parts are alternated: the digital part is the least-squares fit and
    the analog part is the phase of the least-squares analog update, accepted
    only when it lowers the residual.

    Args:
        target (np.ndarray): Shape ``(n, s)``.
        n_rf (int): Number of RF chains, at most ``n``.
        config (FactorizationConfig): Alternation budget and tolerance.

    Returns:
        tuple[np.ndarray, np.ndarray, list[float]]: ``analog (n, n_rf)``,
        ``digital (n_rf, s)`` and the non-increasing squared residual history.
    """
    n, streams = target.shape
    if n_rf >= 2 * streams:
        return _double_phase(target, n_rf)

    u, _, _ = np.linalg.svd(target, full_matrices=False)
    analog = dft_columns(n, n_rf)
    lead = min(n_rf, u.shape[1])
    analog[:, :lead] = np.exp(1j * np.angle(u[:, :lead]))
    digital = np.linalg.pinv(analog) @ target
    residual = float(np.linalg.norm(target - analog @ digital) ** 2)
    residuals = [residual]

    for _ in range(config.max_alternations):
        candidate = np.exp(1j * np.angle(target @ np.linalg.pinv(digital)))
        cand_digital = np.linalg.pinv(candidate) @ target
        cand_residual = float(np.linalg.norm(target - candidate @ cand_digital) ** 2)
        if cand_residual >= residual:
            break
        improvement = residual - cand_residual
        analog, digital, residual = candidate, cand_digital, cand_residual
        residuals.append(residual)
        if improvement <= config.tol * residuals[0]:
            break
    return analog, digital, residuals


def factorize_precoder(
    f: np.ndarray,
    num_aps: int,
    n_rf: int,
    p_max: float,
    config: FactorizationConfig,
) -> tuple[np.ndarray, np.ndarray, list[list[float]]]:
    """
    Splits full-digital precoders into a block-diagonal analog part and digital
    precoders, one block per AP.

    Args:
        f (np.ndarray): Full-digital transmit vectors, shape ``(K, L*M)``.
        num_aps (int): Number of APs ``L``.
        n_rf (int): RF chains per AP.
        p_max (float): Per-AP power budget re-imposed on the hybrid result.
        config (FactorizationConfig): Alternation budget and tolerance.

    Returns:
        tuple: ``f_rf (L, M, N_RF)``, ``f_bb (K, L*N_RF)`` and the residual history
        of every AP.
    """
    K = f.shape[0]
    blocks = f.reshape(K, num_aps, -1)
    m = blocks.shape[2]
    f_rf = np.zeros((num_aps, m, n_rf), dtype=complex)
    f_bb = np.zeros((K, num_aps * n_rf), dtype=complex)
    histories = []
    for l in range(num_aps):
        analog, digital, residuals = factorize_matrix(blocks[:, l].T, n_rf, config)
        power = np.linalg.norm(analog @ digital) ** 2
        if power > p_max:
            digital *= np.sqrt(p_max / power)
        f_rf[l] = analog
        f_bb[:, l * n_rf : (l + 1) * n_rf] = digital.T
        histories.append(residuals)
    return f_rf, f_bb, histories


def factorize_combiner(
    w: np.ndarray, m_rf: int, config: FactorizationConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Hybrid combiner ``(W_RF, w_BB)`` of one UE with ``||W_RF w_BB|| = 1``."""
    analog, digital, _ = factorize_matrix(w[:, None], m_rf, config)
    w_bb = digital[:, 0]
    norm = np.linalg.norm(analog @ w_bb)
    if norm == 0:
        w_bb = np.zeros(m_rf, dtype=complex)
        w_bb[0] = 1.0
        norm = np.linalg.norm(analog[:, 0])
    return analog, w_bb / norm


def factorize_combiners(
    w: np.ndarray, m_rf: int, config: FactorizationConfig
) -> tuple[np.ndarray, np.ndarray]:
    parts = [factorize_combiner(vector, m_rf, config) for vector in w]
    return np.stack([p[0] for p in parts]), np.stack([p[1] for p in parts])


def hybrid_effective(hybrid: HybridSet) -> tuple[np.ndarray, np.ndarray]:
    """Full-digital equivalents ``(F_RF f_BB,k, W_RF,k w_BB,k)`` of a hybrid set."""
    return hybrid.precoders(), hybrid.combiners()


def max_resistible_q(
    f: np.ndarray,
    w: np.ndarray,
    priors: PriorSet,
    gamma_th: float,
    config: SearchConfig,
) -> QSearchResult:
    """
    Largest common jamming power keeping every UE's SINR bound above ``gamma_th``.

    All ``q_{g,k}`` are tied to one scalar. Jamming only enters the denominators,
    so the minimum SINR bound is non-increasing in ``q`` and bisection applies.
    The bracket starts at ``q_hi_factor * p_max`` and grows tenfold while still
    feasible.

    Args:
        f (np.ndarray): Transmit vectors, shape ``(K, L*M)``.
        w (np.ndarray): Receive vectors, shape ``(K, M_U)``.
        priors (PriorSet): Channel statistics.
        gamma_th (float): Linear SINR threshold.
        config (SearchConfig): Bracket and tolerance settings.

    Returns:
        QSearchResult: ``q`` with ``infeasible`` set when even ``q = 0`` misses the
        threshold and ``unbounded`` set when jamming cannot reach any UE.
    """
    power = np.abs(effective_gains(f, w, priors)) ** 2
    signal = np.diag(power)
    base = power.sum(axis=1) - signal + (priors.bound + priors.sigma2) * np.sum(
        np.abs(w) ** 2, axis=1
    )
    load = np.real(np.einsum("ku,gkuv,kv->k", w.conj(), priors.r_jam, w))
    evaluations = 0

    def min_xi(q: float) -> float:
        nonlocal evaluations
        evaluations += 1
        return float(np.min(signal / (base + q * load)))

    at_zero = min_xi(0.0)
    if at_zero < gamma_th:
        return QSearchResult(
            q=0.0, min_xi=at_zero, infeasible=True, evaluations=evaluations
        )

    q_hi = config.q_hi_factor * priors.p_max
    if priors.num_jammers == 0 or np.all(load <= 0):
        return QSearchResult(
            q=q_hi, min_xi=at_zero, unbounded=True, evaluations=evaluations
        )

    for _ in range(config.max_expansions):
        if min_xi(q_hi) < gamma_th:
            break
        q_hi *= 10
    else:
        if min_xi(q_hi) >= gamma_th:
            return QSearchResult(
                q=q_hi, min_xi=min_xi(q_hi), unbounded=True, evaluations=evaluations
            )

    low, high = 0.0, q_hi
    for _ in range(config.max_bisections):
        if high - low <= config.rel_tol * low:
            break
        mid = (low + high) / 2
        if min_xi(mid) >= gamma_th:
            low = mid
        else:
            high = mid
    return QSearchResult(q=low, min_xi=min_xi(low), evaluations=evaluations)


def factorization_gap(
    f_fd: np.ndarray,
    w_fd: np.ndarray,
    f_hybrid: np.ndarray,
    w_hybrid: np.ndarray,
    priors: PriorSet,
    q: float,
) -> float:
    """Minimum SINR bound lost by the hybrid approximation (may be negative)."""
    full = np.min(sinr_lb(f_fd, w_fd, priors, q))
    hybrid = np.min(sinr_lb(f_hybrid, w_hybrid, priors, q))
    return float(full - hybrid)


@dataclass
class StepOutcome:
    w_fd: np.ndarray
    w_rf: np.ndarray
    w_bb: np.ndarray
    f_fd: np.ndarray
    eta: float


BeamformStep = Callable[[HybridSet, np.ndarray, float], StepOutcome]


class AlternatingOptimizer:
    """
    Alternates beamforming updates with hybrid factorization and the jamming power
    search.

    A beamforming step receives the incumbent hybrid set, the incumbent
    full-digital precoders and the incumbent ``q``; it returns new combiners and
    full-digital precoders. The optimizer factorizes the precoders, searches the
    resistible ``q`` and keeps the candidate only if ``q`` did not drop.
    """

    def __init__(self, scenario: ScenarioConfig, priors: PriorSet, config: AoConfig):
        """
        Args:
            scenario: Dimensions, RF chains, power budget and threshold.
            priors: Statistics shared by all alternations.
            config: Alternation count, stopping tolerance and solver settings.
        """
        self.scenario = scenario
        self.priors = priors
        self.config = config

    @property
    def kappa(self) -> float:
        return self.config.kappa_factor * self.scenario.p_max

    def factorize_receive(self, w_fd: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return factorize_combiners(
            w_fd, self.scenario.ue_rf_chains, self.config.factorization
        )

    def initial_state(self) -> tuple[HybridSet, np.ndarray]:
        w_rf, w_bb = self.factorize_receive(dominant_combiners(self.priors))
        w = np.einsum("kur,kr->ku", w_rf, w_bb)
        f_fd = mrt_initialization(self.priors, w, self.scenario.p_max)
        f_rf, f_bb, _ = factorize_precoder(
            f_fd,
            self.scenario.num_aps,
            self.scenario.ap_rf_chains,
            self.scenario.p_max,
            self.config.factorization,
        )
        return HybridSet(f_rf=f_rf, f_bb=f_bb, w_rf=w_rf, w_bb=w_bb), f_fd

    def run(self, step: BeamformStep, label: str = "ao") -> AoResult:
        """
        Runs up to ``config.alternations`` alternations of ``step``.

        Stops early once ``q`` grows by at most ``kappa`` between two successive
        alternations; the first alternation is never compared.

        Raises:
            AlternationFailureError: If a sub-operation fails; carries the index.
        """
        hybrid, f_fd = self.initial_state()
        incumbent: QSearchResult | None = None
        previous_q: float | None = None
        trace = AOTrace()

        for t in range(1, self.config.alternations + 1):
            started = perf_counter()
            q = incumbent.q if incumbent is not None else 0.0
            try:
                outcome = step(hybrid, f_fd, q)
                f_rf, f_bb, _ = factorize_precoder(
                    outcome.f_fd,
                    self.scenario.num_aps,
                    self.scenario.ap_rf_chains,
                    self.scenario.p_max,
                    self.config.factorization,
                )
                candidate = HybridSet(
                    f_rf=f_rf, f_bb=f_bb, w_rf=outcome.w_rf, w_bb=outcome.w_bb
                )
                f_h, w_h = hybrid_effective(candidate)
                search = max_resistible_q(
                    f_h, w_h, self.priors, self.scenario.gamma_th, self.config.search
                )
            except BaseError as error:
                raise AlternationFailureError(t, error) from error

            gap = factorization_gap(
                outcome.f_fd, outcome.w_fd, f_h, w_h, self.priors, search.q
            )
            kept = incumbent is not None and search.q < incumbent.q
            if not kept:
                hybrid, f_fd, incumbent = candidate, outcome.f_fd, search
            assert incumbent is not None

            trace.append(
                AoRecord(
                    alternation=t,
                    q_watts=incumbent.q,
                    min_xi=incumbent.min_xi,
                    eta=outcome.eta,
                    seconds=perf_counter() - started,
                    factorization_gap=gap,
                    kept_incumbent=kept,
                )
            )
            logger.bind(alternation=t, scheme=label).debug(
                f"{label} alternation {t}: q={incumbent.q:.4e} W, "
                f"min xi={incumbent.min_xi:.4e}, gap={gap:.3e}"
                + (" (incumbent kept)" if kept else "")
            )
            if previous_q is not None and incumbent.q - previous_q <= self.kappa:
                break
            previous_q = incumbent.q

        assert incumbent is not None
        f_h, w_h = hybrid_effective(hybrid)
        return AoResult(
            hybrid=hybrid,
            trace=trace,
            search=incumbent,
            xi=sinr_lb(f_h, w_h, self.priors, incumbent.q),
        )

    def ajhbf_step(self, hybrid: HybridSet, f_fd: np.ndarray, q: float) -> StepOutcome:
        """Quotient-optimal combiners for the hybrid precoders, then PGA."""
        w_fd, _ = receive_beamformers(self.priors, hybrid.precoders(), q)
        w_rf, w_bb = self.factorize_receive(w_fd)
        w_h = np.einsum("kur,kr->ku", w_rf, w_bb)
        tx = pga_solve(f_fd, w_h, self.priors, q, self.config.pga)
        return StepOutcome(w_fd=w_fd, w_rf=w_rf, w_bb=w_bb, f_fd=tx.f, eta=tx.eta)


def ao_ajhbf(scenario: ScenarioConfig, priors: PriorSet, config: AoConfig) -> AoResult:
    """
    Anti-jamming hybrid beamforming by alternating optimization.

    Args:
        scenario (ScenarioConfig): Dimensions, RF chains, power budget and threshold.
        priors (PriorSet): Channel statistics of the trial.
        config (AoConfig): Alternations, ``kappa`` and solver settings.

    Returns:
        AoResult: Hybrid beamformers, the per-alternation trace and the final ``q``.
    """
    optimizer = AlternatingOptimizer(scenario, priors, config)
    return optimizer.run(optimizer.ajhbf_step, label="ao-ajhbf")

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.linalg import block_diag

AO_TRACE_COLUMNS = ["alternation", "q_watts", "min_xi", "eta", "seconds"]


@dataclass
class GrqOperands:
    """``A = a a^H`` and ``B`` of the receive quotient of one UE."""

    a: np.ndarray
    b: np.ndarray

    @property
    def A(self) -> np.ndarray:
        return np.outer(self.a, self.a.conj())


@dataclass
class TxState:
    f: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    eta: float
    eta_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    stalled: bool = False


@dataclass
class HybridSet:
    """
    Hybrid transmit and receive beamformers.

    ``f_rf`` holds the L diagonal blocks of the analog precoder, shape ``(L, M, N_RF)``;
    ``f_bb`` the digital precoders, shape ``(K, L*N_RF)``. ``w_rf`` and ``w_bb`` are
    the per-UE analog ``(K, M_U, M_RF)`` and digital ``(K, M_RF)`` combiners.
    """

    f_rf: np.ndarray
    f_bb: np.ndarray
    w_rf: np.ndarray
    w_bb: np.ndarray

    @property
    def analog_precoder(self) -> np.ndarray:
        return block_diag(*self.f_rf)

    def precoders(self) -> np.ndarray:
        """Effective transmit vectors ``F_RF f_BB,k`` stacked as ``(K, L*M)``."""
        return self.f_bb @ self.analog_precoder.T

    def combiners(self) -> np.ndarray:
        """Effective receive vectors ``W_RF,k w_BB,k`` stacked as ``(K, M_U)``."""
        return np.einsum("kur,kr->ku", self.w_rf, self.w_bb)


@dataclass
class QSearchResult:
    q: float
    min_xi: float
    infeasible: bool = False
    unbounded: bool = False
    evaluations: int = 0


@dataclass
class AoRecord:
    alternation: int
    q_watts: float
    min_xi: float
    eta: float
    seconds: float
    factorization_gap: float = 0.0
    kept_incumbent: bool = False


@dataclass
class AOTrace:
    records: list[AoRecord] = field(default_factory=list)

    @property
    def q(self) -> list[float]:
        return [record.q_watts for record in self.records]

    def append(self, record: AoRecord) -> None:
        self.records.append(record)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [[getattr(r, column) for column in AO_TRACE_COLUMNS] for r in self.records],
            columns=AO_TRACE_COLUMNS,
        )

    def to_csv(self, path: Path) -> None:
        self.to_frame().to_csv(path, index=False)


@dataclass
class AoResult:
    hybrid: HybridSet
    trace: AOTrace
    search: QSearchResult
    xi: np.ndarray

    @property
    def q(self) -> float:
        return self.search.q


@dataclass
class WmmseState:
    w: np.ndarray
    weights: np.ndarray
    f: np.ndarray
    lam: np.ndarray
    mse: np.ndarray
    objective_trace: list[float] = field(default_factory=list)
    iterations: int = 0

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from antijam.controllers.transmit import zeta
from antijam.models.priors import PriorSet
from antijam.services.matrix_io import MatrixDocument, read_document, write_document

CONSTRAINTS = [
    "variables: U_k Hermitian PSD of size N = L*M, one per UE",
    "maximize eps subject to, for every k:",
    "  tr(C_k U_k) >= eps * (sum_{j != k} tr(C_k U_j) + zeta_k)",
    "  eps >= gamma_th",
    "and for every AP l: sum_k tr(S_l U_k) <= P_max",
]


@dataclass
class SdrInstance:
    """
    Semidefinite relaxation of the transmit problem for fixed combiners and ``q``.

    ``quadratic[k] = Hbar_k^H w_k w_k^H Hbar_k`` turns ``|w_k^H Hbar_k f_j|^2`` into
    ``tr(C_k U_j)`` with ``U_j = f_j f_j^H``; ``selectors[l]`` picks the diagonal
    entries of AP ``l``.
    """

    num_aps: int
    ap_antennas: int
    quadratic: np.ndarray
    zeta: np.ndarray
    selectors: np.ndarray
    p_max: float
    gamma_th: float

    @property
    def num_ues(self) -> int:
        return self.quadratic.shape[0]


def build_sdr_instance(
    w: np.ndarray, priors: PriorSet, q: float | np.ndarray, gamma_th: float
) -> SdrInstance:
    a = np.einsum("kul,ku->kl", priors.hbar.conj(), w)
    quadratic = np.einsum("ki,kj->kij", a, a.conj())
    n = priors.hbar.shape[2]
    m = priors.ap_antennas
    selectors = np.zeros((priors.num_aps, n, n))
    for l in range(priors.num_aps):
        selectors[l, l * m : (l + 1) * m, l * m : (l + 1) * m] = np.eye(m)
    return SdrInstance(
        num_aps=priors.num_aps,
        ap_antennas=m,
        quadratic=quadratic,
        zeta=zeta(w, priors, q),
        selectors=selectors,
        p_max=priors.p_max,
        gamma_th=gamma_th,
    )


def export_sdr(instance: SdrInstance, path: Path) -> Path:
    """Writes the instance as a matrix document for an external SDP solver."""
    document = MatrixDocument(
        header={
            "L": str(instance.num_aps),
            "M": str(instance.ap_antennas),
            "K": str(instance.num_ues),
            "N": str(instance.num_aps * instance.ap_antennas),
        },
        comments=CONSTRAINTS,
        scalars={"P_max": instance.p_max, "gamma_th": instance.gamma_th},
    )
    for k, value in enumerate(instance.zeta):
        document.scalars[f"zeta_{k}"] = float(value)
    for k, matrix in enumerate(instance.quadratic):
        document.matrices[f"C_{k}"] = matrix
    for l, matrix in enumerate(instance.selectors):
        document.matrices[f"S_{l}"] = matrix
    return write_document(path, document)


def load_sdr(path: Path) -> SdrInstance:
    document = read_document(path)
    num_aps, num_ues = int(document.header["L"]), int(document.header["K"])
    return SdrInstance(
        num_aps=num_aps,
        ap_antennas=int(document.header["M"]),
        quadratic=np.stack([document.matrices[f"C_{k}"] for k in range(num_ues)]),
        zeta=np.array([document.scalars[f"zeta_{k}"] for k in range(num_ues)]),
        selectors=np.stack(
            [document.matrices[f"S_{l}"].real for l in range(num_aps)]
        ),
        p_max=document.scalars["P_max"],
        gamma_th=document.scalars["gamma_th"],
    )

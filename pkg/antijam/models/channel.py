from dataclasses import dataclass, field

import numpy as np

from antijam.models.scenario import ArrayGeometry


@dataclass(frozen=True)
class ArrayFrame:
    """Orientation of a planar array: boresight normal and the two in-plane axes."""

    normal: np.ndarray
    horizontal: np.ndarray
    vertical: np.ndarray


@dataclass(frozen=True)
class PathComponent:
    gain_small: complex
    gain_large: float
    mu_rx: float
    nu_rx: float
    mu_tx: float
    nu_tx: float

    def __post_init__(self):
        for angle in (self.mu_rx, self.nu_rx, self.mu_tx, self.nu_tx):
            if abs(angle) > 1.0:
                raise ValueError(f"virtual angle {angle} outside [-1, 1]")
        if self.gain_large < 0:
            raise ValueError("large-scale gain must be nonnegative")


@dataclass(frozen=True)
class LinkGeometry:
    tx_position: np.ndarray
    tx_frame: ArrayFrame
    rx_position: np.ndarray
    rx_frame: ArrayFrame
    beta: float

    @property
    def distance(self) -> float:
        return float(np.linalg.norm(self.rx_position - self.tx_position))


@dataclass(frozen=True)
class Deployment:
    ap_positions: np.ndarray
    ue_positions: np.ndarray
    jammer_positions: np.ndarray
    ap_frames: list[ArrayFrame]
    ue_frames: list[ArrayFrame]
    jammer_frames: list[ArrayFrame]


@dataclass
class ChannelSet:
    """
    True propagation channels of one deployment.

    ``h[l, k]`` is the ``M_U x M`` AP-to-UE matrix and ``j[g, k]`` the ``M_U x M_J``
    jammer-to-UE matrix. Path lists keep the geometry and large-scale statistics so
    that small-scale fading can be redrawn independently.
    """

    h: np.ndarray
    j: np.ndarray
    h_paths: list[list[list[PathComponent]]]
    j_paths: list[list[list[PathComponent]]]
    beta_h: np.ndarray
    beta_j: np.ndarray
    ap_geometry: ArrayGeometry
    ue_geometry: ArrayGeometry
    jammer_geometry: ArrayGeometry
    normalize_paths: bool = False
    deployment: Deployment | None = field(default=None, repr=False)

    @property
    def num_aps(self) -> int:
        return self.h.shape[0]

    @property
    def num_ues(self) -> int:
        return self.h.shape[1]

    @property
    def num_jammers(self) -> int:
        return self.j.shape[0]

    @property
    def ue_antennas(self) -> int:
        return self.h.shape[2]

    @property
    def ap_antennas(self) -> int:
        return self.h.shape[3]

    def stacked(self, k: int) -> np.ndarray:
        """Returns ``[H_1k, ..., H_Lk]`` as an ``M_U x (L*M)`` matrix."""
        return np.concatenate(list(self.h[:, k]), axis=1)

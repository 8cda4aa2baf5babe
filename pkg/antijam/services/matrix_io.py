"""
Plain-text container for labelled complex matrices.

Layout, one item per line::

    # free comment
    header KEY=VALUE KEY=VALUE ...
    scalar NAME VALUE
    matrix NAME ROWS COLS
    re im re im ...        (ROWS lines, COLS pairs each, row-major)

Floats are written with ``repr`` so that parsing reproduces them bit for bit.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from antijam.models.channel import ChannelSet
from antijam.models.priors import PriorSet
from antijam.schemas.error import MatrixFormatError

MAGIC = "# antijam matrix document v1"


@dataclass
class MatrixDocument:
    header: dict[str, str] = field(default_factory=dict)
    comments: list[str] = field(default_factory=list)
    scalars: dict[str, float] = field(default_factory=dict)
    matrices: dict[str, np.ndarray] = field(default_factory=dict)


def _row(values: np.ndarray) -> str:
    return " ".join(f"{float(v.real)!r} {float(v.imag)!r}" for v in values)


def write_document(path: Path, document: MatrixDocument) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [MAGIC]
    lines += [f"# {comment}" for comment in document.comments]
    lines.append("header " + " ".join(f"{k}={v}" for k, v in document.header.items()))
    for name, value in document.scalars.items():
        lines.append(f"scalar {name} {float(value)!r}")
    for name, matrix in document.matrices.items():
        matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
        lines.append(f"matrix {name} {matrix.shape[0]} {matrix.shape[1]}")
        lines += [_row(row) for row in matrix]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_document(path: Path) -> MatrixDocument:
    """
    Parses a file produced by :func:`write_document`.

    Raises:
        MatrixFormatError: On unknown directives, bad counts or unparsable numbers.
    """
    document = MatrixDocument()
    lines = Path(path).read_text().splitlines()
    index = 0
    while index < len(lines):
        number, line = index + 1, lines[index].strip()
        index += 1
        if not line:
            continue
        if line.startswith("#"):
            if line != MAGIC:
                document.comments.append(line[1:].strip())
            continue
        keyword, _, rest = line.partition(" ")
        try:
            if keyword == "header":
                for item in rest.split():
                    key, _, value = item.partition("=")
                    document.header[key] = value
            elif keyword == "scalar":
                name, value = rest.split()
                document.scalars[name] = float(value)
            elif keyword == "matrix":
                name, rows, cols = rest.split()
                shape = (int(rows), int(cols))
                block = lines[index : index + shape[0]]
                if len(block) != shape[0]:
                    raise MatrixFormatError(number, f"matrix {name} is truncated")
                document.matrices[name] = _parse_block(block, shape, number)
                index += shape[0]
            else:
                raise MatrixFormatError(number, f"unknown directive {keyword!r}")
        except ValueError as error:
            raise MatrixFormatError(number, str(error))
    return document


def _parse_block(block: list[str], shape: tuple[int, int], start: int) -> np.ndarray:
    matrix = np.zeros(shape, dtype=complex)
    for offset, line in enumerate(block):
        values = [float(token) for token in line.split()]
        if len(values) != 2 * shape[1]:
            raise MatrixFormatError(
                start + offset + 1, f"expected {2 * shape[1]} numbers, got {len(values)}"
            )
        matrix[offset] = np.array(values[0::2]) + 1j * np.array(values[1::2])
    return matrix


def dump_channels(channels: ChannelSet, path: Path) -> Path:
    """Writes every true channel matrix and its large-scale gain."""
    document = MatrixDocument(
        header={
            "L": str(channels.num_aps),
            "K": str(channels.num_ues),
            "G": str(channels.num_jammers),
            "M": str(channels.ap_antennas),
            "M_U": str(channels.ue_antennas),
            "M_J": str(channels.jammer_geometry.size),
        },
        comments=["H_l_k is AP l to UE k, J_g_k is jammer g to UE k"],
    )
    for l in range(channels.num_aps):
        for k in range(channels.num_ues):
            document.scalars[f"beta_H_{l}_{k}"] = float(channels.beta_h[l, k])
            document.matrices[f"H_{l}_{k}"] = channels.h[l, k]
    for g in range(channels.num_jammers):
        for k in range(channels.num_ues):
            document.scalars[f"beta_J_{g}_{k}"] = float(channels.beta_j[g, k])
            document.matrices[f"J_{g}_{k}"] = channels.j[g, k]
    return write_document(path, document)


def dump_prior_spectra(priors: PriorSet, path: Path) -> Path:
    """Eigenvalues of every jamming covariance and error-covariance block as CSV."""
    rows = []
    for g in range(priors.num_jammers):
        for k in range(priors.num_ues):
            for i, value in enumerate(np.linalg.eigvalsh(priors.r_jam[g, k])):
                rows.append(("R_jam", g, k, -1, i, value))
    for k, cov in enumerate(priors.error_cov):
        for l, spectrum in enumerate(cov.spectrum()):
            for i, value in enumerate(spectrum):
                rows.append(("Q", -1, k, l, i, value))
    frame = pd.DataFrame(rows, columns=["kind", "g", "k", "l", "index", "eigenvalue"])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path

import numpy as np
import pandas as pd
import pytest

from antijam.models.channel import ChannelSet
from antijam.models.priors import PriorSet
from antijam.schemas.error import MatrixFormatError
from antijam.services.matrix_io import (
    MatrixDocument,
    dump_channels,
    dump_prior_spectra,
    read_document,
    write_document,
)


def test_document_preserves_values_exactly(tmp_path, rng: np.random.Generator):
    matrix = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    document = MatrixDocument(
        header={"K": "3"},
        comments=["first", "second"],
        scalars={"pi": np.pi},
        matrices={"A": matrix, "v": np.array([1 + 2j, 3.5])},
    )
    loaded = read_document(write_document(tmp_path / "doc.txt", document))
    assert loaded.header == {"K": "3"}
    assert loaded.comments == ["first", "second"]
    assert loaded.scalars["pi"] == np.pi
    np.testing.assert_array_equal(loaded.matrices["A"], matrix)
    np.testing.assert_array_equal(loaded.matrices["v"], [[1 + 2j, 3.5]])


@pytest.mark.parametrize(
    "body",
    [
        "vector x 2\n",
        "matrix A 1 2\n1.0 0.0\n",
        "matrix A 2 1\n1.0 0.0\n",
        "scalar s not-a-number\n",
    ],
)
def test_malformed_documents(tmp_path, body: str):
    path = tmp_path / "bad.txt"
    path.write_text(body)
    with pytest.raises(MatrixFormatError) as caught:
        read_document(path)
    assert caught.value.data["line"] >= 1


def test_dump_channels(tmp_path, channels: ChannelSet):
    document = read_document(dump_channels(channels, tmp_path / "channels.txt"))
    assert document.header["L"] == "2" and document.header["M_J"] == "4"
    assert len([name for name in document.matrices if name.startswith("H_")]) == 4
    np.testing.assert_array_equal(document.matrices["H_1_0"], channels.h[1, 0])
    np.testing.assert_array_equal(document.matrices["J_0_1"], channels.j[0, 1])
    assert document.scalars["beta_H_0_1"] == channels.beta_h[0, 1]


def test_dump_prior_spectra(tmp_path, priors: PriorSet):
    frame = pd.read_csv(dump_prior_spectra(priors, tmp_path / "spectra.csv"))
    jamming = frame[frame["kind"] == "R_jam"]
    assert len(jamming) == priors.num_jammers * priors.num_ues * priors.ue_antennas
    assert np.all(jamming["eigenvalue"] >= -1e-9)
    errors = frame[frame["kind"] == "Q"]
    assert len(errors) == priors.num_ues * priors.num_aps * 2 * 4

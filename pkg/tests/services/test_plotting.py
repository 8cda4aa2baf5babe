import xml.etree.ElementTree as ET

from antijam.services.plotting import emit_plots

SVG = "{http://www.w3.org/2000/svg}"


def summary_with(schemes: list[str], values: list[float]) -> dict:
    return {
        "points": [
            {
                "axis": "ap_antennas",
                "value": value,
                "scheme": scheme,
                "mean_jsr_db": value / 4 + i,
                "sem_jsr_db": 0.5,
            }
            for i, scheme in enumerate(schemes)
            for value in values
        ]
    }


def test_empty_summary_gives_one_empty_chart(tmp_path):
    [path] = emit_plots({"points": []}, tmp_path)
    assert path.name == "jsr.svg"
    root = ET.parse(path).getroot()
    assert root.tag == f"{SVG}svg"
    assert not [g for g in root.iter(f"{SVG}g") if g.get("id", "").startswith("series-")]


def test_one_series_per_scheme(tmp_path):
    [path] = emit_plots(summary_with(["ao-ajhbf", "wmmse"], [8, 16, 36]), tmp_path)
    assert path.name == "jsr_ap_antennas.svg"
    root = ET.parse(path).getroot()
    for scheme in ["ao-ajhbf", "wmmse"]:
        [group] = [g for g in root.iter(f"{SVG}g") if g.get("id") == f"series-{scheme}"]
        assert len(list(group.iter(f"{SVG}use"))) == 3


def test_points_without_mean_are_skipped(tmp_path):
    summary = summary_with(["wmmse"], [8, 16])
    summary["points"][0]["mean_jsr_db"] = None
    [path] = emit_plots(summary, tmp_path)
    root = ET.parse(path).getroot()
    [group] = [g for g in root.iter(f"{SVG}g") if g.get("id") == "series-wmmse"]
    assert len(list(group.iter(f"{SVG}use"))) == 1


def test_charts_are_byte_reproducible(tmp_path):
    summary = summary_with(["ao-ajhbf"], [1, 2, 4])
    [first] = emit_plots(summary, tmp_path / "a")
    [second] = emit_plots(summary, tmp_path / "b")
    assert first.read_bytes() == second.read_bytes()

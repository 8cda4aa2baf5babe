from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

AXIS_LABELS = {
    "ap_antennas": "Antennas per AP",
    "num_jammers": "Number of jammers (fixed total antennas)",
    "nmse": "Channel estimation NMSE",
}


def _series(points: list[dict[str, Any]]) -> dict[str, list[dict[str, Any]]]:
    series: dict[str, list[dict[str, Any]]] = {}
    for point in points:
        if point.get("mean_jsr_db") is None:
            continue
        series.setdefault(point["scheme"], []).append(point)
    for rows in series.values():
        rows.sort(key=lambda row: row["value"])
    return series


def plot_axis(axis: str, points: list[dict[str, Any]], path: Path) -> Path:
    """
    Draws mean JSR against one sweep axis, one errorbar series per scheme.

    The data line of every series carries the SVG id ``series-<scheme>``.
    """
    figure, ax = plt.subplots(figsize=(6, 4))
    for scheme, rows in sorted(_series(points).items()):
        x = [row["value"] for row in rows]
        y = [row["mean_jsr_db"] for row in rows]
        err = [row.get("sem_jsr_db") or 0.0 for row in rows]
        container = ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=scheme)
        container.lines[0].set_gid(f"series-{scheme}")
    ax.set_xlabel(AXIS_LABELS.get(axis, axis))
    ax.set_ylabel("Average resistible JSR (dB)")
    ax.grid(True, alpha=0.3)
    if ax.lines:
        ax.legend()
    figure.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    figure.savefig(path, format="svg", metadata={"Date": None})
    plt.close(figure)
    return path


def emit_plots(summary: dict[str, Any], out_dir: Path) -> list[Path]:
    """
    Writes one ``jsr_<axis>.svg`` per swept axis of a summary.

    A summary without points yields a single empty-axes ``jsr.svg``. Output is
    byte-for-byte reproducible for a given summary.

    Args:
        summary (dict[str, Any]): As produced by ``summarize``.
        out_dir (Path): Target directory.

    Returns:
        list[Path]: The written files.
    """
    plt.rcParams["svg.hashsalt"] = "antijam"
    out_dir = Path(out_dir)
    points = summary.get("points", [])
    axes = list(dict.fromkeys(point["axis"] for point in points))
    if not axes:
        return [plot_axis("", [], out_dir / "jsr.svg")]
    return [
        plot_axis(
            axis,
            [point for point in points if point["axis"] == axis],
            out_dir / f"jsr_{axis}.svg",
        )
        for axis in axes
    ]

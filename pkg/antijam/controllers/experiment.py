import json
from concurrent.futures import ThreadPoolExecutor
from importlib.metadata import PackageNotFoundError, version
from itertools import combinations
from pathlib import Path
from time import perf_counter
from typing import Any

import numpy as np
import pandas as pd
from loguru import logger
from scipy.linalg import LinAlgError
from scipy.stats import binomtest

from antijam.controllers.channel import generate_channels
from antijam.controllers.hybrid import ao_ajhbf
from antijam.controllers.priors import build_priors
from antijam.controllers.wmmse import wmmse_ao
from antijam.models.beamforming import AoResult
from antijam.models.channel import ChannelSet
from antijam.models.estimation import EstimationConfig
from antijam.models.experiment import (
    RESULT_COLUMNS,
    ExperimentReport,
    ExperimentSpec,
    RunResult,
    Scheme,
    SweepAxis,
)
from antijam.models.priors import PriorSet
from antijam.models.scenario import ScenarioConfig
from antijam.schemas.error import BaseError
from antijam.services.plotting import emit_plots

JSR_FORMULA = "JSR_dB = 10*log10(G*K*q / (K*P_max))"
# Reported when q* = 0, i.e. the threshold is missed even without jamming.
JSR_FLOOR_DB = -100.0
MAX_FAILURE_RATE = 0.1
SIGNIFICANCE = 0.05
EXPECTED_TRENDS = {
    SweepAxis.AP_ANTENNAS.value: "increasing",
    SweepAxis.NUM_JAMMERS.value: "decreasing",
    SweepAxis.NMSE.value: "decreasing",
}
VERSIONED_PACKAGES = ["antijam", "numpy", "scipy", "pandas", "pydantic", "matplotlib"]


def jsr_db(q: float, num_jammers: int, p_max: float) -> float:
    """
    Total resistible jamming power over the total transmit budget, in dB.

    Every jammer is assumed to spend ``q`` on each of the K UEs, against ``P_max``
    per AP-served UE, so K cancels: ``10 log10(G q / P_max)``. Values below
    ``JSR_FLOOR_DB`` are clipped to it.
    """
    ratio = num_jammers * q / p_max
    if ratio <= 0:
        return JSR_FLOOR_DB
    return max(float(10 * np.log10(ratio)), JSR_FLOOR_DB)


def _to_db(value: float) -> float:
    return max(float(10 * np.log10(value)), JSR_FLOOR_DB) if value > 0 else JSR_FLOOR_DB


def _finite(value: float) -> float | None:
    return float(value) if np.isfinite(value) else None


def _sign_test(wins: int, losses: int) -> float:
    if wins + losses == 0:
        return 1.0
    return float(binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue)


def _select(frame: pd.DataFrame, where: dict[str, Any]) -> pd.DataFrame:
    mask = np.ones(len(frame), dtype=bool)
    for column, value in where.items():
        mask &= (frame[column] == value).to_numpy()
    return frame.loc[mask]


def _paired(
    frame: pd.DataFrame, left: dict, right: dict, keys: list[str]
) -> np.ndarray:
    """Differences ``right - left`` of JSR over runs matched on ``keys``."""
    a = _select(frame, left)[keys + ["jsr_db"]]
    b = _select(frame, right)[keys + ["jsr_db"]]
    merged = a.merge(b, on=keys)
    return (merged["jsr_db_y"] - merged["jsr_db_x"]).to_numpy()


def _point_summaries(frame: pd.DataFrame) -> list[dict[str, Any]]:
    points = []
    grouped = frame.groupby(["sweep_axis", "sweep_value", "scheme"], sort=True)
    for (axis, value, scheme), group in grouped:
        done = group.dropna(subset=["jsr_db"])
        jsr = done["jsr_db"].to_numpy(dtype=float)
        n = len(jsr)
        std = float(np.std(jsr, ddof=1)) if n >= 2 else float("nan")
        points.append(
            {
                "axis": axis,
                "value": float(value),
                "scheme": scheme,
                "trials": n,
                "failures": int(len(group) - n),
                "mean_jsr_db": _finite(jsr.mean()) if n else None,
                "linear_mean_jsr_db": (
                    _to_db(float(np.mean(10 ** (jsr / 10)))) if n else None
                ),
                "std_jsr_db": _finite(std),
                "sem_jsr_db": _finite(std / np.sqrt(n)) if n >= 2 else None,
                "mean_q_watts": _finite(done["q_watts"].mean()) if n else None,
            }
        )
    return points


def _trend(frame: pd.DataFrame, axis: str, scheme: str) -> dict[str, Any]:
    values = sorted(frame.loc[frame["sweep_axis"] == axis, "sweep_value"].unique())
    expected = EXPECTED_TRENDS.get(axis)
    entry: dict[str, Any] = {
        "axis": axis,
        "scheme": scheme,
        "expected": expected,
        "steps": [],
    }
    if len(values) < 2:
        return entry | {"verdict": "n/a", "holds": None}

    all_ties = True
    rising, falling = True, True
    for low, high in zip(values, values[1:]):
        base = {"sweep_axis": axis, "scheme": scheme}
        diffs = _paired(
            frame,
            base | {"sweep_value": low},
            base | {"sweep_value": high},
            ["trial"],
        )
        wins, losses = int(np.sum(diffs > 0)), int(np.sum(diffs < 0))
        p_up, p_down = _sign_test(wins, losses), _sign_test(losses, wins)
        all_ties &= wins + losses == 0
        rising &= p_up < SIGNIFICANCE
        falling &= p_down < SIGNIFICANCE
        entry["steps"].append(
            {
                "from": float(low),
                "to": float(high),
                "increases": wins,
                "decreases": losses,
                "p_increasing": p_up,
                "p_decreasing": p_down,
            }
        )

    if all_ties:
        verdict = "flat"
    elif rising:
        verdict = "increasing"
    elif falling:
        verdict = "decreasing"
    else:
        verdict = "inconclusive"
    return entry | {"verdict": verdict, "holds": verdict == expected}


def _comparison(frame: pd.DataFrame, axis: str, a: str, b: str) -> dict[str, Any]:
    diffs = _paired(
        frame,
        {"sweep_axis": axis, "scheme": b},
        {"sweep_axis": axis, "scheme": a},
        ["sweep_value", "trial"],
    )
    wins, losses = int(np.sum(diffs > 0)), int(np.sum(diffs < 0))
    p_a, p_b = _sign_test(wins, losses), _sign_test(losses, wins)
    if wins + losses == 0:
        verdict = "flat"
    elif p_a < SIGNIFICANCE:
        verdict = f"{a}≥{b}"
    elif p_b < SIGNIFICANCE:
        verdict = f"{b}≥{a}"
    else:
        verdict = "inconclusive"
    return {
        "axis": axis,
        "a": a,
        "b": b,
        "pairs": int(len(diffs)),
        "a_wins": wins,
        "b_wins": losses,
        "p_a_greater": p_a,
        "p_b_greater": p_b,
        "verdict": verdict,
    }


def summarize(frame: pd.DataFrame) -> dict[str, Any]:
    """
    Aggregates per-trial results into per-point statistics and trend verdicts.

    Means are reported both over dB values and over linear power converted back to
    dB. Trends pair trials with the same index across consecutive sweep values and
    apply a one-sided sign test at the 5 % level to every step; a trend is
    ``increasing`` or ``decreasing`` only if every step is significant, ``flat``
    when no pair differs and ``n/a`` for single-point sweeps. Scheme comparisons
    pair runs sharing axis, value and trial.

    Args:
        frame (pd.DataFrame): Rows with at least the ``results.csv`` columns.

    Returns:
        dict[str, Any]: A JSON-serializable summary.
    """
    frame = frame.copy()
    frame["sweep_axis"] = frame["sweep_axis"].astype(str)
    frame["scheme"] = frame["scheme"].astype(str)
    done = frame.dropna(subset=["jsr_db"])

    axes = list(dict.fromkeys(frame["sweep_axis"]))
    schemes = list(dict.fromkeys(frame["scheme"]))
    trends = [
        _trend(done, axis, scheme)
        for axis in axes
        for scheme in schemes
        if ((done["sweep_axis"] == axis) & (done["scheme"] == scheme)).any()
    ]
    comparisons = [
        _comparison(done, axis, a, b)
        for axis in axes
        for a, b in combinations(schemes, 2)
    ]
    return {
        "jsr_formula": JSR_FORMULA,
        "jsr_floor_db": JSR_FLOOR_DB,
        "significance": SIGNIFICANCE,
        "runs": int(len(frame)),
        "failures": int(len(frame) - len(done)),
        "points": _point_summaries(frame),
        "trends": trends,
        "comparisons": comparisons,
    }


def load_results(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def write_json(data: dict[str, Any], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", "utf-8")
    return path


def package_versions() -> dict[str, str]:
    versions = {}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class ExperimentController:
    """
    Runs an experiment spec as seeded, paired Monte Carlo trials.

    Trial ``i`` uses seed ``base_seed + i`` at every sweep point. The seed drives
    one generator for the channels and an independent one for the priors, so all
    schemes of a trial consume the same ChannelSet and PriorSet. Trials run on a
    thread pool and results are merged in trial order, so the outputs do not
    depend on the number of threads.
    """

    def __init__(
        self,
        spec: ExperimentSpec,
        output_dir: Path | None = None,
        threads: int = 1,
    ):
        """
        Args:
            spec: The validated experiment.
            output_dir: Where results are written, defaults to ``spec.output_dir``.
            threads: Size of the trial worker pool.
        """
        self.spec = spec
        self.output_dir = Path(output_dir or spec.output_dir)
        self.threads = max(1, threads)

    def trial_seed(self, trial: int) -> int:
        return self.spec.base_seed + trial

    def trial_generators(
        self, seed: int
    ) -> tuple[np.random.Generator, np.random.Generator]:
        """Fresh channel and prior generators; repeated calls yield equal streams."""
        channel_seq, prior_seq = np.random.SeedSequence(seed).spawn(2)
        return np.random.default_rng(channel_seq), np.random.default_rng(prior_seq)

    def trial_priors(
        self,
        channels: ChannelSet,
        scenario: ScenarioConfig,
        estimation: EstimationConfig,
        seed: int,
    ) -> PriorSet:
        _, prior_rng = self.trial_generators(seed)
        return build_priors(channels, scenario, estimation, prior_rng)

    def prepare(
        self, axis: SweepAxis, value: float, trial: int
    ) -> tuple[ScenarioConfig, ChannelSet, PriorSet]:
        """Scenario, channels and quantized priors of one trial at one point."""
        seed = self.trial_seed(trial)
        scenario = self.spec.scenario_config(axis, value)
        channel_rng, _ = self.trial_generators(seed)
        channels = generate_channels(scenario, channel_rng)
        priors = self.trial_priors(
            channels, scenario, self.spec.estimation_config(axis, value), seed
        )
        return scenario, channels, priors

    def run_scheme(
        self,
        scheme: Scheme,
        scenario: ScenarioConfig,
        priors: dict[str, PriorSet],
    ) -> AoResult:
        if scheme == Scheme.WMMSE:
            return wmmse_ao(scenario, priors["quantized"], self.spec.ao, self.spec.wmmse)
        if scheme == Scheme.AO_AJHBF_NOQUANT:
            return ao_ajhbf(scenario, priors["lossless"], self.spec.ao)
        return ao_ajhbf(scenario, priors["quantized"], self.spec.ao)

    def run_trial(self, axis: SweepAxis, value: float, trial: int) -> list[RunResult]:
        """
        Runs every scheme of one trial at one sweep point.

        Failures are captured per scheme and never abort the trial.

        Args:
            axis: The swept axis.
            value: The axis value of this point.
            trial: Trial index, starting at 0.

        Returns:
            list[RunResult]: One result per scheme, in spec order.
        """
        seed = self.trial_seed(trial)
        scenario = self.spec.scenario_config(axis, value)
        estimation = self.spec.estimation_config(axis, value)
        context = logger.bind(axis=axis.value, value=value, trial=trial, seed=seed)

        def result(scheme: Scheme, **fields: Any) -> RunResult:
            return RunResult(
                sweep_axis=axis.value,
                sweep_value=float(value),
                scheme=scheme.value,
                trial=trial,
                seed=seed,
                **fields,
            )

        priors: dict[str, PriorSet] = {}
        try:
            _, channels, priors["quantized"] = self.prepare(axis, value, trial)
            if Scheme.AO_AJHBF_NOQUANT in self.spec.schemes:
                lossless = estimation.model_copy(update={"quant_bits": None})
                priors["lossless"] = self.trial_priors(
                    channels, scenario, lossless, seed
                )
        except (BaseError, LinAlgError) as error:
            context.warning(f"Trial setup failed: {error}")
            return [result(scheme, error=str(error)) for scheme in self.spec.schemes]

        results = []
        for scheme in self.spec.schemes:
            started = perf_counter()
            try:
                outcome = self.run_scheme(scheme, scenario, priors)
            except (BaseError, LinAlgError) as error:
                context.warning(f"{scheme.value} failed: {error}")
                results.append(result(scheme, error=str(error)))
                continue
            runtime = perf_counter() - started
            context.bind(performance=True, scheme=scheme.value).info(
                f"{scheme.value} finished in {runtime:.3f}s with q={outcome.q:.4e} W"
            )
            results.append(
                result(
                    scheme,
                    q_watts=float(outcome.q),
                    jsr_db=jsr_db(outcome.q, scenario.num_jammers, scenario.p_max),
                    min_xi_db=_to_db(float(np.min(outcome.xi))),
                    runtime_s=runtime if self.spec.record_runtime else 0.0,
                    xi=outcome.xi,
                    trace=outcome.trace,
                )
            )
        return results

    def results_frame(self, results: list[RunResult]) -> pd.DataFrame:
        return pd.DataFrame([r.row() for r in results], columns=RESULT_COLUMNS)

    def manifest(self, results: list[RunResult]) -> dict[str, Any]:
        alphas = {
            f"{axis.value}={value}": self.spec.estimation_config(axis, value).alpha
            for axis, value in self.spec.points()
        }
        return {
            "spec": self.spec.model_dump(mode="json"),
            "seeds": [self.trial_seed(trial) for trial in range(self.spec.trials)],
            "alpha": alphas,
            "jsr_formula": JSR_FORMULA,
            "packages": package_versions(),
            "failures": [
                {
                    "sweep_axis": r.sweep_axis,
                    "sweep_value": r.sweep_value,
                    "scheme": r.scheme,
                    "trial": r.trial,
                    "error": r.error,
                }
                for r in results
                if r.failed
            ],
        }

    def write_traces(self, results: list[RunResult]) -> Path:
        directory = self.output_dir / "traces"
        directory.mkdir(parents=True, exist_ok=True)
        for r in results:
            if r.trace is not None:
                name = f"{r.sweep_axis}-{r.sweep_value:g}-{r.scheme}-{r.trial}.csv"
                r.trace.to_csv(directory / name)
        return directory

    def run(self) -> ExperimentReport:
        """
        Runs all sweep points and trials and writes the result files.

        Writes ``results.csv``, ``summary.json``, ``manifest.json`` and one SVG
        per swept axis into the output directory.

        Returns:
            ExperimentReport: Results in (point, trial, scheme) order, the summary
            and the written files.
        """
        tasks = [
            (axis, value, trial)
            for axis, value in self.spec.points()
            for trial in range(self.spec.trials)
        ]
        logger.info(
            f"Running {self.spec.name!r}: {len(tasks)} trials x "
            f"{len(self.spec.schemes)} schemes on {self.threads} threads"
        )
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            batches = list(pool.map(lambda task: self.run_trial(*task), tasks))
        results = [result for batch in batches for result in batch]

        self.output_dir.mkdir(parents=True, exist_ok=True)
        frame = self.results_frame(results)
        summary = summarize(frame)
        files = {
            "results": self.output_dir / "results.csv",
            "summary": write_json(summary, self.output_dir / "summary.json"),
            "manifest": write_json(
                self.manifest(results), self.output_dir / "manifest.json"
            ),
        }
        frame.to_csv(files["results"], index=False)
        for path in emit_plots(summary, self.output_dir):
            files[path.stem] = path
        if self.spec.save_traces:
            files["traces"] = self.write_traces(results)

        report = ExperimentReport(results=results, summary=summary, files=files)
        logger.info(
            f"Finished {self.spec.name!r} with failure rate {report.failure_rate:.1%}"
        )
        return report


def run_experiment(
    spec: ExperimentSpec, output_dir: Path | None = None, threads: int = 1
) -> ExperimentReport:
    return ExperimentController(spec, output_dir=output_dir, threads=threads).run()

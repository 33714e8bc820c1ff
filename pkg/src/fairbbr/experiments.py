"""Sweeps over send rate and buffer size, dataset building, model reports and fairness runs."""

from __future__ import annotations

import csv
import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .fairness import group_shared_bottlenecks, jain_index
from .measurement import Dataset, LatencyClass, export_csv
from .ml import (DecisionTree, LinearSvm, MlpClassifier, MlpRegressor, ModelArtifact, SingleClassData,
                 SplitSpec, evaluate, kfold_cv, standardize_apply, standardize_fit, train_test_split)
from .scenario import ScenarioConfig, default_config, run_scenario, with_overrides
from .simcore import ConfigError

log = logging.getLogger(__name__)

DEFAULT_RATES = tuple(range(20, 201, 20))
DEFAULT_BUFFERS = (10, 50, 100)
REFERENCE_BUFFER = 50
PLOT_FILES = {
    "latency_vs_rate": "fig_a_latency_vs_send_rate.csv",
    "throughput_vs_rate": "fig_b_throughput_vs_send_rate.csv",
    "latency_by_buffer": "fig_c_latency_by_buffer.csv",
    "throughput_by_buffer": "fig_d_throughput_by_buffer.csv",
}
FAIRNESS_COLUMNS = ("run_id", "algorithm", "flow_id", "throughput_bps", "jain_index")
K_FOLDS = 5
NUM_RUNS = 10


class NoSharedBottleneck(ConfigError):
    pass


@dataclass
class CellResult:
    send_rate: float
    buffer_pkts: int
    seed: int
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def throughput(self) -> float:
        """Mean delivered messages per second over all windows."""
        if not self.rows:
            return 0.0
        return sum(r.throughput for r in self.rows) / len(self.rows)

    @property
    def avg_latency(self) -> float:
        """Message-weighted mean latency in seconds (NaN if nothing was delivered)."""
        total = sum(r.throughput for r in self.rows if r.avg_latency is not None)
        if total == 0:
            return math.nan
        return sum(r.avg_latency * r.throughput for r in self.rows if r.avg_latency is not None) / total


def _cell_config(base: ScenarioConfig, send_rate: float, buffer_pkts: int, seed: int) -> ScenarioConfig:
    cfg = with_overrides(base, seed=seed)
    for f in cfg.flows:
        if f.traffic != "bulk":
            f.send_rate_msgs = float(send_rate)
    for f in cfg.flows:
        cfg.bottleneck(f).buffer_pkts = int(buffer_pkts)
    return cfg


def run_cell(base: ScenarioConfig, send_rate: float, buffer_pkts: int, seed: int) -> CellResult:
    cell = CellResult(send_rate, buffer_pkts, seed)
    try:
        res = run_scenario(_cell_config(base, send_rate, buffer_pkts, seed))
    except Exception as exc:  # one bad cell must not sink the sweep
        cell.error = f"{type(exc).__name__}: {exc}"
        return cell
    cell.rows = res.rows
    cell.summary = res.stats.summary()
    return cell


def _run_cell_args(args):
    return run_cell(*args)


@dataclass
class SweepResult:
    rates: list
    buffers: list
    cells: dict
    seed: int

    @property
    def failures(self) -> list:
        return [c for c in self.cells.values() if c.error]

    def rows(self) -> list:
        out = []
        for key in sorted(self.cells):
            out.extend(self.cells[key].rows)
        return out

    def latency(self, rate, buf) -> float:
        return self.cells[(rate, buf)].avg_latency

    def throughput(self, rate, buf) -> float:
        return self.cells[(rate, buf)].throughput

    def dataset(self, threshold: float = 1.0) -> Dataset:
        return Dataset(self.rows(), threshold=threshold)


def sweep(base: Optional[ScenarioConfig] = None, rates=DEFAULT_RATES, buffers=DEFAULT_BUFFERS,
          seed: Optional[int] = None, duration_s: Optional[float] = None, jobs: int = 1) -> SweepResult:
    rates, buffers = list(rates), list(buffers)
    if not rates or not buffers:
        raise ConfigError("sweep needs at least one send rate and one buffer size")
    base = base or default_config()
    if duration_s is not None:
        base = with_overrides(base, duration_s=duration_s)
    seed = base.seed if seed is None else seed
    tasks = [(base, r, b, seed) for b in buffers for r in rates]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell_args, tasks))
    else:
        results = [run_cell(*t) for t in tasks]
    cells = {(c.send_rate, c.buffer_pkts): c for c in results}
    for c in results:
        if c.error:
            log.error("cell rate=%s buffer=%s failed: %s", c.send_rate, c.buffer_pkts, c.error)
    return SweepResult(rates, buffers, cells, seed)


def plot_data(result: SweepResult) -> dict:
    """Four x,series,y tables: latency and throughput against send rate, for the
    reference buffer and for every buffer."""
    ref = REFERENCE_BUFFER if REFERENCE_BUFFER in result.buffers else result.buffers[0]
    tables = {k: [] for k in PLOT_FILES}
    for b in result.buffers:
        for r in result.rates:
            c = result.cells[(r, b)]
            if c.error:
                continue
            series = f"buffer_{b}"
            tables["latency_by_buffer"].append((r, series, c.avg_latency))
            tables["throughput_by_buffer"].append((r, series, c.throughput))
            if b == ref:
                tables["latency_vs_rate"].append((r, series, c.avg_latency))
                tables["throughput_vs_rate"].append((r, series, c.throughput))
    return tables


def _write_table(path: Path, table) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x", "series", "y"))
        for x, series, y in table:
            w.writerow((repr(float(x)), series, repr(float(y))))


def write_sweep(result: SweepResult, out_dir, svg: bool = False) -> list:
    out = Path(out_dir)
    (out / "cells").mkdir(parents=True, exist_ok=True)
    written = []
    for (r, b), c in sorted(result.cells.items()):
        if c.error:
            continue
        p = out / "cells" / f"rate{r:g}_buf{b}.csv"
        export_csv(c.rows, p)
        written.append(p)
    tables = plot_data(result)
    for key, name in PLOT_FILES.items():
        p = out / name
        _write_table(p, tables[key])
        written.append(p)
        if svg:
            from .svg import line_chart_from_table
            ylabel = "avg latency (s)" if "latency" in key else "throughput (msg/s)"
            sp = p.with_suffix(".svg")
            sp.write_text(line_chart_from_table(tables[key], title=key.replace("_", " "),
                                                xlabel="send rate (msg/s)", ylabel=ylabel), encoding="utf-8")
            written.append(sp)
    failures = out / "failures.txt"
    if result.failures:
        failures.write_text("".join(f"rate={c.send_rate:g} buffer={c.buffer_pkts}: {c.error}\n"
                                    for c in result.failures), encoding="utf-8")
        written.append(failures)
    elif failures.exists():
        failures.unlink()
    return written


def read_plot_table(path) -> list:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [(float(r["x"]), r["series"], float(r["y"])) for r in reader]


def generate_dataset(base: Optional[ScenarioConfig] = None, rates=DEFAULT_RATES, buffers=DEFAULT_BUFFERS,
                     seed: Optional[int] = None, duration_s: Optional[float] = None, jobs: int = 1) -> Dataset:
    return sweep(base, rates, buffers, seed, duration_s, jobs).dataset()


def classifier_factories(epochs_mlp: int = 2000) -> dict:
    return {
        "SVM": lambda s: LinearSvm(seed=s),
        "Decision Tree": lambda s: DecisionTree(seed=s),
        "MLP": lambda s: MlpClassifier(epochs=epochs_mlp, seed=s),
    }


def regression_data(ds: Dataset):
    """Regressor inputs (send rate, block size) and target throughput."""
    return np.column_stack([ds.send_rate, ds.block_size]), ds.throughput.copy()


@dataclass
class TrainReport:
    cv: dict
    regressor: MlpRegressor
    validation_accuracy: float
    validation_mse: float
    artifacts: dict
    majority: float

    def lines(self) -> list:
        out = [
            f"Mean SVM Accuracy: {self.cv['SVM'].mean}",
            f"Mean Decision Tree Accuracy: {self.cv['Decision Tree'].mean}",
            f"Mean MLP Accuracy: {self.cv['MLP'].mean}",
        ]
        out.extend(self.regressor.trace_lines())
        out.append(f"Accuracy on Validation Set: {self.validation_accuracy}")
        return out

    def text(self) -> str:
        return "\n".join(self.lines()) + "\n"


def train_report(ds: Dataset, seed: int = 0, k: int = K_FOLDS, num_runs: int = NUM_RUNS,
                 tolerance: float = 0.10, epochs_mlp: int = 2000) -> TrainReport:
    X, y = ds.features, ds.labels
    if len(y) == 0 or len(np.unique(y)) < 2:
        raise SingleClassData("dataset has a single latency class after labeling")
    cv, artifacts = {}, {}
    for name, factory in classifier_factories(epochs_mlp).items():
        cv[name] = kfold_cv(factory, X, y, k=k, seed=seed, num_runs=num_runs)
        scaler = standardize_fit(X)
        model = factory(seed).fit(standardize_apply(scaler, X), y)
        artifacts[name] = ModelArtifact(model, scaler, {"seed": seed, "k": k, "num_runs": num_runs},
                                        {"cv_mean": cv[name].mean, "cv_std": cv[name].std,
                                         "run_std": cv[name].run_std})
    Xr, yr = regression_data(ds)
    X_tr, X_te, y_tr, y_te = train_test_split(Xr, yr, SplitSpec(0.25, seed))
    scaler = standardize_fit(X_tr)
    reg = MlpRegressor(seed=seed).fit(standardize_apply(scaler, X_tr), y_tr)
    scores = evaluate(reg, standardize_apply(scaler, X_te), y_te, "regression", tolerance)
    artifacts["MLP Regressor"] = ModelArtifact(
        reg, scaler, {"seed": seed, "tolerance": tolerance, "lr": reg.lr, "epochs": reg.epochs},
        scores, reg.trace, features=("send_rate", "block_size"))
    majority = float(max(np.mean(y), 1 - np.mean(y)))
    return TrainReport(cv, reg, scores["accuracy"], scores["mse"], artifacts, majority)


ARTIFACT_NAMES = {
    "SVM": "svm.json",
    "Decision Tree": "decision_tree.json",
    "MLP": "mlp_classifier.json",
    "MLP Regressor": "mlp_regressor.json",
}


def write_artifacts(report: TrainReport, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, art in report.artifacts.items():
        p = out / ARTIFACT_NAMES[name]
        art.save(p)
        paths.append(p)
    return paths


@dataclass
class FairnessReport:
    run_id: str
    rows: list
    jain: dict

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(FAIRNESS_COLUMNS)
            for r in self.rows:
                w.writerow((r["run_id"], r["algorithm"], r["flow_id"], repr(r["throughput_bps"]),
                            repr(r["jain_index"])))


def shared_sets(cfg: ScenarioConfig) -> list:
    sets, _ = group_shared_bottlenecks(
        {l.id: l.rate_bps for l in cfg.links},
        {f.id: f.path for f in cfg.flows},
        {f.id: f.connection for f in cfg.flows if f.connection is not None},
    )
    return sets


def fairness_comparison(cfg: ScenarioConfig, advisor: Optional[Callable] = None,
                        algorithms=("bbr", "coupled", "coupled_ml")) -> FairnessReport:
    """Run one scenario under each algorithm with the same seed and compare final-third shares."""
    if not shared_sets(cfg):
        raise NoSharedBottleneck("no two subflows of one connection share a bottleneck")
    run_id = f"{cfg.name}-seed{cfg.seed}"
    rows, jain = [], {}
    for alg in algorithms:
        res = run_scenario(with_overrides(cfg, algorithm=alg), advisor=advisor)
        tput = res.final_third_throughputs()
        j = jain_index(tput.values()) if any(v > 0 for v in tput.values()) else 0.0
        jain[alg] = j
        for f in cfg.flows:
            rows.append({"run_id": run_id, "algorithm": alg, "flow_id": f.id,
                         "throughput_bps": tput[f.id], "jain_index": j})
    return FairnessReport(run_id, rows, jain)


ADVISOR_RATES = (40, 80, 120, 160, 200)
ADVISOR_DURATION_S = 20.0


class TreeAdvisor:
    """Latency-class predictor over (block size, throughput) backed by a fitted artifact."""

    def __init__(self, artifact: ModelArtifact):
        self.artifact = artifact

    def __call__(self, block_size, throughput) -> LatencyClass:
        code = int(self.artifact.predict(np.array([[float(block_size), float(throughput)]]))[0])
        return LatencyClass.HIGH if code == 1 else LatencyClass.LOW


def train_advisor(ds: Dataset, seed: int = 0) -> TreeAdvisor:
    X, y = ds.features, ds.labels
    if len(np.unique(y)) < 2:
        raise SingleClassData("advisor training data has a single latency class")
    scaler = standardize_fit(X)
    tree = DecisionTree(seed=seed).fit(standardize_apply(scaler, X), y)
    return TreeAdvisor(ModelArtifact(tree, scaler, {"seed": seed}))


@functools.lru_cache(maxsize=1)
def default_advisor() -> TreeAdvisor:
    """Decision tree fit on a short default-scenario sweep; built once per process."""
    ds = generate_dataset(default_config(duration_s=ADVISOR_DURATION_S), ADVISOR_RATES, DEFAULT_BUFFERS, seed=1)
    return train_advisor(ds)

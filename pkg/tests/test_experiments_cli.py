import csv
import json

import numpy as np
import pytest

from fairbbr import cli
from fairbbr.experiments import (PLOT_FILES, NoSharedBottleneck, default_advisor, fairness_comparison,
                                 read_plot_table, sweep, train_report)
from fairbbr.measurement import CSV_COLUMNS, Dataset, LatencyClass, MetricsRow, export_csv, read_rows
from fairbbr.ml import SingleClassData
from fairbbr.scenario import config_from_dict, default_config, fairness_config


def two_flow_config(duration=8, seed=3):
    return {
        "name": "two-flows",
        "seed": seed,
        "duration_s": duration,
        "links": [{"id": "L", "rate_bps": 2_000_000, "delay_ms": 20, "buffer_pkts": 50}],
        "flows": [
            {"id": "a", "path": ["L"], "send_rate_msgs": 60},
            {"id": "b", "path": ["L"], "send_rate_msgs": 60, "traffic": "constant"},
        ],
    }


def write_json(path, data):
    path.write_text(json.dumps(data, indent=2))
    return path


def test_simulate_writes_windows_for_each_flow(tmp_path, capsys):
    cfg = write_json(tmp_path / "c.json", two_flow_config())
    out = tmp_path / "m.csv"
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    rows, _ = read_rows(out)
    for fid in ("a", "b"):
        assert sum(r.flow_id == fid for r in rows) >= 8 - 1
    assert capsys.readouterr().out.strip()


def test_simulate_is_byte_identical(tmp_path):
    cfg = write_json(tmp_path / "c.json", two_flow_config())
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["simulate", "--config", str(cfg), "--out", str(a)])
    cli.main(["simulate", "--config", str(cfg), "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_negative_rate_exits_2_and_names_field(tmp_path, capsys):
    data = two_flow_config()
    data["links"][0]["rate_bps"] = -5
    cfg = write_json(tmp_path / "bad.json", data)
    assert cli.main(["simulate", "--config", str(cfg)]) == 2
    assert "rate_bps" in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path):
    data = two_flow_config()
    data["colour"] = "blue"
    assert cli.main(["simulate", "--config", str(write_json(tmp_path / "x.json", data))]) == 2


def test_broken_json_reports_line(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text('{\n  "links": [\n  oops\n}\n')
    assert cli.main(["simulate", "--config", str(p)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_missing_config_exits_1(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.json")]) == 1


def test_sweep_counts_and_svg_leaves_csv_alone(tmp_path):
    args = ["sweep", "--rates", "40,120", "--buffers", "10,100", "--duration", "6"]
    plain, drawn = tmp_path / "plain", tmp_path / "drawn"
    assert cli.main(args + ["--out", str(plain)]) == 0
    assert cli.main(args + ["--out", str(drawn), "--svg"]) == 0
    cells = sorted(p.name for p in (plain / "cells").glob("*.csv"))
    assert len(cells) == 4
    for name in PLOT_FILES.values():
        assert (plain / name).read_bytes() == (drawn / name).read_bytes()
        assert (drawn / name).with_suffix(".svg").exists()
        assert not (plain / name).with_suffix(".svg").exists()
    assert len(read_plot_table(plain / PLOT_FILES["throughput_by_buffer"])) == 4
    assert len(read_plot_table(plain / PLOT_FILES["throughput_vs_rate"])) == 2


def test_plot_command_renders_svg(tmp_path):
    cli.main(["sweep", "--rates", "40,80", "--buffers", "50", "--duration", "4", "--out", str(tmp_path)])
    svg_dir = tmp_path / "svg"
    assert cli.main(["plot", str(tmp_path), "--out", str(svg_dir)]) == 0
    files = sorted(svg_dir.glob("*.svg"))
    assert len(files) == 4
    assert files[0].read_text().startswith("<svg")


def test_throughput_never_exceeds_capacity():
    res = sweep(default_config(duration_s=12), rates=(100, 200), buffers=(10, 100))
    for (rate, buf), cell in res.cells.items():
        assert cell.error is None
        assert cell.throughput <= 160 * 1.01


def _separable_rows(n=240, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        tput = float(rng.integers(1, 160))
        rows.append(MetricsRow(float(i), "f", tput + 5, int(rng.choice([10, 50, 100])), tput,
                               0.4 if tput < 80 else 1.6))
    return rows


def test_train_separable_dataset(tmp_path):
    data = tmp_path / "sep.csv"
    export_csv(_separable_rows(), data)
    out = tmp_path / "out"
    assert cli.main(["train", str(data), "--out", str(out), "--num-runs", "1"]) == 0
    lines = (out / "report.txt").read_text().splitlines()
    assert lines[0].startswith("Mean SVM Accuracy: ")
    assert lines[1].startswith("Mean Decision Tree Accuracy: ")
    assert lines[2].startswith("Mean MLP Accuracy: ")
    assert lines[-1].startswith("Accuracy on Validation Set: ")
    for line in lines[:3]:
        assert float(line.rsplit(": ", 1)[1]) >= 0.95
    assert sorted(p.suffix for p in out.glob("*.json")) == [".json"] * 4


def test_train_single_class_exits_3(tmp_path, capsys):
    rows = [r for r in _separable_rows() if r.avg_latency <= 1.0]
    data = tmp_path / "low.csv"
    export_csv(rows, data)
    assert cli.main(["train", str(data), "--out", str(tmp_path / "o"), "--num-runs", "1"]) == 3
    assert "single class" in capsys.readouterr().err


def test_train_missing_column_exits_2(tmp_path):
    p = tmp_path / "cols.csv"
    p.write_text("window_start,flow_id\n0,f\n")
    assert cli.main(["train", str(p), "--out", str(tmp_path / "o")]) == 2


def test_train_report_rejects_single_class():
    rows = [MetricsRow(float(i), "f", 10.0, 50, 9.0, 0.5) for i in range(20)]
    with pytest.raises(SingleClassData):
        train_report(Dataset(rows), num_runs=1)


def test_fairness_single_subflow_exits_2(tmp_path):
    data = fairness_config(duration_s=10).to_dict()
    data["flows"] = data["flows"][:1]
    assert cli.main(["fairness", "--config", str(write_json(tmp_path / "one.json", data))]) == 2
    with pytest.raises(NoSharedBottleneck):
        fairness_comparison(config_from_dict(data))


def test_fairness_report_rows_and_coupled_index(tmp_path, capsys):
    cfg = write_json(tmp_path / "f.json", fairness_config(duration_s=30).to_dict())
    out = tmp_path / "fair.csv"
    assert cli.main(["fairness", "--config", str(cfg), "--out", str(out)]) == 0
    with out.open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3 * 2
    assert {r["algorithm"] for r in rows} == {"bbr", "coupled", "coupled_ml"}
    coupled = {float(r["jain_index"]) for r in rows if r["algorithm"] == "coupled"}
    assert len(coupled) == 1 and coupled.pop() >= 0.95
    assert capsys.readouterr().out.count("Jain index") == 3


def test_default_advisor_is_cached_and_returns_classes():
    adv = default_advisor()
    assert adv is default_advisor()
    preds = [adv(50, t) for t in (5.0, 150.0)]
    assert all(isinstance(p, LatencyClass) for p in preds)


def test_csv_header_matches_columns(tmp_path):
    cfg = write_json(tmp_path / "c.json", two_flow_config(duration=3))
    out = tmp_path / "m.csv"
    cli.main(["simulate", "--config", str(cfg), "--out", str(out)])
    assert out.read_text().splitlines()[0].split(",") == list(CSV_COLUMNS)

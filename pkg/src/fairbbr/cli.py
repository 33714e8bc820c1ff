"""fairbbr command line: simulate, sweep, dataset, train, fairness, plot."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .measurement import ParseError, export_csv, import_csv
from .ml import SingleClassData
from .scenario import (ConfigValidationError, default_config, fairness_config, load_config, run_scenario,
                       with_overrides)
from .simcore import ConfigError

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_DATA = 3

log = logging.getLogger("fairbbr")


def _setup_logging() -> None:
    level = os.environ.get("FAIRBBR_LOG", "error").strip().lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), format="%(levelname)s %(name)s: %(message)s")


def _float_list(text: str) -> list:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return [int(v) if v == int(v) else v for v in values]


def _int_list(text: str) -> list:
    values = _float_list(text)
    if any(v != int(v) or v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return [int(v) for v in values]


def _config(args, fallback):
    cfg = load_config(args.config) if args.config else fallback()
    return with_overrides(cfg, seed=args.seed, alpha_mode=getattr(args, "alpha_mode", None),
                          rtt_prime=getattr(args, "rtt_prime", None),
                          algorithm=getattr(args, "algorithm", None))


def cmd_simulate(args) -> int:
    cfg = _config(args, default_config)
    res = run_scenario(cfg)
    if args.out:
        export_csv(res.rows, args.out)
    print(res.stats.summary())
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .experiments import DEFAULT_BUFFERS, DEFAULT_RATES, sweep, write_sweep
    cfg = _config(args, default_config)
    result = sweep(cfg, args.rates or DEFAULT_RATES, args.buffers or DEFAULT_BUFFERS,
                   duration_s=args.duration, jobs=args.jobs)
    write_sweep(result, args.out, svg=args.svg)
    print(f"cells: {len(result.cells)} failed: {len(result.failures)}")
    for c in result.failures:
        print(f"failed rate={c.send_rate:g} buffer={c.buffer_pkts}: {c.error}", file=sys.stderr)
    return EXIT_OK


def cmd_dataset(args) -> int:
    from .experiments import DEFAULT_BUFFERS, DEFAULT_RATES, sweep
    cfg = _config(args, default_config)
    result = sweep(cfg, args.rates or DEFAULT_RATES, args.buffers or DEFAULT_BUFFERS,
                   duration_s=args.duration, jobs=args.jobs)
    rows = result.rows()
    export_csv(rows, args.out)
    print(f"rows: {len(rows)} labelled: {len(result.dataset())}")
    return EXIT_OK


def cmd_train(args) -> int:
    from .experiments import train_report, write_artifacts
    ds = import_csv(args.data, strict=args.strict_csv)
    if ds.skipped:
        log.warning("skipped %d malformed rows", ds.skipped)
    report = train_report(ds, seed=args.seed or 0, k=args.k, num_runs=args.num_runs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report.text(), encoding="utf-8")
    write_artifacts(report, out)
    sys.stdout.write(report.text())
    return EXIT_OK


def cmd_fairness(args) -> int:
    from .experiments import fairness_comparison
    cfg = _config(args, fairness_config)
    report = fairness_comparison(cfg)
    if args.out:
        report.write_csv(args.out)
    for alg, j in report.jain.items():
        print(f"{alg}: Jain index {j}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .experiments import read_plot_table
    from .svg import line_chart_from_table
    src = Path(args.input)
    inputs = sorted(src.glob("fig_*.csv")) if src.is_dir() else [src]
    if not inputs:
        raise FileNotFoundError(f"no plot-data files in {src}")
    out_dir = Path(args.out) if args.out else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for p in inputs:
        table = read_plot_table(p)
        ylabel = "avg latency (s)" if "latency" in p.stem else "throughput (msg/s)"
        svg = line_chart_from_table(table, title=p.stem, xlabel="send rate (msg/s)", ylabel=ylabel)
        target = (out_dir / p.with_suffix(".svg").name) if out_dir else p.with_suffix(".svg")
        target.write_text(svg, encoding="utf-8")
        print(target)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairbbr", description="Coupled BBR simulation and latency models")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None)

    def algo(p):
        p.add_argument("--alpha-mode", choices=["as_printed", "per_subflow"], default=None)
        p.add_argument("--rtt-prime", choices=["max", "min"], default=None)

    def grid(p):
        p.add_argument("--rates", type=_float_list, default=None, help="send rates, msg/s, comma-separated")
        p.add_argument("--buffers", type=_int_list, default=None, help="buffer sizes, packets, comma-separated")
        p.add_argument("--duration", type=float, default=None, help="seconds per cell")
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("simulate", help="run one scenario and write per-window metrics")
    common(p)
    algo(p)
    p.add_argument("--algorithm", choices=["bbr", "coupled", "coupled_ml"], default=None)
    p.add_argument("--out", help="metrics CSV path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="send-rate x buffer-size sweep with plot data")
    common(p)
    grid(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--svg", action="store_true", help="also render SVG charts")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dataset", help="sweep and write all windows as one CSV")
    common(p)
    grid(p)
    p.add_argument("--out", required=True, help="dataset CSV path")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="cross-validate classifiers and fit the regressor")
    common(p, config=False)
    p.add_argument("data", help="dataset CSV")
    p.add_argument("--out", required=True, help="directory for report.txt and model JSON")
    p.add_argument("--strict-csv", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--num-runs", type=int, default=10)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fairness", help="compare bbr, coupled and coupled_ml on one scenario")
    common(p)
    algo(p)
    p.add_argument("--out", help="fairness report CSV path")
    p.set_defaults(func=cmd_fairness)

    p = sub.add_parser("plot", help="render SVG charts from plot-data CSVs")
    p.add_argument("input", help="plot-data CSV or a sweep output directory")
    p.add_argument("--out", help="directory for SVG files (default: next to the input)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SingleClassData as exc:
        print(f"error: single class: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigValidationError, ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

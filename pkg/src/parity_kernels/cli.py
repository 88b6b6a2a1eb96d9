"""Command-line entry point: dataset generation, single-config runs, sweeps.

Experiments are defined by JSON config files; flags only carry paths, worker
count, and verbosity. Exit codes: 0 success, 1 validation error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__, rng
from .datagen import GeneratorConfig, apply_label_noise, assign_parity_labels, \
    generate_features, save_dataset
from .experiments import ConfigError, ErrorRecord, aggregate, config_from_dict, \
    format_summary_table, records_to_csv, run_cells, summary_to_json, sweep_cells, CellKey

OUT_DIR_ENV = "PARITY_KERNELS_OUT"
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

log = logging.getLogger("parity_kernels")


def _load_json(path: Path) -> dict:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config {path} is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from exc


def _generator_config(data: dict) -> GeneratorConfig:
    if not isinstance(data, dict):
        raise ConfigError("generator config must be a JSON object")
    try:
        return GeneratorConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _experiment_config(data: dict):
    if "experiment" not in data:
        raise ConfigError("config must contain an 'experiment' object")
    return config_from_dict(data["experiment"])


def _validate_cells(config, n_values) -> None:
    """Construct one GeneratorConfig per (n, sample size) so invariant violations
    surface before any side effects."""
    from .experiments import _cell_generator_config

    try:
        for n in n_values:
            for method in config.methods:
                _cell_generator_config(config, CellKey(int(n), config.flip_y, 0, method))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_DIR_ENV) or "runs"
    return Path(out)


def _write_outputs(records, out_dir: Path) -> int:
    records_to_csv(records, out_dir / "records.csv")
    summary = aggregate(records)
    (out_dir / "summary.json").write_text(summary_to_json(summary) + "\n")
    table = format_summary_table(summary)
    (out_dir / "summary.txt").write_text(table)
    print(table, end="")
    failures = sum(isinstance(r, ErrorRecord) for r in records)
    if failures:
        log.error("%d cell(s) failed; see records.jsonl for messages", failures)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_generate(args) -> int:
    config = _generator_config(_load_json(Path(args.config)))
    out_dir = _out_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = generate_features(config)
    dataset = assign_parity_labels(dataset)
    dataset = apply_label_noise(
        dataset, config.flip_y, rng.derive_seed(config.seed, rng.LABEL_NOISE)
    )
    csv_path = out_dir / "dataset.csv"
    meta_path = save_dataset(dataset, csv_path)
    log.info("wrote %s and %s", csv_path, meta_path)
    print(f"dataset: {csv_path}\nmetadata: {meta_path}")
    return EXIT_OK


def cmd_run(args) -> int:
    data = _load_json(Path(args.config))
    config = _experiment_config(data)
    _validate_cells(config, [config.n_informative])
    cells = [
        CellKey(config.n_informative, config.flip_y, seed, method)
        for seed in config.seeds
        for method in config.methods
    ]
    out_dir = _out_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    log.info("running %d cells with %d worker(s)", len(cells), args.workers)
    records = run_cells(config, cells, workers=args.workers,
                        record_path=out_dir / "records.jsonl")
    return _write_outputs(records, out_dir)


def cmd_sweep(args) -> int:
    data = _load_json(Path(args.config))
    config = _experiment_config(data)
    for key in ("n_values", "noise_values"):
        if key not in data or not data[key]:
            raise ConfigError(f"sweep config must provide a nonempty '{key}' list")
    n_values = [int(n) for n in data["n_values"]]
    noise_values = [float(v) for v in data["noise_values"]]
    _validate_cells(config, n_values)
    cells = sweep_cells(config, n_values, noise_values)
    out_dir = _out_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    log.info("sweeping %d cells with %d worker(s)", len(cells), args.workers)
    records = run_cells(config, cells, workers=args.workers,
                        record_path=out_dir / "records.jsonl")
    return _write_outputs(records, out_dir)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parity-kernels",
        description="Quantum fidelity kernels vs classical kernels on parity benchmarks.",
    )
    parser.add_argument("--version", action="version", version=f"parity-kernels {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for info, -vv for debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate one dataset (CSV + JSON sidecar)")
    p_gen.add_argument("--config", required=True, help="GeneratorConfig JSON file")
    p_gen.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or ./runs)")
    p_gen.set_defaults(func=cmd_generate)

    p_run = sub.add_parser("run", help="run one experiment config over all seeds")
    p_run.add_argument("--config", required=True, help="experiment JSON file")
    p_run.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or ./runs)")
    p_run.add_argument("--workers", type=int, default=1, help="parallel cell workers")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a complexity/noise sweep (resumable)")
    p_sweep.add_argument("--config", required=True, help="sweep JSON file")
    p_sweep.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or ./runs)")
    p_sweep.add_argument("--workers", type=int, default=1, help="parallel cell workers")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING
    if args.verbose == 1:
        level = logging.INFO
    elif args.verbose >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # runtime failure, not a config problem
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Experiment orchestration: single-configuration runs, complexity/noise sweeps,
and mean/std aggregation.

Every cell (n, noise, seed, method) derives its RNG streams from its own key
tuple, so cells are independent, resumable, and identical regardless of worker
count or scheduling.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import encoding, rng
from . import svm as svm_mod
from .datagen import Dataset, GeneratorConfig, apply_label_noise, assign_parity_labels, \
    generate_features, stratified_split
from .kernels import cross_gram, gram, kta, linear_spec, poly_spec, quantum_spec, rbf_spec
from .qsim import FeatureMapConfig, StateCache
from .svm import GridSpec, cross_validate, predict, train

METHODS = ("linear_svc", "rbf_continuous", "rbf_binary", "poly_binary_d11", "quantum_zz")
_BINARY_METHODS = frozenset({"rbf_binary", "poly_binary_d11", "quantum_zz"})
_KTA_METHODS = frozenset({"rbf_binary", "rbf_continuous", "quantum_zz"})

CLASSICAL_C = (0.1, 1.0, 10.0, 100.0, 1000.0)
QUANTUM_C = (1.0, 10.0, 100.0, 1000.0, 10000.0)
RBF_GAMMA_BASE = (0.001, 0.01, 0.1, 1.0, 10.0)
POLY_DEGREE = 11
POLY_OFFSETS = (0.0, 1.0, 10.0)

# Stage tags feeding rng.derive_seed; distinct per pipeline stage.
_DATA_STAGE = 101
_NOISE_STAGE = 102
_SPLIT_STAGE = 103
_FOLD_STAGE = 104

_CSV_COLUMNS = ("n_informative", "flip_y", "seed", "method", "n_samples",
                "test_accuracy", "kta", "params")

# Prepared quantum states are reused across cells within a process.
_STATE_CACHE = StateCache()


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


class ExperimentError(RuntimeError):
    """Stage failure annotated with stage name, seed, and method."""


@dataclass(frozen=True)
class GeneratorBase:
    """Generator parameters shared by every cell (seed and parity order vary per cell)."""

    n_samples: int = 800
    n_features: int = 500
    n_redundant: int = 20
    clusters_per_class: int = 16
    class_sep: float = 0.25


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorBase = field(default_factory=GeneratorBase)
    n_informative: int = 11
    flip_y: float = 0.22
    reps: int = 3
    methods: tuple[str, ...] = METHODS
    seeds: tuple[int, ...] = tuple(range(10))
    test_fraction: float = 0.3
    folds: int = 5
    sample_sizes: Mapping[str, int] | None = None

    def __post_init__(self) -> None:
        if not self.methods:
            raise ConfigError("methods must be nonempty")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; known: {list(METHODS)}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if not 0.0 <= self.flip_y <= 1.0:
            raise ConfigError(f"flip_y must be in [0, 1], got {self.flip_y}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if self.sample_sizes:
            unknown = [m for m in self.sample_sizes if m not in METHODS]
            if unknown:
                raise ConfigError(f"sample_sizes names unknown methods {unknown}")

    def sample_size_for(self, method: str) -> int:
        if self.sample_sizes and method in self.sample_sizes:
            return int(self.sample_sizes[method])
        return self.generator.n_samples


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validated ExperimentConfig from parsed JSON; rejects unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"experiment config must be an object, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    kwargs = dict(data)
    if "generator" in kwargs:
        gen = kwargs["generator"]
        gen_known = {f.name for f in dataclasses.fields(GeneratorBase)}
        gen_unknown = set(gen) - gen_known
        if gen_unknown:
            raise ConfigError(f"unknown generator fields {sorted(gen_unknown)}")
        kwargs["generator"] = GeneratorBase(**gen)
    for key in ("methods", "seeds"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class CellKey:
    n_informative: int
    flip_y: float
    seed: int
    method: str

    def sort_key(self):
        return (self.n_informative, self.flip_y, self.seed, self.method)


@dataclass(frozen=True)
class RunRecord:
    seed: int
    method: str
    n_informative: int
    flip_y: float
    n_samples: int
    test_accuracy: float
    kta: float | None
    params: dict
    wall_time: float

    def key(self) -> CellKey:
        return CellKey(self.n_informative, self.flip_y, self.seed, self.method)


@dataclass(frozen=True)
class ErrorRecord:
    seed: int
    method: str
    n_informative: int
    flip_y: float
    message: str

    def key(self) -> CellKey:
        return CellKey(self.n_informative, self.flip_y, self.seed, self.method)


@contextmanager
def _stage(name: str, seed: int, method: str):
    try:
        yield
    except ExperimentError:
        raise
    except Exception as exc:
        raise ExperimentError(f"[stage={name} seed={seed} method={method}] {exc}") from exc


def _cell_generator_config(config: ExperimentConfig, key: CellKey) -> GeneratorConfig:
    n_samples = config.sample_size_for(key.method)
    gen = config.generator
    data_seed = rng.derive_seed(
        key.seed, key.n_informative, rng.float_key(key.flip_y), n_samples, _DATA_STAGE
    )
    return GeneratorConfig(
        n_samples=n_samples,
        n_features=gen.n_features,
        n_informative=key.n_informative,
        n_redundant=gen.n_redundant,
        clusters_per_class=gen.clusters_per_class,
        class_sep=gen.class_sep,
        flip_y=key.flip_y,
        seed=data_seed,
    )


def _build_dataset(config: ExperimentConfig, key: CellKey) -> tuple[Dataset, np.ndarray, np.ndarray]:
    gen_cfg = _cell_generator_config(config, key)
    stage_keys = (key.seed, key.n_informative, rng.float_key(key.flip_y), gen_cfg.n_samples)
    dataset = generate_features(gen_cfg)
    dataset = assign_parity_labels(dataset)
    dataset = apply_label_noise(
        dataset, key.flip_y, rng.derive_seed(*stage_keys, _NOISE_STAGE)
    )
    split = stratified_split(
        dataset, config.test_fraction, rng.derive_seed(*stage_keys, _SPLIT_STAGE)
    )
    return dataset, split.train_idx, split.test_idx


def scale_gamma(X_train: np.ndarray) -> float | None:
    """The 1/(d * var) bandwidth heuristic; None for a constant training view."""
    var = float(X_train.var())
    if var <= 0:
        return None
    return 1.0 / (X_train.shape[1] * var)


def _rbf_gammas(X_train: np.ndarray) -> tuple[float, ...]:
    """Fixed grid plus the scale heuristic on the training view."""
    gammas = set(RBF_GAMMA_BASE)
    scaled = scale_gamma(X_train)
    if scaled is not None:
        gammas.add(scaled)
    return tuple(sorted(gammas))


def _method_problem(method: str, X_train, X_test, reps: int, n_informative: int):
    """Grid, training Gram(s), a test-Gram builder, and the Gram used for the
    recorded kernel-target alignment (None when alignment is not reported).

    RBF alignment is evaluated at the deterministic scale-gamma bandwidth so
    the reported value does not inherit the noise of hyperparameter selection
    among statistically tied grid cells.
    """
    if method == "linear_svc":
        spec = linear_spec()
        return (
            GridSpec(C_values=CLASSICAL_C),
            gram(X_train, spec),
            lambda params: cross_gram(X_test, X_train, spec),
            None,
        )
    if method in ("rbf_continuous", "rbf_binary"):
        gammas = _rbf_gammas(X_train)
        grams = {g: gram(X_train, rbf_spec(g)) for g in gammas}
        scaled = scale_gamma(X_train)
        return (
            GridSpec(C_values=CLASSICAL_C, gamma_values=gammas),
            grams,
            lambda params: cross_gram(X_test, X_train, rbf_spec(params["gamma"])),
            grams[scaled] if scaled is not None else None,
        )
    if method == "poly_binary_d11":
        grams = {c: gram(X_train, poly_spec(POLY_DEGREE, c)) for c in POLY_OFFSETS}
        return (
            GridSpec(C_values=CLASSICAL_C, offset_values=POLY_OFFSETS),
            grams,
            lambda params: cross_gram(X_test, X_train, poly_spec(POLY_DEGREE, params["offset"])),
            None,
        )
    if method == "quantum_zz":
        spec = quantum_spec(FeatureMapConfig(n_qubits=n_informative, reps=reps))
        K_train = gram(X_train, spec, cache=_STATE_CACHE)
        return (
            GridSpec(C_values=QUANTUM_C),
            K_train,
            lambda params: cross_gram(X_test, X_train, spec, cache=_STATE_CACHE),
            K_train,
        )
    raise ValueError(f"unknown method {method!r}")


def run_cell(config: ExperimentConfig, key: CellKey) -> RunRecord:
    """Full pipeline for one (n, noise, seed, method) cell."""
    t_start = time.perf_counter()
    seed, method = key.seed, key.method

    with _stage("generate", seed, method):
        dataset, train_idx, test_idx = _build_dataset(config, key)
        y = dataset.labels
        y_train, y_test = y[train_idx], y[test_idx]

    with _stage("encode", seed, method):
        view = encoding.select_informative(dataset)
        raw_train, raw_test = view[train_idx], view[test_idx]
        if method in _BINARY_METHODS:
            thresholds = encoding.fit_thresholds(raw_train)
            X_train = encoding.encode_binary(raw_train, thresholds)
            X_test = encoding.encode_binary(raw_test, thresholds)
        else:
            scaler = encoding.fit_scaler(raw_train)
            X_train = encoding.scale_minmax(raw_train, scaler)
            X_test = encoding.scale_minmax(raw_test, scaler)

    with _stage("gram", seed, method):
        grid, train_grams, test_gram_for, kta_gram = _method_problem(
            method, X_train, X_test, config.reps, key.n_informative
        )

    with _stage("cross_validate", seed, method):
        stage_keys = (seed, key.n_informative, rng.float_key(key.flip_y),
                      config.sample_size_for(method))
        plan = svm_mod.make_cv_plan(
            y_train, config.folds, rng.derive_seed(*stage_keys, _FOLD_STAGE)
        )
        cv = cross_validate(train_grams, y_train, grid, plan)

    with _stage("train", seed, method):
        if isinstance(train_grams, dict):
            param_name = "gamma" if "gamma" in cv.best_params else "offset"
            K_train = train_grams[cv.best_params[param_name]]
        else:
            K_train = train_grams
        model = train(K_train, y_train, cv.best_params["C"])

    with _stage("predict", seed, method):
        K_test = test_gram_for(cv.best_params)
        labels, _ = predict(model, K_test)
        accuracy = float(np.mean(labels == np.where(y_test > 0, 1.0, -1.0)))

    kta_value = None
    if method in _KTA_METHODS and kta_gram is not None:
        with _stage("kta", seed, method):
            kta_value = kta(kta_gram, y_train)

    return RunRecord(
        seed=seed,
        method=method,
        n_informative=key.n_informative,
        flip_y=key.flip_y,
        n_samples=config.sample_size_for(method),
        test_accuracy=accuracy,
        kta=kta_value,
        params=dict(cv.best_params),
        wall_time=time.perf_counter() - t_start,
    )


def run_single(config: ExperimentConfig, seed: int) -> list[RunRecord]:
    """One record per configured method at the config's n and noise level."""
    return [
        run_cell(config, CellKey(config.n_informative, config.flip_y, seed, method))
        for method in config.methods
    ]


def _cell_worker(args: tuple[ExperimentConfig, CellKey]) -> RunRecord | ErrorRecord:
    config, key = args
    try:
        return run_cell(config, key)
    except Exception as exc:
        return ErrorRecord(
            seed=key.seed,
            method=key.method,
            n_informative=key.n_informative,
            flip_y=key.flip_y,
            message=str(exc),
        )


def _record_to_json(record: RunRecord | ErrorRecord) -> str:
    payload = dataclasses.asdict(record)
    payload["kind"] = "error" if isinstance(record, ErrorRecord) else "run"
    return json.dumps(payload, sort_keys=True)


def _record_from_json(line: str) -> RunRecord | ErrorRecord:
    payload = json.loads(line)
    kind = payload.pop("kind")
    if kind == "error":
        return ErrorRecord(**payload)
    return RunRecord(**payload)


def load_records(path: str | Path) -> list[RunRecord | ErrorRecord]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(_record_from_json(line))
    return records


def run_cells(
    config: ExperimentConfig,
    cells: Sequence[CellKey],
    workers: int = 1,
    record_path: str | Path | None = None,
) -> list[RunRecord | ErrorRecord]:
    """Execute cells, streaming JSONL records for crash-safe resume.

    Cells whose keys already appear in ``record_path`` are skipped (idempotent
    resume); results are returned for the full cell set, sorted canonically.
    """
    existing: dict[CellKey, RunRecord | ErrorRecord] = {}
    if record_path is not None and Path(record_path).exists():
        for record in load_records(record_path):
            existing[record.key()] = record

    pending = [key for key in cells if key not in existing]
    sink = open(record_path, "a") if record_path is not None else None
    results: list[RunRecord | ErrorRecord] = [existing[k] for k in cells if k in existing]
    try:
        args = [(config, key) for key in pending]
        if workers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                outcomes = pool.map(_cell_worker, args)
                for record in outcomes:
                    results.append(record)
                    if sink is not None:
                        sink.write(_record_to_json(record) + "\n")
                        sink.flush()
        else:
            for arg in args:
                record = _cell_worker(arg)
                results.append(record)
                if sink is not None:
                    sink.write(_record_to_json(record) + "\n")
                    sink.flush()
    finally:
        if sink is not None:
            sink.close()
    results.sort(key=lambda r: r.key().sort_key())
    return results


def sweep_cells(
    config: ExperimentConfig,
    n_values: Sequence[int],
    noise_values: Sequence[float],
    seeds: Sequence[int] | None = None,
) -> list[CellKey]:
    if not n_values or not noise_values:
        raise ConfigError("n_values and noise_values must be nonempty")
    seeds = config.seeds if seeds is None else tuple(seeds)
    return [
        CellKey(int(n), float(noise), int(seed), method)
        for n in n_values
        for noise in noise_values
        for seed in seeds
        for method in config.methods
    ]


def run_sweep(
    config: ExperimentConfig,
    n_values: Sequence[int],
    noise_values: Sequence[float],
    seeds: Sequence[int] | None = None,
    workers: int = 1,
    record_path: str | Path | None = None,
) -> list[RunRecord | ErrorRecord]:
    """Cartesian sweep over (n, noise, seed, method); failed cells become error records."""
    cells = sweep_cells(config, n_values, noise_values, seeds)
    return run_cells(config, cells, workers=workers, record_path=record_path)


@dataclass(frozen=True)
class GroupStat:
    method: str
    n_informative: int
    flip_y: float
    mean_accuracy: float
    std_accuracy: float
    count: int
    mean_kta: float | None
    std_kta: float | None
    single_seed: bool


@dataclass(frozen=True)
class GapStat:
    n_informative: int
    flip_y: float
    gap: float


@dataclass(frozen=True)
class Summary:
    groups: tuple[GroupStat, ...]
    gaps: tuple[GapStat, ...]
    excluded_errors: int

    def group(self, method: str, n_informative: int | None = None,
              flip_y: float | None = None) -> GroupStat:
        matches = [
            g for g in self.groups
            if g.method == method
            and (n_informative is None or g.n_informative == n_informative)
            and (flip_y is None or g.flip_y == flip_y)
        ]
        if len(matches) != 1:
            raise KeyError(f"{len(matches)} groups match ({method}, {n_informative}, {flip_y})")
        return matches[0]


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1))


def aggregate(records: Iterable[RunRecord | ErrorRecord]) -> Summary:
    """Per-(method, n, noise) means and sample stds, plus quantum-vs-binary-RBF gaps."""
    records = list(records)
    if not records:
        raise ValueError("cannot aggregate an empty record set")
    runs = [r for r in records if isinstance(r, RunRecord)]
    errors = len(records) - len(runs)

    grouped: dict[tuple, list[RunRecord]] = {}
    for record in runs:
        grouped.setdefault((record.n_informative, record.flip_y, record.method), []).append(record)

    groups = []
    for (n, noise, method), cell_records in sorted(grouped.items(), key=lambda kv: kv[0]):
        accs = [r.test_accuracy for r in cell_records]
        mean_acc, std_acc = _mean_std(accs)
        ktas = [r.kta for r in cell_records if r.kta is not None]
        mean_kta, std_kta = _mean_std(ktas) if ktas else (None, None)
        groups.append(GroupStat(
            method=method,
            n_informative=n,
            flip_y=noise,
            mean_accuracy=mean_acc,
            std_accuracy=std_acc,
            count=len(accs),
            mean_kta=mean_kta,
            std_kta=std_kta,
            single_seed=len(accs) == 1,
        ))

    by_cell = {(g.n_informative, g.flip_y, g.method): g for g in groups}
    gaps = []
    for (n, noise, method) in sorted(by_cell):
        if method != "quantum_zz":
            continue
        other = by_cell.get((n, noise, "rbf_binary"))
        if other is not None:
            gaps.append(GapStat(
                n_informative=n,
                flip_y=noise,
                gap=by_cell[(n, noise, method)].mean_accuracy - other.mean_accuracy,
            ))
    return Summary(groups=tuple(groups), gaps=tuple(gaps), excluded_errors=errors)


def _format_float(value: float) -> str:
    return "%.17g" % value


def records_to_csv(records: Iterable[RunRecord | ErrorRecord], path: str | Path) -> None:
    """Canonical record CSV: sorted by cell key, 17-significant-digit floats.

    Wall times stay in the JSONL stream only, so reruns of the same config are
    byte-identical here.
    """
    runs = sorted(
        (r for r in records if isinstance(r, RunRecord)),
        key=lambda r: r.key().sort_key(),
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for r in runs:
            writer.writerow([
                r.n_informative,
                _format_float(r.flip_y),
                r.seed,
                r.method,
                r.n_samples,
                _format_float(r.test_accuracy),
                "" if r.kta is None else _format_float(r.kta),
                json.dumps(r.params, sort_keys=True),
            ])


def summary_to_json(summary: Summary) -> str:
    payload = {
        "groups": [dataclasses.asdict(g) for g in summary.groups],
        "gaps": [dataclasses.asdict(g) for g in summary.gaps],
        "excluded_errors": summary.excluded_errors,
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def format_summary_table(summary: Summary) -> str:
    """Aligned text table of accuracies, KTA, and quantum-vs-binary-RBF gaps."""
    lines = [
        f"{'method':<18} {'n':>3} {'noise':>6} {'accuracy (mean +- std)':>24} "
        f"{'KTA (mean +- std)':>22} {'seeds':>6}"
    ]
    for g in summary.groups:
        acc = f"{g.mean_accuracy:.3f} +- {g.std_accuracy:.3f}"
        kta_txt = "-" if g.mean_kta is None else f"{g.mean_kta:.3f} +- {g.std_kta:.3f}"
        flag = "*" if g.single_seed else ""
        lines.append(
            f"{g.method:<18} {g.n_informative:>3} {g.flip_y:>6.2f} {acc:>24} "
            f"{kta_txt:>22} {g.count:>5}{flag}"
        )
    if summary.gaps:
        lines.append("")
        lines.append("gap (quantum_zz - rbf_binary):")
        for gap in summary.gaps:
            lines.append(
                f"  n={gap.n_informative} noise={gap.flip_y:.2f}: {gap.gap:+.3f}"
            )
    if summary.excluded_errors:
        lines.append("")
        lines.append(f"excluded error records: {summary.excluded_errors}")
    lines.append("")
    return "\n".join(lines)

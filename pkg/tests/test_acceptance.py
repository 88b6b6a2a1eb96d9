"""Acceptance suite: one test per criterion, printing a PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s`. The headline and sweep
fixtures execute the full experiment pipeline and are shared across criteria.
"""

import time
from types import SimpleNamespace

import numpy as np
import pytest

from conftest import random_psd_kernel
from qp_reference import solve_dual_qp

from parity_kernels import experiments as exp
from parity_kernels.kernels import gram, linear_spec, poly_spec, quantum_spec, rbf_spec
from parity_kernels.qsim import FeatureMapConfig, dense_reference_state, fidelity, prepare_state
from parity_kernels.svm import dual_objective, kkt_residual, train

PI = np.pi


def criterion(num: int, description: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"\n[criterion {num}] {status}: {description}{suffix}")
    assert ok, f"criterion {num} failed: {description}{suffix}"


def _mean(records, method, field="test_accuracy", n=None):
    values = [
        getattr(r, field) for r in records
        if isinstance(r, exp.RunRecord) and r.method == method
        and (n is None or r.n_informative == n)
    ]
    assert values, f"no records for {method}"
    return float(np.mean(values))


@pytest.fixture(scope="session")
def headline_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("table2_w1")
    config = exp.ExperimentConfig()
    cells = [
        exp.CellKey(config.n_informative, config.flip_y, seed, method)
        for seed in config.seeds
        for method in config.methods
    ]
    start = time.perf_counter()
    records = exp.run_cells(config, cells, workers=1, record_path=out / "records.jsonl")
    elapsed = time.perf_counter() - start
    csv_path = out / "records.csv"
    exp.records_to_csv(records, csv_path)
    assert not any(isinstance(r, exp.ErrorRecord) for r in records)
    return SimpleNamespace(records=records, csv_path=csv_path, elapsed=elapsed)


@pytest.fixture(scope="session")
def headline_run_workers8(tmp_path_factory):
    out = tmp_path_factory.mktemp("table2_w8")
    config = exp.ExperimentConfig()
    cells = [
        exp.CellKey(config.n_informative, config.flip_y, seed, method)
        for seed in config.seeds
        for method in config.methods
    ]
    records = exp.run_cells(config, cells, workers=8, record_path=out / "records.jsonl")
    csv_path = out / "records.csv"
    exp.records_to_csv(records, csv_path)
    return SimpleNamespace(records=records, csv_path=csv_path)


@pytest.fixture(scope="session")
def sweep_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("table1")
    config = exp.ExperimentConfig(methods=("rbf_binary", "quantum_zz"), seeds=tuple(range(5)))
    records = exp.run_sweep(
        config, n_values=[7, 8, 9, 10, 11], noise_values=[0.30],
        record_path=out / "records.jsonl",
    )
    assert not any(isinstance(r, exp.ErrorRecord) for r in records)
    return records


def test_criterion_1_simulator_oracle_equivalence():
    start = time.perf_counter()
    r = np.random.default_rng(101)
    worst_amp = 0.0
    worst_fid = 0.0
    for n in (1, 2, 3):
        for reps in (1, 2, 3):
            config = FeatureMapConfig(n_qubits=n, reps=reps)
            for kind in ("continuous", "binary"):
                if kind == "continuous":
                    inputs = r.uniform(0, 2 * PI, size=(100, n))
                else:
                    inputs = np.where(r.random((100, n)) < 0.5, 0.0, PI)
                fast = np.stack([prepare_state(x, config).amplitudes for x in inputs])
                dense = np.stack([dense_reference_state(x, config).amplitudes for x in inputs])
                worst_amp = max(worst_amp, float(np.abs(fast - dense).max()))
                fid_fast = np.abs(fast.conj() @ fast.T) ** 2
                fid_dense = np.abs(dense.conj() @ dense.T) ** 2
                worst_fid = max(worst_fid, float(np.abs(fid_fast - fid_dense).max()))
    elapsed = time.perf_counter() - start
    criterion(
        1,
        "prepare_state matches the dense oracle for all (n, r) in {1,2,3}^2",
        worst_amp <= 1e-10 and worst_fid <= 1e-10 and elapsed < 10.0,
        f"max amplitude err {worst_amp:.2e}, max fidelity err {worst_fid:.2e}, {elapsed:.1f}s",
    )


def test_criterion_2_closed_form_fidelity():
    config = FeatureMapConfig(n_qubits=1, reps=1)
    grid = np.linspace(0.0, 2 * PI, 50)
    states = [prepare_state(np.array([v]), config) for v in grid]
    worst = 0.0
    for i, x in enumerate(grid):
        for j, y in enumerate(grid):
            observed = fidelity(states[i], states[j])
            worst = max(worst, abs(observed - np.cos(x - y) ** 2))
    criterion(2, "n=1, r=1 fidelity equals cos^2(x - y) on a 50-point grid",
              worst <= 1e-10, f"max deviation {worst:.2e}")


def test_criterion_3_gram_properties():
    r = np.random.default_rng(33)
    specs = [
        linear_spec(),
        rbf_spec(0.7),
        poly_spec(11, offset=1.0),
        quantum_spec(FeatureMapConfig(n_qubits=5, reps=3)),
    ]
    ok = True
    details = []
    for spec in specs:
        worst_sym, worst_diag, worst_eig = 0.0, 0.0, np.inf
        in_range = True
        for _ in range(10):
            if spec.kind == "quantum_zz":
                X = np.where(r.random((50, 5)) < 0.5, 0.0, PI)
            else:
                X = r.standard_normal((50, 5))
            K = gram(X, spec).values
            worst_sym = max(worst_sym, float(np.abs(K - K.T).max()))
            if spec.kind in ("quantum_zz", "rbf"):
                worst_diag = max(worst_diag, float(np.abs(np.diag(K) - 1.0).max()))
                in_range &= bool(K.min() >= 0.0 and K.max() <= 1.0)
            worst_eig = min(worst_eig, float(np.linalg.eigvalsh((K + K.T) / 2).min()))
        ok &= worst_sym <= 1e-12 and worst_diag <= 1e-10 and worst_eig >= -1e-8 and in_range
        details.append(f"{spec.kind}: sym {worst_sym:.1e}, min eig {worst_eig:.1e}")
    criterion(3, "square Grams symmetric, unit-diagonal, PSD, quantum in [0,1]",
              ok, "; ".join(details))


def test_criterion_4_svm_oracle():
    worst_rel = 0.0
    worst_residual = 0.0
    worst_eq = 0.0
    box_ok = True
    for trial in range(50):
        r = np.random.default_rng(4000 + trial)
        size = int(r.integers(5, 26))
        K = random_psd_kernel(r, size)
        y = np.where(r.random(size) < 0.5, 1.0, -1.0)
        if np.all(y == y[0]):
            y[0] = -y[0]
        C = float(r.choice([0.5, 1.0, 10.0, 100.0]))
        model = train(K, y, C)
        ref = solve_dual_qp(K, y, C)
        obj_smo = dual_objective(K, y, model.alpha)
        obj_ref = dual_objective(K, y, ref)
        rel = abs(obj_smo - obj_ref) / max(abs(obj_ref), 1e-12)
        worst_rel = max(worst_rel, rel)
        worst_residual = max(worst_residual, kkt_residual(model, K, y))
        worst_eq = max(worst_eq, abs(float((model.alpha * model.y_train).sum())))
        box_ok &= bool(model.alpha.min() >= 0.0 and model.alpha.max() <= C)
    criterion(
        4,
        "SMO matches the projected-gradient QP reference on 50 random problems",
        worst_rel <= 1e-4 and worst_residual <= 1e-3 and worst_eq <= 1e-6 and box_ok,
        f"worst rel obj {worst_rel:.2e}, worst KKT {worst_residual:.2e}, "
        f"worst |sum(a*y)| {worst_eq:.2e}",
    )


def test_criterion_5_noiseless_sanity():
    config = exp.ExperimentConfig(
        generator=exp.GeneratorBase(n_samples=400, n_features=20, n_redundant=4,
                                    clusters_per_class=2, class_sep=0.25),
        n_informative=2,
        flip_y=0.0,
        reps=3,
        methods=("quantum_zz", "linear_svc"),
        seeds=(0,),
    )
    quantum = exp.run_cell(config, exp.CellKey(2, 0.0, 0, "quantum_zz"))
    linear = exp.run_cell(config, exp.CellKey(2, 0.0, 0, "linear_svc"))
    criterion(
        5,
        "noiseless n=2: quantum_zz >= 0.95 and linear_svc <= 0.60",
        quantum.test_accuracy >= 0.95 and linear.test_accuracy <= 0.60,
        f"quantum {quantum.test_accuracy:.3f}, linear {linear.test_accuracy:.3f}; "
        "binary {0,pi} inputs with fewer than two below-median features share one "
        "statevector (single-qubit phase e^{i*pi*Z} is global, pairwise terms need "
        "two zeros), so the 2-feature XOR classes are not separable by this kernel",
    )


def test_criterion_6_headline_accuracy(headline_run):
    records = headline_run.records
    q = _mean(records, "quantum_zz")
    rb = _mean(records, "rbf_binary")
    lin = _mean(records, "linear_svc")
    rc = _mean(records, "rbf_continuous")
    poly = _mean(records, "poly_binary_d11")
    gap = q - rb
    ok = (
        q >= 0.60
        and rb <= 0.58
        and gap >= 0.06
        and 0.45 <= lin <= 0.55
        and 0.45 <= rc <= 0.55
        and 0.40 <= poly <= 0.60
        and headline_run.elapsed <= 1800.0
    )
    criterion(
        6,
        "headline accuracy pattern: quantum breaks out, classical methods near chance",
        ok,
        f"quantum {q:.3f}, rbf_binary {rb:.3f}, gap {gap:+.3f}, linear {lin:.3f}, "
        f"rbf_continuous {rc:.3f}, poly {poly:.3f}, runtime {headline_run.elapsed:.0f}s",
    )


def test_criterion_7_kta_ratio(headline_run):
    records = headline_run.records
    kta_q = _mean(records, "quantum_zz", field="kta")
    kta_rb = _mean(records, "rbf_binary", field="kta")
    kta_rc = _mean(records, "rbf_continuous", field="kta")
    ratio_binary = kta_q / kta_rb
    ratio_continuous = kta_q / kta_rc
    ratio = max(ratio_binary, ratio_continuous)
    criterion(
        7,
        "mean quantum KTA at least 4x the RBF KTA (binary or continuous features)",
        ratio >= 4.0,
        f"quantum {kta_q:.4f}; rbf_binary {kta_rb:.4f} (ratio {ratio_binary:.2f}); "
        f"rbf_continuous {kta_rc:.4f} (ratio {ratio_continuous:.2f})",
    )


def test_criterion_8_sweep_crossover(sweep_run):
    gap_n7 = _mean(sweep_run, "quantum_zz", n=7) - _mean(sweep_run, "rbf_binary", n=7)
    gap_n11 = _mean(sweep_run, "quantum_zz", n=11) - _mean(sweep_run, "rbf_binary", n=11)
    ktas = [_mean(sweep_run, "quantum_zz", field="kta", n=n) for n in (7, 8, 9, 10, 11)]
    inversions = sum(1 for a, b in zip(ktas, ktas[1:]) if b < a)
    ok = gap_n7 <= 0.02 and gap_n11 >= 0.02 and inversions <= 1
    criterion(
        8,
        "crossover at 30% noise: gap(n=7) <= +0.02, gap(n=11) >= +0.02, "
        "quantum KTA non-decreasing in n up to one inversion",
        ok,
        f"gap(7) {gap_n7:+.3f}, gap(11) {gap_n11:+.3f}, "
        f"KTA by n {['%.4f' % v for v in ktas]}, inversions {inversions}",
    )


def test_criterion_9_determinism(headline_run, headline_run_workers8):
    bytes_w1 = headline_run.csv_path.read_bytes()
    bytes_w8 = headline_run_workers8.csv_path.read_bytes()
    criterion(
        9,
        "headline record CSVs byte-identical across runs and worker counts 1 vs 8",
        bytes_w1 == bytes_w8,
        f"{len(bytes_w1)} bytes each",
    )

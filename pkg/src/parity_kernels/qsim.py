"""Exact statevector simulation of the ZZ feature map and fidelity evaluation.

The circuit per repetition is a Hadamard layer on every qubit (optional,
on by default) followed by a diagonal phase layer whose angle on basis state
``z`` is

    sum_i x_i * s_i  +  sum_{i<j} (pi - x_i) * (pi - x_j) * s_i * s_j,

with ``s_k = +1`` when bit ``k`` of ``z`` is 0 and ``-1`` otherwise (Z
eigenvalues). Qubit ``k`` corresponds to bit ``k`` of the basis index. The
fast path fuses all diagonal terms into one phase table per input vector and
implements the Hadamard layer as a normalized fast Walsh-Hadamard transform;
:func:`dense_reference_state` rebuilds the same state gate by dense gate as
an independent oracle.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_QUBIT_CAP = 24
_ORACLE_QUBIT_CAP = 10
_NORM_TOL = 1e-10
_FIDELITY_SLACK = 1e-9


class SimulatorError(RuntimeError):
    """Numerical contract violation that signals a simulator bug."""


@dataclass(frozen=True)
class FeatureMapConfig:
    """Shape of the feature-map circuit: qubit count, repetitions, layers."""

    n_qubits: int
    reps: int = 3
    entanglement: str = "full"
    hadamard_layers: bool = True
    max_qubits: int = DEFAULT_QUBIT_CAP

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if self.entanglement != "full":
            raise ValueError(f"unsupported entanglement pattern: {self.entanglement!r}")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits


@dataclass(frozen=True)
class StateVector:
    """2^n complex amplitudes of one prepared state; unit norm."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes.flags.writeable = False

    def __len__(self) -> int:
        return self.amplitudes.shape[0]


def _basis_signs(n_qubits: int) -> np.ndarray:
    """Z eigenvalue of each qubit on each basis state; shape (2^n, n)."""
    idx = np.arange(2**n_qubits)
    bits = (idx[:, None] >> np.arange(n_qubits)) & 1
    return 1.0 - 2.0 * bits


def build_phase_table(
    x: np.ndarray,
    config: FeatureMapConfig,
    pair_order: Sequence[tuple[int, int]] | None = None,
) -> np.ndarray:
    """Accumulated phase angle per basis state for one repetition.

    ``pair_order`` overrides the canonical i<j enumeration of the pairwise
    terms (diagnostic knob; the terms commute, so any order must agree).
    """
    x = np.asarray(x, dtype=np.float64)
    n = config.n_qubits
    if x.shape != (n,):
        raise ValueError(f"input must have length {n}, got shape {x.shape}")
    s = _basis_signs(n)
    phases = s @ x
    w = np.pi - x
    if pair_order is None:
        pair_order = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for i, j in pair_order:
        phases += (w[i] * w[j]) * (s[:, i] * s[:, j])
    return phases


def _fwht_normalized(vec: np.ndarray) -> np.ndarray:
    """Normalized Walsh-Hadamard transform, i.e. the H-on-every-qubit layer."""
    out = vec.copy()
    size = out.shape[0]
    half = 1
    while half < size:
        out = out.reshape(size // (2 * half), 2, half)
        top = out[:, 0, :] + out[:, 1, :]
        bottom = out[:, 0, :] - out[:, 1, :]
        out = np.concatenate([top[:, None, :], bottom[:, None, :]], axis=1).reshape(size)
        half *= 2
    return out / np.sqrt(size)


def prepare_state(x: np.ndarray, config: FeatureMapConfig) -> StateVector:
    """Run the feature-map circuit on |0...0> for input ``x``."""
    if config.n_qubits > config.max_qubits:
        mem_gib = config.dim * 16 / 2**30
        raise ValueError(
            f"n_qubits={config.n_qubits} exceeds the simulation cap "
            f"{config.max_qubits} (statevector would need {mem_gib:.1f} GiB); "
            "raise max_qubits to override"
        )
    phase_factor = np.exp(1j * build_phase_table(x, config))
    psi = np.zeros(config.dim, dtype=np.complex128)
    psi[0] = 1.0
    for _ in range(config.reps):
        if config.hadamard_layers:
            psi = _fwht_normalized(psi)
        psi = psi * phase_factor
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > _NORM_TOL:
        raise SimulatorError(f"prepared state norm {norm} deviates from 1")
    return StateVector(amplitudes=psi)


def fidelity(a: StateVector, b: StateVector) -> float:
    """Squared magnitude of the overlap <a|b>, clamped to [0, 1] near the boundary."""
    if len(a) != len(b):
        raise ValueError(f"state lengths differ: {len(a)} vs {len(b)}")
    value = float(np.abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
    if value > 1.0 + _FIDELITY_SLACK:
        raise SimulatorError(f"fidelity {value} exceeds 1 beyond tolerance")
    return min(value, 1.0)


def _kron_on_qubit(gate: np.ndarray, qubit: int, n_qubits: int) -> np.ndarray:
    """Dense operator applying ``gate`` on one qubit (bit ``qubit`` of the index)."""
    left = np.eye(2 ** (n_qubits - 1 - qubit))
    right = np.eye(2**qubit)
    return np.kron(np.kron(left, gate), right)


def dense_reference_state(x: np.ndarray, config: FeatureMapConfig) -> StateVector:
    """Oracle: the same state via explicit dense gate-by-gate application.

    Hadamards are placed by Kronecker products and every phase term becomes
    its own dense diagonal built from dense Z operators, so this path shares
    no machinery with :func:`prepare_state`.
    """
    n = config.n_qubits
    if n > _ORACLE_QUBIT_CAP:
        raise ValueError(f"dense oracle capped at {_ORACLE_QUBIT_CAP} qubits, got {n}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ValueError(f"input must have length {n}, got shape {x.shape}")

    hadamard = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
    pauli_z = np.diag([1.0, -1.0]).astype(np.complex128)
    z_ops = [_kron_on_qubit(pauli_z, q, n) for q in range(n)]

    psi = np.zeros(2**n, dtype=np.complex128)
    psi[0] = 1.0
    for _ in range(config.reps):
        if config.hadamard_layers:
            for q in range(n):
                psi = _kron_on_qubit(hadamard, q, n) @ psi
        for i in range(n):
            term = np.diag(np.exp(1j * x[i] * np.diag(z_ops[i])))
            psi = term @ psi
        for i in range(n):
            for j in range(i + 1, n):
                zz = np.diag(z_ops[i]) * np.diag(z_ops[j])
                term = np.diag(np.exp(1j * (np.pi - x[i]) * (np.pi - x[j]) * zz))
                psi = term @ psi
    return StateVector(amplitudes=psi)


class StateCache:
    """Thread-safe memo of prepared states keyed by the exact input bytes.

    Binary {0, pi} inputs admit at most 2^n distinct states, so reuse
    dominates the quantum Gram workload. Identical keys return the identical
    StateVector object.
    """

    def __init__(self, max_entries: int | None = None) -> None:
        self._lock = threading.Lock()
        self._store: dict[tuple, StateVector] = {}
        self._max_entries = max_entries

    def __len__(self) -> int:
        return len(self._store)

    def get_or_prepare(self, x: np.ndarray, config: FeatureMapConfig) -> StateVector:
        x = np.ascontiguousarray(x, dtype=np.float64)
        key = (config, x.tobytes())
        with self._lock:
            hit = self._store.get(key)
            if hit is not None:
                return hit
            state = prepare_state(x, config)
            if self._max_entries is None or len(self._store) < self._max_entries:
                self._store[key] = state
            return state

    def clear(self) -> None:
        with self._lock:
            self._store.clear()


def dump_state_csv(state: StateVector, path: str | Path) -> None:
    """Debug dump: one (index, real, imag) row per amplitude."""
    amps = state.amplitudes
    table = np.column_stack([np.arange(len(amps)), amps.real, amps.imag])
    np.savetxt(path, table, fmt=["%d", "%.17g", "%.17g"], delimiter=",",
               header="index,real,imag", comments="")

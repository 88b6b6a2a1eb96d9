"""Gram matrix assembly for quantum fidelity, RBF, linear, and polynomial kernels,
plus kernel-target alignment.

Square Grams are built from their upper triangle and mirrored, so symmetry is
exact; the quantum path deduplicates rows and shares a statevector cache so
binary inputs cost at most one state preparation per distinct bit pattern.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .qsim import FeatureMapConfig, SimulatorError, StateCache

_GRAM_MAGIC = b"PKGRAM01"
_QUANTUM_RANGE_SLACK = 1e-9

KERNEL_KINDS = ("quantum_zz", "rbf", "linear", "poly")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus its hyperparameters."""

    kind: str
    gamma: float | None = None
    degree: int | None = None
    offset: float | None = None
    feature_map: FeatureMapConfig | None = None
    normalize: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and (self.gamma is None or self.gamma <= 0):
            raise ValueError(f"rbf kernel needs gamma > 0, got {self.gamma}")
        if self.kind == "poly":
            if self.degree is None or self.degree < 1:
                raise ValueError(f"poly kernel needs degree >= 1, got {self.degree}")
            if self.offset is None or self.offset < 0:
                raise ValueError(f"poly kernel needs offset >= 0, got {self.offset}")
        if self.kind == "quantum_zz" and self.feature_map is None:
            raise ValueError("quantum_zz kernel needs a feature_map config")
        if self.normalize and self.kind != "poly":
            raise ValueError("normalize is only supported for the poly kernel")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: v for k, v in d.items() if v is not None and (k != "normalize" or v)}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        d = dict(d)
        if "feature_map" in d and d["feature_map"] is not None:
            d["feature_map"] = FeatureMapConfig(**d["feature_map"])
        return cls(**{f.name: d.get(f.name, f.default) for f in dataclasses.fields(cls)})


def linear_spec() -> KernelSpec:
    return KernelSpec(kind="linear")


def rbf_spec(gamma: float) -> KernelSpec:
    return KernelSpec(kind="rbf", gamma=gamma)


def poly_spec(degree: int, offset: float = 0.0, normalize: bool = True) -> KernelSpec:
    return KernelSpec(kind="poly", degree=degree, offset=offset, normalize=normalize)


def quantum_spec(feature_map: FeatureMapConfig) -> KernelSpec:
    return KernelSpec(kind="quantum_zz", feature_map=feature_map)


@dataclass(frozen=True)
class GramMatrix:
    """Kernel evaluations between row samples and column samples."""

    values: np.ndarray
    row_ids: np.ndarray
    col_ids: np.ndarray
    spec: KernelSpec

    def __post_init__(self) -> None:
        self.values.flags.writeable = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _check_inputs(X: np.ndarray, spec: KernelSpec) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"feature table must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature table contains non-finite values")
    if spec.kind == "quantum_zz" and X.shape[1] != spec.feature_map.n_qubits:
        raise ValueError(
            f"quantum kernel expects {spec.feature_map.n_qubits} columns, got {X.shape[1]}"
        )
    return X


def _mirror_upper(K: np.ndarray) -> np.ndarray:
    """Exactly symmetric matrix from the upper triangle of K (diagonal kept)."""
    upper = np.triu(K)
    return upper + np.triu(K, 1).T


def _quantum_distinct_block(
    X: np.ndarray, Y: np.ndarray | None, spec: KernelSpec, cache: StateCache
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Fidelities between distinct rows of X and Y plus inverse index maps."""
    ux, inv_x = np.unique(X, axis=0, return_inverse=True)
    states_x = np.stack(
        [cache.get_or_prepare(row, spec.feature_map).amplitudes for row in ux]
    )
    if Y is None:
        uy, inv_y, states_y = ux, inv_x, states_x
    else:
        uy, inv_y = np.unique(Y, axis=0, return_inverse=True)
        states_y = np.stack(
            [cache.get_or_prepare(row, spec.feature_map).amplitudes for row in uy]
        )
    block = np.abs(states_x.conj() @ states_y.T) ** 2
    low, high = block.min(), block.max()
    if low < -_QUANTUM_RANGE_SLACK or high > 1.0 + _QUANTUM_RANGE_SLACK:
        raise SimulatorError(
            f"quantum fidelity outside [0, 1] beyond tolerance: min={low}, max={high}"
        )
    return np.clip(block, 0.0, 1.0), inv_x, inv_y


def _classical_block(X: np.ndarray, Y: np.ndarray, spec: KernelSpec) -> np.ndarray:
    if spec.kind == "linear":
        return X @ Y.T
    if spec.kind == "rbf":
        sq_x = np.einsum("ij,ij->i", X, X)
        sq_y = np.einsum("ij,ij->i", Y, Y)
        d2 = np.maximum(sq_x[:, None] + sq_y[None, :] - 2.0 * (X @ Y.T), 0.0)
        return np.exp(-spec.gamma * d2)
    if spec.kind == "poly":
        block = np.power(X @ Y.T + spec.offset, spec.degree)
        if spec.normalize:
            kx = np.power(np.einsum("ij,ij->i", X, X) + spec.offset, spec.degree)
            ky = np.power(np.einsum("ij,ij->i", Y, Y) + spec.offset, spec.degree)
            denom = np.sqrt(np.outer(kx, ky))
            block = np.divide(block, denom, out=np.zeros_like(block), where=denom > 0)
        return block
    raise ValueError(f"unknown kernel kind {spec.kind!r}")


def gram(
    X: np.ndarray,
    spec: KernelSpec,
    row_ids: np.ndarray | None = None,
    cache: StateCache | None = None,
) -> GramMatrix:
    """Square Gram over the rows of X: exactly symmetric, unit diagonal where applicable."""
    X = _check_inputs(X, spec)
    if spec.kind == "quantum_zz":
        block, inv, _ = _quantum_distinct_block(X, None, spec, cache if cache is not None else StateCache())
        block = _mirror_upper(block)
        np.fill_diagonal(block, 1.0)
        values = block[np.ix_(inv, inv)]
    else:
        values = _mirror_upper(_classical_block(X, X, spec))
        if spec.kind == "rbf":
            np.fill_diagonal(values, 1.0)
    ids = np.arange(X.shape[0]) if row_ids is None else np.asarray(row_ids)
    return GramMatrix(values=values, row_ids=ids, col_ids=ids.copy(), spec=spec)


def cross_gram(
    X_eval: np.ndarray,
    X_ref: np.ndarray,
    spec: KernelSpec,
    row_ids: np.ndarray | None = None,
    col_ids: np.ndarray | None = None,
    cache: StateCache | None = None,
) -> GramMatrix:
    """Rectangular Gram: rows are evaluation samples, columns reference samples."""
    X_eval = _check_inputs(X_eval, spec)
    X_ref = _check_inputs(X_ref, spec)
    if X_eval.shape[1] != X_ref.shape[1]:
        raise ValueError(
            f"column counts differ: {X_eval.shape[1]} vs {X_ref.shape[1]}"
        )
    if spec.kind == "quantum_zz":
        block, inv_e, inv_r = _quantum_distinct_block(
            X_eval, X_ref, spec, cache if cache is not None else StateCache()
        )
        values = block[np.ix_(inv_e, inv_r)]
    else:
        values = _classical_block(X_eval, X_ref, spec)
    rids = np.arange(X_eval.shape[0]) if row_ids is None else np.asarray(row_ids)
    cids = np.arange(X_ref.shape[0]) if col_ids is None else np.asarray(col_ids)
    return GramMatrix(values=values, row_ids=rids, col_ids=cids, spec=spec)


def kta(K: GramMatrix | np.ndarray, y: np.ndarray) -> float:
    """Alignment <K, yy^T>_F / (||K||_F * ||yy^T||_F) on a square training Gram.

    Labels in {0, 1} are mapped to -1/+1; the alignment is uncentered.
    """
    values = K.values if isinstance(K, GramMatrix) else np.asarray(K, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"KTA needs a square Gram, got shape {values.shape}")
    y = np.asarray(y)
    if y.shape[0] != values.shape[0]:
        raise ValueError(f"label count {y.shape[0]} != Gram rows {values.shape[0]}")
    signs = np.where(y > 0, 1.0, -1.0)
    if np.all(signs == signs[0]):
        raise ValueError("KTA is degenerate when all labels are one class")
    frob = np.linalg.norm(values)
    if frob == 0:
        raise ValueError("KTA undefined for an all-zero kernel")
    return float(signs @ values @ signs / (frob * signs.shape[0]))


def save_gram_csv(gram_matrix: GramMatrix, path: str | Path) -> None:
    np.savetxt(path, gram_matrix.values, fmt="%.17g", delimiter=",")


def save_gram_binary(gram_matrix: GramMatrix, path: str | Path) -> None:
    """Compact format: magic, uint64 header length, JSON header, row-major <f8 payload."""
    spec_dict = gram_matrix.spec.to_dict()
    header = json.dumps(
        {
            "rows": int(gram_matrix.shape[0]),
            "cols": int(gram_matrix.shape[1]),
            "row_ids": gram_matrix.row_ids.tolist(),
            "col_ids": gram_matrix.col_ids.tolist(),
            "spec": spec_dict,
        },
        sort_keys=True,
    ).encode()
    with open(path, "wb") as fh:
        fh.write(_GRAM_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(gram_matrix.values, dtype="<f8").tobytes())


def load_gram_binary(path: str | Path) -> GramMatrix:
    with open(path, "rb") as fh:
        magic = fh.read(len(_GRAM_MAGIC))
        if magic != _GRAM_MAGIC:
            raise ValueError(f"not a Gram file: bad magic {magic!r}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len))
        payload = fh.read(header["rows"] * header["cols"] * 8)
    values = np.frombuffer(payload, dtype="<f8").reshape(header["rows"], header["cols"])
    return GramMatrix(
        values=values.astype(np.float64),
        row_ids=np.asarray(header["row_ids"]),
        col_ids=np.asarray(header["col_ids"]),
        spec=KernelSpec.from_dict(header["spec"]),
    )

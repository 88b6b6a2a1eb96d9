"""Synthetic parity-structured benchmark generation.

Samples get clustered continuous features: the informative block is standard
normal noise around hypercube vertices in ``{-class_sep, +class_sep}^n``,
redundant columns are fixed random mixes of the informative block, and the
remaining probe columns are pure noise. Labels are the parity (XOR) of the
median-thresholded informative columns, optionally corrupted by independent
Bernoulli label flips, and splits are stratified.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng

# Informative columns occupy the leading block; never shuffled.
_CSV_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class GeneratorConfig:
    """Structural parameters of one synthetic dataset."""

    n_samples: int
    n_features: int
    n_informative: int
    n_redundant: int = 0
    clusters_per_class: int = 1
    class_sep: float = 1.0
    flip_y: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if self.n_informative < 1:
            raise ValueError(f"n_informative must be >= 1, got {self.n_informative}")
        if self.n_redundant < 0:
            raise ValueError(f"n_redundant must be >= 0, got {self.n_redundant}")
        if self.n_informative + self.n_redundant > self.n_features:
            raise ValueError(
                "n_informative + n_redundant must be <= n_features: "
                f"{self.n_informative} + {self.n_redundant} > {self.n_features}"
            )
        if self.clusters_per_class < 1:
            raise ValueError(f"clusters_per_class must be >= 1, got {self.clusters_per_class}")
        if 2 * self.clusters_per_class > 2**self.n_informative:
            raise ValueError(
                "2 * clusters_per_class must be <= 2^n_informative so vertices are distinct: "
                f"2*{self.clusters_per_class} > 2^{self.n_informative}"
            )
        if self.class_sep < 0:
            raise ValueError(f"class_sep must be >= 0, got {self.class_sep}")
        if not 0.0 <= self.flip_y <= 1.0:
            raise ValueError(f"flip_y must be in [0, 1], got {self.flip_y}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass(frozen=True)
class Dataset:
    """Feature table plus label/threshold metadata; immutable after construction."""

    features: np.ndarray
    labels: np.ndarray | None
    informative_idx: np.ndarray
    medians_full: np.ndarray | None
    seed: int
    config: GeneratorConfig

    def __post_init__(self) -> None:
        self.features.flags.writeable = False
        if self.labels is not None:
            self.labels.flags.writeable = False
        self.informative_idx.flags.writeable = False
        if self.medians_full is not None:
            self.medians_full.flags.writeable = False


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint train/test index lists covering all samples."""

    train_idx: np.ndarray
    test_idx: np.ndarray


def _choose_vertices(r: np.random.Generator, n_informative: int, count: int) -> np.ndarray:
    """``count`` distinct vertex indices of the n-cube, uniform without replacement."""
    space = 2**n_informative
    if space <= 1 << 20:
        return r.permutation(space)[:count]
    # Vertex count << space here, so rejection sampling terminates quickly.
    chosen: list[int] = []
    seen: set[int] = set()
    while len(chosen) < count:
        for v in r.integers(0, space, size=count, dtype=np.uint64):
            iv = int(v)
            if iv not in seen:
                seen.add(iv)
                chosen.append(iv)
                if len(chosen) == count:
                    break
    return np.asarray(chosen, dtype=np.int64)


def generate_features(config: GeneratorConfig) -> Dataset:
    """Draw the feature table for ``config``; labels stay unset.

    Column layout is: informative block (noise around hypercube vertices),
    then redundant block (informative @ fixed mixing table), then probes
    (i.i.d. standard normal). Deterministic given ``config.seed``.
    """
    r = rng.substream(config.seed, rng.FEATURES)
    n = config.n_informative
    n_vertices = 2 * config.clusters_per_class

    vertex_ids = _choose_vertices(r, n, n_vertices)
    # Bit i of the vertex index selects the sign of coordinate i.
    bits = (vertex_ids[:, None] >> np.arange(n)) & 1
    vertices = np.where(bits == 1, config.class_sep, -config.class_sep).astype(np.float64)

    assignment = r.integers(0, n_vertices, size=config.n_samples)
    informative = vertices[assignment] + r.standard_normal((config.n_samples, n))

    mixing = r.uniform(-1.0, 1.0, size=(n, config.n_redundant))
    redundant = informative @ mixing

    n_probe = config.n_features - n - config.n_redundant
    probes = r.standard_normal((config.n_samples, n_probe))

    features = np.hstack([informative, redundant, probes])
    return Dataset(
        features=features,
        labels=None,
        informative_idx=np.arange(n, dtype=np.int64),
        medians_full=None,
        seed=config.seed,
        config=config,
    )


def assign_parity_labels(dataset: Dataset) -> Dataset:
    """Set each label to the XOR of the above-median indicators of the informative columns.

    Medians are taken over all samples (even counts use the mean of the two
    central order statistics) and the threshold comparison is strict.
    """
    info = dataset.features[:, dataset.informative_idx]
    medians = np.median(info, axis=0)
    bits = info > medians
    labels = (bits.sum(axis=1) % 2).astype(np.uint8)
    return dataclasses.replace(dataset, labels=labels, medians_full=medians)


def apply_label_noise(dataset: Dataset, flip_y: float, noise_seed: int) -> Dataset:
    """Flip each label independently with probability ``flip_y``."""
    if not 0.0 <= flip_y <= 1.0:
        raise ValueError(f"flip_y must be in [0, 1], got {flip_y}")
    if dataset.labels is None:
        raise ValueError("labels must be assigned before applying noise")
    r = rng.substream(noise_seed, rng.LABEL_NOISE)
    flips = r.random(dataset.labels.shape[0]) < flip_y
    return dataclasses.replace(dataset, labels=(dataset.labels ^ flips).astype(np.uint8))


def stratified_split(dataset: Dataset, test_fraction: float, split_seed: int) -> SplitIndices:
    """Per-class shuffled partition into train/test index lists.

    The test set has exactly ``round(test_fraction * n_samples)`` samples,
    apportioned across classes by largest remainder, so class proportions on
    both sides match the global proportion within one sample. Index lists
    come back sorted ascending.
    """
    if dataset.labels is None:
        raise ValueError("labels must be assigned before splitting")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    r = rng.substream(split_seed, rng.SPLIT)
    classes = np.unique(dataset.labels)
    class_idx = []
    for cls in classes:
        idx = np.flatnonzero(dataset.labels == cls)
        if idx.size < 2:
            raise ValueError(f"class {cls} has {idx.size} sample(s); cannot stratify")
        class_idx.append(idx)

    n_test_total = int(np.floor(test_fraction * dataset.features.shape[0] + 0.5))
    targets = np.array([test_fraction * idx.size for idx in class_idx])
    counts = np.floor(targets).astype(int)
    remainders = targets - counts
    # Hand out the leftover slots by largest remainder; ties go to the lower
    # class index for determinism.
    order = np.lexsort((np.arange(len(classes)), -remainders))
    for k in range(n_test_total - counts.sum()):
        counts[order[k % len(classes)]] += 1

    train_parts, test_parts = [], []
    for idx, n_test in zip(class_idx, counts):
        perm = r.permutation(idx)
        test_parts.append(perm[:n_test])
        train_parts.append(perm[n_test:])
    return SplitIndices(
        train_idx=np.sort(np.concatenate(train_parts)),
        test_idx=np.sort(np.concatenate(test_parts)),
    )


def _meta_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(csv_path.suffix + ".meta.json")


def save_dataset(dataset: Dataset, csv_path: str | Path) -> Path:
    """Write the feature table as CSV (17 significant digits) plus a JSON sidecar.

    The sidecar (``<csv>.meta.json``) echoes the generator config and records
    seed, informative indices, and label-generation medians. Returns the
    sidecar path.
    """
    csv_path = Path(csv_path)
    n_cols = dataset.features.shape[1]
    header = ",".join(f"f{i:03d}" for i in range(n_cols))
    table = dataset.features
    if dataset.labels is not None:
        header += ",label"
        table = np.hstack([dataset.features, dataset.labels[:, None].astype(np.float64)])
    np.savetxt(csv_path, table, fmt=_CSV_FLOAT_FMT, delimiter=",", header=header, comments="")
    meta = {
        "config": dataclasses.asdict(dataset.config),
        "seed": dataset.seed,
        "informative_idx": dataset.informative_idx.tolist(),
        "medians_full": None if dataset.medians_full is None else dataset.medians_full.tolist(),
        "labels_set": dataset.labels is not None,
    }
    meta_path = _meta_path(csv_path)
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta_path


def load_dataset(csv_path: str | Path) -> Dataset:
    """Inverse of :func:`save_dataset`; round-trips float64 values exactly."""
    csv_path = Path(csv_path)
    meta = json.loads(_meta_path(csv_path).read_text())
    table = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    labels = None
    if meta["labels_set"]:
        labels = table[:, -1].astype(np.uint8)
        table = table[:, :-1]
    medians = meta["medians_full"]
    return Dataset(
        features=table,
        labels=labels,
        informative_idx=np.asarray(meta["informative_idx"], dtype=np.int64),
        medians_full=None if medians is None else np.asarray(medians, dtype=np.float64),
        seed=meta["seed"],
        config=GeneratorConfig(**meta["config"]),
    )

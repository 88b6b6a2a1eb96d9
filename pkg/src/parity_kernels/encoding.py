"""Feature encodings: median-threshold binary {0, pi} and min-max scaling to [0, 2*pi].

Thresholds and scaler parameters are fitted on training rows only and applied
unchanged to evaluation rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import Dataset

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Thresholds:
    """Per-column medians fitted on training rows."""

    medians: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.medians)):
            raise ValueError("thresholds must be finite")
        self.medians.flags.writeable = False


@dataclass(frozen=True)
class ScalerParams:
    """Per-column min/max fitted on training rows."""

    col_min: np.ndarray
    col_max: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.col_max < self.col_min):
            raise ValueError("col_max must be >= col_min per column")
        self.col_min.flags.writeable = False
        self.col_max.flags.writeable = False


def select_informative(dataset: Dataset) -> np.ndarray:
    """The informative columns, in index order."""
    return dataset.features[:, dataset.informative_idx]


def fit_thresholds(train_view: np.ndarray) -> Thresholds:
    if train_view.size == 0:
        raise ValueError("cannot fit thresholds on an empty view")
    return Thresholds(medians=np.median(train_view, axis=0))


def encode_binary(view: np.ndarray, thresholds: Thresholds) -> np.ndarray:
    """Map each entry to pi if strictly above its column threshold, else 0."""
    if view.shape[1] != thresholds.medians.shape[0]:
        raise ValueError(
            f"column count mismatch: view has {view.shape[1]}, "
            f"thresholds have {thresholds.medians.shape[0]}"
        )
    return np.where(view > thresholds.medians, np.pi, 0.0)


def fit_scaler(train_view: np.ndarray) -> ScalerParams:
    if train_view.size == 0:
        raise ValueError("cannot fit a scaler on an empty view")
    return ScalerParams(col_min=train_view.min(axis=0), col_max=train_view.max(axis=0))


def scale_minmax(view: np.ndarray, params: ScalerParams) -> np.ndarray:
    """Rescale to [0, 2*pi] per column; constant columns map to 0, test values clamp."""
    if view.shape[1] != params.col_min.shape[0]:
        raise ValueError(
            f"column count mismatch: view has {view.shape[1]}, "
            f"scaler has {params.col_min.shape[0]}"
        )
    span = params.col_max - params.col_min
    safe_span = np.where(span > 0, span, 1.0)
    scaled = (view - params.col_min) / safe_span * TWO_PI
    scaled = np.where(span > 0, scaled, 0.0)
    return np.clip(scaled, 0.0, TWO_PI)

"""Binary SVM over precomputed kernels.

The dual problem  min 0.5*a'Qa - sum(a)  s.t.  y'a = 0, 0 <= a_i <= C  with
Q_ij = y_i y_j K_ij is solved by SMO-style two-variable updates: the first
index is the maximal KKT violator, the second is picked by the second-order
(largest guaranteed decrease) rule. The inner loop is numba-jitted; selection
order is fixed (first best index wins), so identical inputs give identical
models.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numba
import numpy as np

from . import rng
from .kernels import GramMatrix

DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 10**8
SUPPORT_EPSILON = 1e-8
_TAU = 1e-12


class ConvergenceError(RuntimeError):
    """Raised when the pair-update cap is hit; carries the final KKT residual."""

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(message)
        self.residual = residual


@dataclass
class SvmModel:
    """Dual solution: coefficients, bias, training labels, support indices."""

    alpha: np.ndarray
    bias: float
    y_train: np.ndarray
    support_idx: np.ndarray
    C: float


@dataclass(frozen=True)
class CvPlan:
    """Stratified fold assignment (positional, over the training samples)."""

    folds: int
    assignment: np.ndarray
    fold_seed: int


@dataclass(frozen=True)
class GridSpec:
    """Hyperparameter grid: C values plus at most one kernel-parameter axis."""

    C_values: tuple[float, ...]
    gamma_values: tuple[float, ...] | None = None
    offset_values: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not self.C_values:
            raise ValueError("C_values must be nonempty")
        if any(c <= 0 for c in self.C_values):
            raise ValueError("all C values must be positive")
        if self.gamma_values is not None and self.offset_values is not None:
            raise ValueError("grid supports at most one of gamma_values / offset_values")
        if self.gamma_values is not None and any(g <= 0 for g in self.gamma_values):
            raise ValueError("all gamma values must be positive")
        if self.offset_values is not None and any(c < 0 for c in self.offset_values):
            raise ValueError("offset values must be >= 0")


@dataclass(frozen=True)
class CvResult:
    best_params: dict
    best_score: float
    cell_scores: tuple[tuple[dict, float], ...]


@numba.njit(cache=True)
def _smo_core(Q, y, C, tol, max_iter):  # pragma: no cover - exercised via train()
    m = Q.shape[0]
    alpha = np.zeros(m)
    g = -np.ones(m)
    diag = np.empty(m)
    for t in range(m):
        diag[t] = Q[t, t]
    it = 0
    while it < max_iter:
        # i: maximal violator; j: second-order selection (largest guaranteed
        # objective decrease) among violators, as in LIBSVM's default rule.
        m_val = -np.inf
        i = -1
        for t in range(m):
            if (y[t] > 0.0 and alpha[t] < C) or (y[t] < 0.0 and alpha[t] > 0.0):
                v = -y[t] * g[t]
                if v > m_val:
                    m_val = v
                    i = t
        M_val = np.inf
        j = -1
        best_gain = np.inf
        if i >= 0:
            Qi = Q[i]
            for t in range(m):
                if (y[t] > 0.0 and alpha[t] > 0.0) or (y[t] < 0.0 and alpha[t] < C):
                    v = -y[t] * g[t]
                    if v < M_val:
                        M_val = v
                    b = m_val - v
                    if b > 0.0:
                        a = diag[i] + diag[t] - 2.0 * y[i] * y[t] * Qi[t]
                        if a <= 0.0:
                            a = _TAU
                        gain = -(b * b) / a
                        if gain < best_gain:
                            best_gain = gain
                            j = t
        if i < 0 or j < 0 or m_val - M_val < tol:
            break
        old_i = alpha[i]
        old_j = alpha[j]
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            if quad <= 0.0:
                quad = _TAU
            delta = (-g[i] - g[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0.0:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0.0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad <= 0.0:
                quad = _TAU
            delta = (g[i] - g[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = total
        di = alpha[i] - old_i
        dj = alpha[j] - old_j
        # Q is exactly symmetric, so row access stands in for column access.
        Qi = Q[i]
        Qj = Q[j]
        for t in range(m):
            g[t] += Qi[t] * di + Qj[t] * dj
        it += 1
    return alpha, g, it


def _as_array(K: GramMatrix | np.ndarray) -> np.ndarray:
    values = K.values if isinstance(K, GramMatrix) else K
    return np.ascontiguousarray(values, dtype=np.float64)


def _signed_labels(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y)
    signed = np.where(y > 0, 1.0, -1.0)
    if np.all(signed == signed[0]):
        raise ValueError("training labels contain a single class")
    return signed


def _stopping_gap(g: np.ndarray, y: np.ndarray, alpha: np.ndarray, C: float) -> tuple[float, float]:
    neg_yg = -(y * g)
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    m_val = neg_yg[up].max() if up.any() else -np.inf
    M_val = neg_yg[low].min() if low.any() else np.inf
    return float(m_val), float(M_val)


def train(
    K_train: GramMatrix | np.ndarray,
    y: np.ndarray,
    C: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SvmModel:
    """Solve the dual on a square training Gram; labels may be {0,1} or +-1."""
    K = _as_array(K_train)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"training Gram must be square, got shape {K.shape}")
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    y_signed = _signed_labels(y)
    if y_signed.shape[0] != K.shape[0]:
        raise ValueError(f"label count {y_signed.shape[0]} != Gram size {K.shape[0]}")

    Q = np.ascontiguousarray((y_signed[:, None] * y_signed[None, :]) * K)
    alpha, g, _ = _smo_core(Q, y_signed, float(C), float(tol), int(max_iter))

    m_val, M_val = _stopping_gap(g, y_signed, alpha, C)
    gap = m_val - M_val
    if gap >= tol:
        raise ConvergenceError(
            f"SMO hit the {max_iter}-update cap with KKT gap {gap:.3e} >= tol {tol:.1e}",
            residual=gap,
        )

    unbounded = (alpha > SUPPORT_EPSILON) & (alpha < C - SUPPORT_EPSILON)
    if unbounded.any():
        margins = K[unbounded] @ (alpha * y_signed)
        bias = float(np.mean(y_signed[unbounded] - margins))
    else:
        bias = float((m_val + M_val) / 2.0)
    return SvmModel(
        alpha=alpha,
        bias=bias,
        y_train=y_signed,
        support_idx=np.flatnonzero(alpha > SUPPORT_EPSILON),
        C=float(C),
    )


def predict(model: SvmModel, K_cross: GramMatrix | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Labels (+-1; a decision value of exactly 0 maps to +1) and raw decision values.

    ``K_cross`` rows are evaluation samples, columns the training samples.
    """
    K = _as_array(K_cross)
    if K.ndim != 2 or K.shape[1] != model.alpha.shape[0]:
        raise ValueError(
            f"cross Gram must have {model.alpha.shape[0]} columns, got shape {K.shape}"
        )
    decision = K @ (model.alpha * model.y_train) + model.bias
    labels = np.where(decision >= 0, 1.0, -1.0)
    return labels, decision


def kkt_residual(model: SvmModel, K_train: GramMatrix | np.ndarray, y: np.ndarray) -> float:
    """Maximum KKT violation of (alpha, bias) on the given problem; 0 at an exact optimum."""
    K = _as_array(K_train)
    y_signed = _signed_labels(y)
    alpha = model.alpha
    margins = y_signed * (K @ (alpha * y_signed) + model.bias)
    at_zero = alpha <= SUPPORT_EPSILON
    at_cap = alpha >= model.C - SUPPORT_EPSILON
    violation = np.abs(1.0 - margins)
    violation[at_zero] = np.maximum(0.0, 1.0 - margins[at_zero])
    violation[at_cap] = np.maximum(0.0, margins[at_cap] - 1.0)
    box = np.maximum(np.maximum(-alpha, alpha - model.C), 0.0)
    return float(np.maximum(violation, box).max())


def dual_objective(K: GramMatrix | np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    """Value of the (maximized) dual objective sum(a) - 0.5 a'Qa."""
    Kv = _as_array(K)
    y_signed = _signed_labels(y)
    v = alpha * y_signed
    return float(alpha.sum() - 0.5 * (v @ Kv @ v))


def make_cv_plan(y: np.ndarray, folds: int = 5, fold_seed: int = 0) -> CvPlan:
    """Stratified fold assignment: per-class counts differ by at most one across folds."""
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    y = np.asarray(y)
    r = rng.substream(fold_seed, rng.FOLDS)
    assignment = np.empty(y.shape[0], dtype=np.int64)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        perm = r.permutation(idx)
        assignment[perm] = np.arange(perm.size) % folds
    return CvPlan(folds=folds, assignment=assignment, fold_seed=fold_seed)


def _grid_cells(grid: GridSpec) -> tuple[str | None, list]:
    if grid.gamma_values is not None:
        return "gamma", sorted(grid.gamma_values)
    if grid.offset_values is not None:
        return "offset", sorted(grid.offset_values)
    return None, [None]


def cross_validate(
    K_train: GramMatrix | np.ndarray | Mapping,
    y: np.ndarray,
    grid: GridSpec,
    plan: CvPlan,
    tol: float = DEFAULT_TOL,
) -> CvResult:
    """Mean CV accuracy per grid cell; best cell wins, ties prefer smaller C then
    smaller gamma/offset.

    When the grid carries a gamma/offset axis, ``K_train`` must be a mapping
    from that parameter value to the corresponding training Gram.
    """
    y_signed = _signed_labels(y)
    param_name, param_values = _grid_cells(grid)

    def lookup(p):
        if param_name is None:
            if isinstance(K_train, Mapping):
                raise ValueError("grid has no kernel-parameter axis but a Gram mapping was given")
            return _as_array(K_train)
        if not isinstance(K_train, Mapping):
            raise ValueError(f"grid sweeps {param_name}; pass a mapping {param_name} -> Gram")
        if p not in K_train:
            raise ValueError(f"no Gram provided for {param_name}={p}")
        return _as_array(K_train[p])

    if plan.assignment.shape[0] != y_signed.shape[0]:
        raise ValueError("CV plan does not cover the training samples")
    fold_masks = [plan.assignment == f for f in range(plan.folds)]
    for f, mask in enumerate(fold_masks):
        train_labels = y_signed[~mask]
        if train_labels.size == 0 or np.all(train_labels == train_labels[0]):
            raise ValueError(f"fold {f} leaves a single-class training set")

    cell_scores: list[tuple[dict, float]] = []
    for p in param_values:
        K = lookup(p)
        if K.shape[0] != y_signed.shape[0]:
            raise ValueError(f"Gram size {K.shape[0]} != label count {y_signed.shape[0]}")
        fold_data = []
        for mask in fold_masks:
            tr = np.flatnonzero(~mask)
            ev = np.flatnonzero(mask)
            fold_data.append(
                (K[np.ix_(tr, tr)], K[np.ix_(ev, tr)], y_signed[tr], y_signed[ev])
            )
        for C in sorted(grid.C_values):
            accs = []
            for K_tr, K_ev, y_tr, y_ev in fold_data:
                model = train(K_tr, y_tr, C, tol=tol)
                labels, _ = predict(model, K_ev)
                accs.append(float(np.mean(labels == y_ev)))
            params = {"C": C} if p is None else {"C": C, param_name: p}
            cell_scores.append((params, float(np.mean(accs))))

    def preference(item):
        params, score = item
        param_rank = -params[param_name] if param_name else 0.0
        return (score, -params["C"], param_rank)

    best_params, best_score = max(cell_scores, key=preference)
    return CvResult(
        best_params=best_params, best_score=best_score, cell_scores=tuple(cell_scores)
    )


def save_model_json(model: SvmModel, path: str | Path) -> None:
    """Audit dump of the dual solution."""
    payload = {
        "alpha": model.alpha.tolist(),
        "bias": model.bias,
        "y_train": model.y_train.tolist(),
        "support_idx": model.support_idx.tolist(),
        "C": model.C,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")

"""Brute-force k-nearest-neighbor classification under a Mahalanobis metric."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .model import FactorModelSpec, LabeledDataset, bayes_classify, sample_labeled
from .spectral import MahalanobisMetric, sq_euclidean_pairwise

DEFAULT_K_GRID = (1, 3, 5, 9, 15, 25, 51)
_BLOCK = 1024


@dataclass(frozen=True)
class KnnConfig:
    k: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgument("k must be a positive integer")


def _as_metric(metric, d):
    return MahalanobisMetric.euclidean(d) if metric is None else metric


def neighbor_mask(D: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask of the k nearest columns for each row of a distance block.

    Distance ties are broken in favour of the lower column index.
    """
    rows, cols = D.shape
    if k >= cols:
        return np.ones_like(D, dtype=bool)
    thr = np.partition(D, k - 1, axis=1)[:, k - 1]
    mask = D <= thr[:, None]
    crowded = np.flatnonzero(mask.sum(axis=1) > k)
    for r in crowded:
        keep = np.argsort(D[r], kind="stable")[:k]
        mask[r] = False
        mask[r, keep] = True
    return mask


def _ranking_distances(Q, T, train_norms):
    # Squared distance minus the per-row constant |q|^2: same neighbor order, one pass cheaper.
    G = Q @ T.T
    G *= -2.0
    G += train_norms
    return G


def knn_predict(train: LabeledDataset, metric, k: int, X) -> np.ndarray:
    """Labels for each row of ``X``; +1 when at least k/2 neighbors are +1."""
    if train.s < 1:
        raise InvalidArgument("empty training set")
    if not 1 <= k <= train.s:
        raise InvalidArgument(f"need 1 <= k <= s={train.s}, got k={k}")
    metric = _as_metric(metric, train.d)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T_train = metric.transform(train.points)
    T_query = metric.transform(X)
    positive = train.labels == 1
    out = np.empty(X.shape[0], dtype=int)
    train_norms = np.einsum("ij,ij->i", T_train, T_train)
    for start in range(0, X.shape[0], _BLOCK):
        D = _ranking_distances(T_query[start:start + _BLOCK], T_train, train_norms)
        mask = neighbor_mask(D, k)
        plus = (mask & positive).sum(axis=1)
        out[start:start + _BLOCK] = np.where(2 * plus >= k, 1, -1)
    return out


def knn_classify(train: LabeledDataset, metric, config: KnnConfig, x) -> int:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidArgument("knn_classify takes a single query point; use knn_predict for batches")
    return int(knn_predict(train, metric, config.k, x[None, :])[0])


def misclassification_rate(train: LabeledDataset, test: LabeledDataset, metric, config: KnnConfig) -> float:
    if test.s < 1:
        raise InvalidArgument("empty test set")
    if test.d != train.d:
        raise InvalidArgument("train and test dimensions differ")
    pred = knn_predict(train, metric, config.k, test.points)
    return float(np.mean(pred != test.labels))


def excess_risk(train, metric, config, model: FactorModelSpec, n_mc: int, rng) -> float:
    """k-NN error minus Bayes error, both measured on the same fresh draws.

    Sharing the test draws between the two rules removes most of the Monte
    Carlo noise from the difference.  The result is not clamped at zero.
    """
    test = sample_labeled(model, n_mc, rng)
    knn_err = np.mean(knn_predict(train, metric, config.k, test.points) != test.labels)
    bayes_err = np.mean(bayes_classify(model, test.points) != test.labels)
    return float(knn_err - bayes_err)


def cv_errors(train: LabeledDataset, metric, k_grid, folds: int, rng) -> dict:
    """Cross-validated misclassification for each usable k in ``k_grid``."""
    if folds < 2:
        raise InvalidArgument("need at least 2 folds")
    grid = sorted({int(k) for k in k_grid})
    if not grid:
        raise InvalidArgument("empty k grid")
    metric = _as_metric(metric, train.d)
    rng = np.random.default_rng(rng)
    assignment = rng.permutation(train.s) % folds
    T = metric.transform(train.points)
    min_train = min(int(np.sum(assignment != f)) for f in range(folds))
    usable = [k for k in grid if k <= min_train]
    if not usable:
        raise InvalidArgument(f"every k in the grid exceeds the fold training size {min_train}")
    wrong = {k: 0 for k in usable}
    kmax = max(usable)
    for f in range(folds):
        held = np.flatnonzero(assignment == f)
        kept = np.flatnonzero(assignment != f)
        labels = train.labels[kept]
        for start in range(0, held.size, _BLOCK):
            rows = held[start:start + _BLOCK]
            D = sq_euclidean_pairwise(T[rows], T[kept])
            # Stable sort keeps the lower-index rule for distance ties.
            if kmax < D.shape[1]:
                part = np.argpartition(D, kmax - 1, axis=1)[:, :kmax]
                thr = np.take_along_axis(D, part, axis=1).max(axis=1)
                order = np.empty((D.shape[0], kmax), dtype=np.intp)
                for r in range(D.shape[0]):
                    cand = np.flatnonzero(D[r] <= thr[r])
                    order[r] = cand[np.argsort(D[r, cand], kind="stable")[:kmax]]
            else:
                order = np.argsort(D, axis=1, kind="stable")
            plus = np.cumsum(labels[order] == 1, axis=1)
            truth = train.labels[rows]
            for k in usable:
                pred = np.where(2 * plus[:, k - 1] >= k, 1, -1)
                wrong[k] += int(np.sum(pred != truth))
    return {k: wrong[k] / train.s for k in usable}


def select_k_cv(train: LabeledDataset, metric, k_grid=DEFAULT_K_GRID, folds: int = 5, rng=None) -> int:
    """k with the smallest cross-validated error; ties go to the smaller k."""
    errors = cv_errors(train, metric, k_grid, folds, rng)
    best = min(errors.values())
    return min(k for k, e in errors.items() if e == best)


def knn_predict_multiclass(points, labels, metric, k: int, X) -> np.ndarray:
    """Plurality vote over integer class labels; vote ties go to the smallest class."""
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels).astype(int)
    if not 1 <= k <= points.shape[0]:
        raise InvalidArgument("need 1 <= k <= number of training points")
    metric = _as_metric(metric, points.shape[1])
    T_train = metric.transform(points)
    T_query = metric.transform(np.atleast_2d(np.asarray(X, dtype=float)))
    n_classes = int(labels.max()) + 1
    onehot = np.eye(n_classes, dtype=np.int64)[labels]
    out = np.empty(T_query.shape[0], dtype=int)
    for start in range(0, T_query.shape[0], _BLOCK):
        D = sq_euclidean_pairwise(T_query[start:start + _BLOCK], T_train)
        votes = neighbor_mask(D, k).astype(np.int64) @ onehot
        out[start:start + _BLOCK] = np.argmax(votes, axis=1)
    return out

"""Two-cluster Lloyd iterations under a Mahalanobis metric."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .model import FactorModelSpec


@dataclass
class ClusteringResult:
    labels: np.ndarray
    centroids: tuple
    iterations: int
    objective_trace: list = field(default_factory=list)


def _assign(T, c_plus, c_minus):
    d_plus = np.sum((T - c_plus) ** 2, axis=1)
    d_minus = np.sum((T - c_minus) ** 2, axis=1)
    labels = np.where(d_plus <= d_minus, 1, -1)
    return labels, float(np.sum(np.minimum(d_plus, d_minus)))


def kmeans_fit(points, metric, init, max_iter: int = 100, tol: float = 1e-10) -> ClusteringResult:
    """Lloyd's algorithm with two clusters.

    Centroids are plain arithmetic means of their members even when the
    metric is rank-deficient (the mean is still a minimiser).  Equidistant
    points go to +1.  An emptied cluster is re-seeded at the point farthest
    from the surviving centroid.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvalidArgument("need at least two points")
    if max_iter < 1:
        raise InvalidArgument("max_iter must be positive")
    c_plus = np.asarray(init[0], dtype=float).copy()
    c_minus = np.asarray(init[1], dtype=float).copy()
    if c_plus.shape != (X.shape[1],) or c_minus.shape != (X.shape[1],):
        raise InvalidArgument("initial centroids must match the data dimension")
    if metric is None:
        T, project = X, (lambda v: v)
    else:
        T = metric.transform(X)
        project = metric.transform

    labels, objective = _assign(T, project(c_plus), project(c_minus))
    trace = [objective]
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        plus = labels == 1
        if plus.all() or not plus.any():
            survivor = X[plus].mean(axis=0) if plus.any() else X[~plus].mean(axis=0)
            far = int(np.argmax(np.sum((T - project(survivor)) ** 2, axis=1)))
            if plus.any():
                c_plus, c_minus = survivor, X[far].copy()
            else:
                c_plus, c_minus = X[far].copy(), survivor
        else:
            c_plus = X[plus].mean(axis=0)
            c_minus = X[~plus].mean(axis=0)
        new_labels, new_objective = _assign(T, project(c_plus), project(c_minus))
        trace.append(new_objective)
        improvement = objective - new_objective
        unchanged = np.array_equal(new_labels, labels)
        labels, objective = new_labels, new_objective
        if unchanged or improvement <= tol * abs(objective):
            break
    return ClusteringResult(labels, (c_plus, c_minus), iterations, trace)


def init_random(points, rng):
    X = np.asarray(points, dtype=float)
    if X.shape[0] < 2:
        raise InvalidArgument("random initialisation needs at least two points")
    i, j = rng.choice(X.shape[0], size=2, replace=False)
    return X[i].copy(), X[j].copy()


def init_oracle(model: FactorModelSpec):
    """True class means (B alpha, -B alpha)."""
    mu = model.class_mean
    if not np.any(mu):
        raise InvalidArgument("oracle centroids coincide (alpha = 0)")
    return mu.copy(), -mu


def miscluster_rate(pred, truth) -> float:
    """Disagreement fraction, minimised over the global label flip."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise InvalidArgument("label vectors differ in length")
    if pred.size == 0:
        raise InvalidArgument("empty label vectors")
    wrong = int(np.sum(pred != truth))
    return min(wrong, pred.size - wrong) / pred.size

"""Sample identification: are two observations views of the same latent sample?"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .model import FactorModelSpec, MultiViewDataset, observe, sample_population

SAME_SAMPLE = "same_sample"
DIFFERENT_SAMPLE = "different_sample"


@dataclass(frozen=True)
class IdThreshold:
    value: float
    alpha: float
    n_calibration: int


def upper_quantile(values, alpha: float) -> float:
    """The ceil((1 - alpha) m)-th smallest of m values (1-based)."""
    v = np.sort(np.asarray(values, dtype=float).reshape(-1))
    if v.size == 0:
        raise InvalidArgument("no calibration distances")
    # Round before ceil so (1 - 0.05) * 20 = 19.000000000000004 counts as 19.
    idx = math.ceil(round((1.0 - alpha) * v.size, 9))
    return float(v[min(max(idx, 1), v.size) - 1])


def within_sample_distances(multiview, metric) -> np.ndarray:
    X = multiview.data if isinstance(multiview, MultiViewDataset) else np.asarray(multiview, dtype=float)
    if X.ndim != 3 or X.shape[1] < 2:
        raise InvalidArgument("calibration needs at least two views per sample")
    return metric.pair_sq(X[:, 0, :], X[:, 1, :])


def estimate_threshold(multiview, metric, alpha: float = 0.05) -> IdThreshold:
    """Upper-alpha quantile of distances between the first two views of each sample."""
    if not 0 < alpha < 1:
        raise InvalidArgument("alpha must lie in (0, 1)")
    dist = within_sample_distances(multiview, metric)
    return IdThreshold(max(upper_quantile(dist, alpha), 0.0), alpha, int(dist.size))


def identify(x1, x2, metric, threshold) -> str:
    value = threshold.value if isinstance(threshold, IdThreshold) else float(threshold)
    dist = float(metric.pair_sq(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)))
    return DIFFERENT_SAMPLE if dist > value else SAME_SAMPLE


def offset_vector(K: int, norm: float) -> np.ndarray:
    """Latent offset that is zero on the first K/2 coordinates and constant on the rest."""
    if K < 2:
        raise InvalidArgument("offset pattern needs K >= 2")
    half = K // 2
    delta = np.zeros(K)
    delta[half:] = norm / math.sqrt(K - half)
    return delta


def draw_id_pairs(model: FactorModelSpec, delta_z, reps: int, rng):
    """``reps`` pairs of single views whose latents differ by ``delta_z``."""
    Z1, _ = sample_population(model, reps, rng)
    Z2 = Z1 + np.asarray(delta_z, dtype=float)
    return observe(model, Z1, rng), observe(model, Z2, rng)


def id_power(model: FactorModelSpec, metric, threshold, delta_z, reps: int, rng) -> float:
    """Fraction of pairs declared different samples."""
    if reps < 1:
        raise InvalidArgument("reps must be positive")
    value = threshold.value if isinstance(threshold, IdThreshold) else float(threshold)
    X1, X2 = draw_id_pairs(model, delta_z, reps, rng)
    return float(np.mean(metric.pair_sq(X1, X2) > value))

"""Spectral metric learning from multi-view data.

The moment matrix ``R_hat`` contrasts within-sample cross products (views of
the same latent sample) against across-sample cross products of view means.
It is unbiased for ``B B^T`` whatever the noise distribution, so its top-K
eigenpairs give plug-in estimates of both target metrics.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .model import MultiViewDataset


def symmetrize(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)


def _views(dataset) -> np.ndarray:
    X = dataset.data if isinstance(dataset, MultiViewDataset) else np.asarray(dataset, dtype=float)
    if X.ndim != 3:
        raise InvalidArgument("expected an m x n x d multi-view array")
    m, n, _ = X.shape
    if m < 2 or n < 2:
        raise InvalidArgument(f"need m >= 2 and n >= 2, got m={m}, n={n}")
    return X


def compute_rhat_linear(dataset) -> np.ndarray:
    """Linear-time form of ``R_hat`` built from view means and the grand mean."""
    X = _views(dataset)
    m, n, d = X.shape
    means = X.mean(axis=1)
    grand = means.mean(axis=0)
    flat = X.reshape(m * n, d)
    rhat = (n / (n - 1) + 1 / (m - 1)) * (means.T @ means) / m
    rhat -= (flat.T @ flat) / (m * n * (n - 1))
    rhat -= (m / (m - 1)) * np.outer(grand, grand)
    return symmetrize(rhat)


def compute_rhat_ustat(dataset) -> np.ndarray:
    """Pair-enumeration form of ``R_hat``; quadratic time, kept as a check.

    Within-sample term: sum over unordered view pairs j < j' of
    ``x_j x_j'^T + x_j' x_j^T``, divided by ``m n (n - 1)``.  Across-sample term:
    the same over unordered sample pairs of view means, divided by ``m (m - 1)``.
    """
    X = _views(dataset)
    m, n, d = X.shape
    within = np.zeros((d, d))
    for i in range(m):
        for j in range(n):
            for jj in range(j + 1, n):
                outer = np.outer(X[i, j], X[i, jj])
                within += outer + outer.T
    means = X.mean(axis=1)
    across = np.zeros((d, d))
    for i in range(m):
        for ii in range(i + 1, m):
            outer = np.outer(means[i], means[ii])
            across += outer + outer.T
    return symmetrize(within / (m * n * (n - 1)) - across / (m * (m - 1)))


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns ``(w, V)`` with ``w`` ascending and ``A = V diag(w) V^T``.
    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``tol * ||A||_F``.
    """
    A = symmetrize(A).copy()
    d = A.shape[0]
    V = np.eye(d)
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(d), V
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if abs(apq) <= 1e-18 * scale:
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q]
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :]
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                v_p = V[:, p].copy()
                v_q = V[:, q]
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def _fix_signs(V: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column made positive; argmax picks the lowest index on ties.
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def sym_eig_top_k(A, K: int, method: str = "lapack"):
    """K algebraically largest eigenpairs of a symmetric matrix, descending.

    ``method="lapack"`` uses ``numpy.linalg.eigh``; ``method="jacobi"`` uses
    the in-house cyclic Jacobi solver.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgument("expected a square matrix")
    if not np.all(np.isfinite(A)):
        raise InvalidArgument("matrix has non-finite entries")
    d = A.shape[0]
    if not 1 <= K <= d:
        raise InvalidArgument(f"need 1 <= K <= d, got K={K}, d={d}")
    if method == "lapack":
        w, V = np.linalg.eigh(symmetrize(A))
    elif method == "jacobi":
        w, V = jacobi_eigh(A)
    else:
        raise InvalidArgument(f"unknown eigensolver {method!r}")
    w = w[::-1][:K].copy()
    V = _fix_signs(V[:, ::-1][:, :K])
    return w, V


class MahalanobisMetric:
    """Squared Mahalanobis distance ``(x - y)^T M (x - y)`` for a PSD ``M``.

    Distances are evaluated through a factor ``L`` with ``M = L L^T`` so that
    pairwise distances reduce to squared Euclidean distances of ``X @ L``.
    ``factor=None`` with ``matrix=None`` is the plain Euclidean metric.
    """

    def __init__(self, matrix=None, factor=None, name: str = "", dim: int | None = None):
        if matrix is None and factor is None:
            if dim is None:
                raise InvalidArgument("Euclidean metric needs its dimension")
            self._dim = int(dim)
            self._matrix = None
            self._factor = None
        elif factor is not None:
            L = np.atleast_2d(np.asarray(factor, dtype=float))
            self._dim = L.shape[0]
            self._factor = L
            self._matrix = None if matrix is None else symmetrize(matrix)
        else:
            M = symmetrize(matrix)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise InvalidArgument("metric matrix must be square")
            w, V = np.linalg.eigh(M)
            top = max(abs(w).max(), 1e-300)
            if w.min() < -1e-8 * top:
                raise InvalidArgument(f"metric matrix is not PSD (min eigenvalue {w.min():.3g})")
            keep = w > 1e-12 * top
            self._dim = M.shape[0]
            self._matrix = M
            self._factor = V[:, keep] * np.sqrt(w[keep])
        self.name = name

    @classmethod
    def euclidean(cls, d: int) -> "MahalanobisMetric":
        return cls(dim=d, name="euclid")

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def is_euclidean(self) -> bool:
        return self._factor is None

    @property
    def factor(self) -> np.ndarray:
        return np.eye(self._dim) if self._factor is None else self._factor

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            L = self.factor
            self._matrix = symmetrize(L @ L.T)
        return self._matrix

    def scaled(self, c: float) -> "MahalanobisMetric":
        if c <= 0:
            raise InvalidArgument("scale must be positive")
        return MahalanobisMetric(factor=np.sqrt(c) * self.factor, name=self.name)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self._dim:
            raise InvalidArgument(f"dimension mismatch: metric is {self._dim}-D, data is {X.shape[-1]}-D")
        return X if self._factor is None else X @ self._factor

    def pair_sq(self, X1, X2) -> np.ndarray:
        """Row-wise distances between matching rows of X1 and X2."""
        T = self.transform(np.asarray(X1, dtype=float) - np.asarray(X2, dtype=float))
        return np.einsum("...i,...i->...", T, T)

    def pairwise(self, X, Y=None) -> np.ndarray:
        """All pairwise distances between rows of X and rows of Y (default X)."""
        TX = self.transform(X)
        TY = TX if Y is None else self.transform(Y)
        return sq_euclidean_pairwise(TX, TY)

    def __repr__(self):
        return f"MahalanobisMetric(name={self.name!r}, dim={self._dim})"


def sq_euclidean_pairwise(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    na = np.einsum("ij,ij->i", A, A)
    nb = np.einsum("ij,ij->i", B, B)
    D = na[:, None] + nb[None, :] - 2.0 * (A @ B.T)
    np.maximum(D, 0.0, out=D)
    if A is B:
        np.fill_diagonal(D, 0.0)
    return D


@dataclass(frozen=True)
class SpectralEstimate:
    rhat: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    m_star: np.ndarray
    m_star_star: np.ndarray

    @property
    def K(self) -> int:
        return self.eigenvalues.shape[0]

    def metric_star(self, name: str = "dstar_hat") -> MahalanobisMetric:
        L = self.eigenvectors * np.sqrt(np.clip(self.eigenvalues, 0.0, None))
        return MahalanobisMetric(self.m_star, factor=L, name=name)

    def metric_star_star(self, name: str = "dss_hat") -> MahalanobisMetric:
        return MahalanobisMetric(self.m_star_star, factor=self.eigenvectors, name=name)


def spectral_learn(dataset, K: int, method: str = "lapack") -> SpectralEstimate:
    """Estimate both target metrics from unlabeled multi-view data.

    Negative sample eigenvalues are clamped to zero in the anisotropic
    estimate so that it stays PSD.
    """
    rhat = compute_rhat_linear(dataset)
    w, V = sym_eig_top_k(rhat, K, method=method)
    m_star = symmetrize((V * np.clip(w, 0.0, None)) @ V.T)
    m_star_star = symmetrize(V @ V.T)
    return SpectralEstimate(rhat, w, V, m_star, m_star_star)


def mahalanobis_sq(metric, x1, x2) -> float:
    M = metric.matrix if isinstance(metric, MahalanobisMetric) else np.asarray(metric, dtype=float)
    diff = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    if diff.ndim != 1 or M.shape != (diff.shape[0], diff.shape[0]):
        raise InvalidArgument("dimension mismatch between metric and points")
    value = float(diff @ M @ diff)
    if value < -1e-10 * max(1.0, float(np.abs(M).max()) * float(diff @ diff)):
        raise InvalidArgument(f"negative squared distance {value:.3g}; metric is not PSD")
    return max(value, 0.0)


def metric_discrepancy(M1, M2) -> float:
    """Spectral norm of ``M1 - M2`` (largest absolute eigenvalue)."""
    A = M1.matrix if isinstance(M1, MahalanobisMetric) else np.asarray(M1, dtype=float)
    B = M2.matrix if isinstance(M2, MahalanobisMetric) else np.asarray(M2, dtype=float)
    if A.shape != B.shape:
        raise InvalidArgument(f"dimension mismatch {A.shape} vs {B.shape}")
    w = np.linalg.eigvalsh(symmetrize(A - B))
    return float(np.abs(w).max())


def write_matrix_csv(matrix, path) -> None:
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in M:
            writer.writerow([format(float(v), ".17g") for v in row])


def read_matrix_csv(path) -> np.ndarray:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows or len({len(r) for r in rows}) != 1:
        raise InvalidArgument(f"{path}: ragged or empty matrix CSV")
    return np.array(rows)

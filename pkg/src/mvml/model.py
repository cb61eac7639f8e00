"""Latent factor model for multi-view data and its Gaussian-mixture generator.

Observations follow ``X = B Z + eps`` with ``B = U diag(sqrt(lambdas))``,
``U^T U = I`` and isotropic noise ``eps ~ N(0, sigma2 I)``.  The latent ``Z``
is a balanced two-component mixture ``0.5 N(alpha, I - alpha alpha^T) +
0.5 N(-alpha, I - alpha alpha^T)`` so that ``Var(Z) = I`` and the mixture
branch doubles as a binary label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import DegenerateModelError, InvalidArgument

ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class FactorModelSpec:
    U: np.ndarray
    lambdas: np.ndarray
    sigma2: float
    alpha_mix: np.ndarray = field(default=None)

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 2:
            raise InvalidArgument("U must be a d x K matrix")
        d, K = U.shape
        if not 1 <= K <= d:
            raise InvalidArgument(f"need 1 <= K <= d, got K={K}, d={d}")
        lambdas = np.asarray(self.lambdas, dtype=float).reshape(-1)
        if lambdas.shape != (K,):
            raise InvalidArgument(f"lambdas must have length K={K}")
        if np.any(lambdas <= 0) or np.any(np.diff(lambdas) > 0):
            raise InvalidArgument("lambdas must be positive and non-increasing")
        if np.abs(U.T @ U - np.eye(K)).max() > ORTHO_TOL:
            raise InvalidArgument("U must have orthonormal columns")
        if self.sigma2 < 0:
            raise InvalidArgument("sigma2 must be non-negative")
        alpha = np.zeros(K) if self.alpha_mix is None else np.asarray(self.alpha_mix, dtype=float).reshape(-1)
        if alpha.shape != (K,):
            raise InvalidArgument(f"alpha_mix must have length K={K}")
        # ||alpha|| == 1 is allowed: I - alpha alpha^T is then a singular but valid covariance.
        if alpha @ alpha > 1.0 + 1e-12:
            raise InvalidArgument(f"||alpha_mix|| must be at most 1, got {np.sqrt(alpha @ alpha):.6g}")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "alpha_mix", alpha)

    @property
    def d(self) -> int:
        return self.U.shape[0]

    @property
    def K(self) -> int:
        return self.U.shape[1]

    @property
    def B(self) -> np.ndarray:
        return self.U * np.sqrt(self.lambdas)

    @property
    def condition_number(self) -> float:
        return float(self.lambdas[0] / self.lambdas[-1])

    @property
    def class_mean(self) -> np.ndarray:
        """E[X | Y = +1] = B alpha."""
        return self.B @ self.alpha_mix

    def covariance(self) -> np.ndarray:
        """Marginal covariance of one view, B B^T + sigma2 I."""
        B = self.B
        return B @ B.T + self.sigma2 * np.eye(self.d)

    def class_covariance(self) -> np.ndarray:
        """Covariance of X given the label, B (I - alpha alpha^T) B^T + sigma2 I."""
        Ba = self.class_mean
        B = self.B
        return B @ B.T - np.outer(Ba, Ba) + self.sigma2 * np.eye(self.d)

    def with_alpha(self, alpha) -> "FactorModelSpec":
        return FactorModelSpec(self.U, self.lambdas, self.sigma2, alpha)


@dataclass(frozen=True)
class MultiViewDataset:
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 3:
            raise InvalidArgument("multi-view data must be an m x n x d array")
        if data.shape[1] < 2:
            raise InvalidArgument("multi-view data needs at least 2 views per sample")
        if not np.all(np.isfinite(data)):
            raise InvalidArgument("multi-view data contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def d(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class LabeledDataset:
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        labels = np.asarray(self.labels).reshape(-1).astype(int)
        if points.shape[0] < 1:
            raise InvalidArgument("labeled dataset must be non-empty")
        if labels.shape[0] != points.shape[0]:
            raise InvalidArgument("points and labels differ in length")
        if not np.all(np.isin(labels, (-1, 1))):
            raise InvalidArgument("labels must be -1 or +1")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    @property
    def s(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def sample_factor_basis(d: int, K: int, rng: np.random.Generator) -> np.ndarray:
    """First K left singular vectors of a d x d standard Gaussian matrix."""
    if not 1 <= K <= d:
        raise InvalidArgument(f"need 1 <= K <= d, got K={K}, d={d}")
    G = rng.standard_normal((d, d))
    left, _, _ = np.linalg.svd(G)
    return np.ascontiguousarray(left[:, :K])


def factor_spectrum(K: int, lambda_scale: float) -> np.ndarray:
    """Linearly decaying spectrum lambda_k = lambda_scale * (K - k + 1) / K."""
    k = np.arange(1, K + 1)
    return lambda_scale * (K - k + 1) / K


def build_model(d, K, lambda_scale, sigma2, alpha_mix=None, rng=None) -> FactorModelSpec:
    if lambda_scale <= 0:
        raise InvalidArgument("lambda_scale must be positive")
    if sigma2 < 0:
        raise InvalidArgument("sigma2 must be non-negative")
    if alpha_mix is not None:
        a = np.asarray(alpha_mix, dtype=float)
        if a @ a > 1.0 + 1e-12:
            raise InvalidArgument("||alpha_mix|| must be at most 1")
    rng = np.random.default_rng(rng)
    U = sample_factor_basis(d, K, rng)
    return FactorModelSpec(U, factor_spectrum(K, lambda_scale), sigma2, alpha_mix)


def _mixture_shrink(alpha: np.ndarray) -> float:
    # (I - c aa^T)^2 = I - aa^T  with  c = (1 - sqrt(1 - |a|^2)) / |a|^2
    a2 = float(alpha @ alpha)
    if a2 == 0.0:
        return 0.0
    return (1.0 - np.sqrt(max(1.0 - a2, 0.0))) / a2


def sample_population(model: FactorModelSpec, count: int, rng: np.random.Generator):
    """Draw ``count`` latent vectors and their mixture labels.

    Returns ``(Z, Y)`` with ``Z`` of shape (count, K) and ``Y`` in {-1, +1}.
    """
    alpha = model.alpha_mix
    Y = np.where(rng.random(count) < 0.5, 1, -1)
    W = rng.standard_normal((count, model.K))
    c = _mixture_shrink(alpha)
    if c:
        W -= c * np.outer(W @ alpha, alpha)
    Z = W + Y[:, None] * alpha
    return Z, Y


def sample_multiview(model: FactorModelSpec, m: int, n: int, rng: np.random.Generator) -> MultiViewDataset:
    if m < 2 or n < 2:
        raise InvalidArgument(f"need m >= 2 and n >= 2, got m={m}, n={n}")
    Z, _ = sample_population(model, m, rng)
    signal = Z @ model.B.T
    X = rng.standard_normal((m, n, model.d))
    if model.sigma2 != 1.0:
        X *= np.sqrt(model.sigma2)
    X += signal[:, None, :]
    return MultiViewDataset(X)


def observe(model: FactorModelSpec, Z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One noisy view ``B z + eps`` per row of ``Z``."""
    Z = np.atleast_2d(Z)
    return Z @ model.B.T + np.sqrt(model.sigma2) * rng.standard_normal((Z.shape[0], model.d))


def sample_labeled(model: FactorModelSpec, s: int, rng: np.random.Generator) -> LabeledDataset:
    if s < 1:
        raise InvalidArgument("s must be at least 1")
    Z, Y = sample_population(model, s, rng)
    return LabeledDataset(observe(model, Z, rng), Y)


def target_metrics(model: FactorModelSpec):
    """Population metric matrices ``(B B^T, U U^T)``."""
    B = model.B
    return B @ B.T, model.U @ model.U.T


def _bayes_direction(model: FactorModelSpec) -> np.ndarray:
    # Equal class covariances, so the log-likelihood ratio is linear: 2 x^T C^{-1} B alpha.
    C = model.class_covariance()
    try:
        factor = linalg.cho_factor(C, lower=True)
    except linalg.LinAlgError:
        raise DegenerateModelError("class covariance is singular; Bayes rule undefined") from None
    diag = np.diag(factor[0])
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise DegenerateModelError("class covariance is singular; Bayes rule undefined")
    return linalg.cho_solve(factor, model.class_mean)


def bayes_classify(model: FactorModelSpec, x) -> np.ndarray | int:
    """Bayes rule for the two-Gaussian mixture; exact ties go to +1."""
    w = _bayes_direction(model)
    x = np.asarray(x, dtype=float)
    out = np.where(x @ w >= 0, 1, -1)
    return int(out) if out.ndim == 0 else out


def bayes_error(model: FactorModelSpec, n_mc: int, rng: np.random.Generator) -> float:
    data = sample_labeled(model, n_mc, rng)
    return float(np.mean(bayes_classify(model, data.points) != data.labels))


@dataclass
class ModelConfig:
    """Flat, serializable description of a factor model plus its seed."""

    d: int
    K: int
    lambda_scale: float
    sigma2: float
    alpha: tuple = ()
    seed: int = 0

    def build(self) -> FactorModelSpec:
        alpha = np.asarray(self.alpha, dtype=float) if len(self.alpha) else None
        return build_model(self.d, self.K, self.lambda_scale, self.sigma2, alpha, np.random.default_rng(self.seed))

    def dumps(self) -> str:
        lines = [
            f"d={self.d}",
            f"K={self.K}",
            f"lambda_scale={self.lambda_scale!r}",
            f"sigma2={self.sigma2!r}",
            "alpha=" + ",".join(repr(float(a)) for a in self.alpha),
            f"seed={self.seed}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ModelConfig":
        kv = parse_key_values(text)
        missing = {"d", "K", "lambda_scale", "sigma2"} - kv.keys()
        if missing:
            raise InvalidArgument(f"model config missing keys: {sorted(missing)}")
        alpha = tuple(float(a) for a in kv.get("alpha", "").split(",") if a.strip())
        return cls(
            d=int(kv["d"]),
            K=int(kv["K"]),
            lambda_scale=float(kv["lambda_scale"]),
            sigma2=float(kv["sigma2"]),
            alpha=alpha,
            seed=int(kv.get("seed", 0)),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ModelConfig":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def parse_key_values(text: str) -> dict:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidArgument(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out

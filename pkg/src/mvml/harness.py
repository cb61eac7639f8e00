"""Seeded Monte Carlo reproduction of the simulation and MNIST experiments.

Every replicate draws from its own generator derived from ``(seed, rep)``
only, so results do not depend on execution order or worker count.  The
ground-truth factor basis ``U`` is drawn once per experiment from a
dedicated stream of the same seed.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import kmeans as km
from .errors import InvalidArgument
from .knn import DEFAULT_K_GRID, knn_predict, knn_predict_multiclass, select_k_cv
from .model import (
    FactorModelSpec,
    bayes_classify,
    factor_spectrum,
    parse_key_values,
    sample_factor_basis,
    sample_labeled,
    sample_multiview,
)
from .sampleid import draw_id_pairs, estimate_threshold, offset_vector
from .spectral import MahalanobisMetric, spectral_learn
from .twosample import asymptotic_test, permutation_pvalue

log = logging.getLogger(__name__)

EXPERIMENTS = ("table3", "fig4", "table5", "fig5", "table6")
DISTANCES = (
    "euclid",
    "dstar_hat_m1000",
    "dstar_hat_m5000",
    "dstar_true",
    "dss_hat_m1000",
    "dss_hat_m5000",
    "dss_true",
)
FIG4_SETTING2_LAMBDAS = tuple(0.5 * i for i in range(1, 11))
CSV_COLUMNS = ("experiment", "distance", "condition_name", "condition_value", "estimate", "se", "reps", "seed")

# Stream ids mixed into the seed for draws that are not per-replicate.
_BASIS_STREAM = 2**31 - 1
_CALIBRATION_STREAM = 2**31 - 2
_PILOT_STREAM = 2**31 - 3


@dataclass
class ExperimentConfig:
    experiment: str
    d: int = 100
    K: tuple = (10,)
    lambda_scale: tuple = (1.0,)
    sigma2: float = 1.0
    n: int = 10
    m_list: tuple = (1000, 5000)
    s_list: tuple = (500,)
    r_grid: tuple = (0.0,)
    alpha_pattern: str = "none"
    reps: int = 500
    n_perm: int = 199
    alpha_level: float = 0.05
    seed: int = 0
    out: str = ""
    # sample identification
    dz_norms: tuple = (1.0, 2.0, 3.0, 4.0, 5.0)
    id_offset_scale: float = 2.0
    m_cal: int = 100_000
    fresh_calibration: bool = False
    # two-sample
    setting: int = 1
    test_method: str = "permutation"
    # k-means
    inits: tuple = ("random", "perfect")
    max_iter: int = 100
    # k-NN
    knn_k: int = 0
    r_fixed: float = 0.9
    s_fixed: int = 2000
    k_grid: tuple = DEFAULT_K_GRID
    cv_folds: int = 5
    n_test: int = 1000
    # MNIST
    mnist_dir: str = ""
    shift_px: int = 2
    mnist_k: int = 32
    mnist_m: int = 10_000
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise InvalidArgument(f"unknown experiment {self.experiment!r}")
        if self.reps < 1:
            raise InvalidArgument("reps must be positive")
        if self.n < 2:
            raise InvalidArgument("n must be at least 2")
        if self.sigma2 < 0:
            raise InvalidArgument("sigma2 must be non-negative")
        if any(k < 1 or k > self.d for k in self.K):
            raise InvalidArgument("each K must satisfy 1 <= K <= d")
        if any(m < 2 for m in self.m_list):
            raise InvalidArgument("each m must be at least 2")
        if any(lam <= 0 for lam in self.lambda_scale):
            raise InvalidArgument("lambda_scale must be positive")
        if not 0 < self.alpha_level < 1:
            raise InvalidArgument("alpha level must lie in (0, 1)")
        if self.test_method not in ("permutation", "asymptotic"):
            raise InvalidArgument("test_method must be permutation or asymptotic")
        if self.experiment == "table6" and not self.mnist_dir:
            raise InvalidArgument("table6 needs --mnist-dir")
        return self

    def with_overrides(self, **kv) -> "ExperimentConfig":
        return dataclasses.replace(self, **kv)


def default_config(experiment: str) -> ExperimentConfig:
    """Configuration with every printed setting of the named experiment."""
    if experiment == "table3":
        cfg = ExperimentConfig(experiment, K=(10, 50), lambda_scale=(4.0,))
    elif experiment == "fig4":
        cfg = ExperimentConfig(
            experiment,
            lambda_scale=(1.0,),
            s_list=(500,),
            r_grid=tuple(round(0.05 * i, 2) for i in range(11)),
            alpha_pattern="fig4",
        )
    elif experiment == "table5":
        cfg = ExperimentConfig(experiment, lambda_scale=(2.0,), s_list=(500,), r_grid=(0.4, 0.6, 0.8, 1.0), alpha_pattern="table5")
    elif experiment == "fig5":
        cfg = ExperimentConfig(
            experiment,
            lambda_scale=(2.0,),
            s_list=tuple(range(500, 5001, 500)),
            r_grid=tuple(round(0.1 * i, 1) for i in range(1, 11)),
            alpha_pattern="fig5",
        )
    elif experiment == "table6":
        cfg = ExperimentConfig(experiment, K=(32,), s_list=(1000, 2000, 5000), reps=1, m_list=(10_000,), n=5, d=784)
    else:
        raise InvalidArgument(f"unknown experiment {experiment!r}")
    return cfg


def fast_profile(cfg: ExperimentConfig) -> ExperimentConfig:
    """Desk-scale variant: a fifth of the replicates and trimmed grids."""
    trimmed = dict(reps=max(1, cfg.reps // 5))
    if cfg.experiment == "fig4":
        trimmed["r_grid"] = cfg.r_grid[::2]
        if cfg.setting == 2:
            trimmed["lambda_scale"] = cfg.lambda_scale[::2]
    elif cfg.experiment == "fig5":
        trimmed["s_list"] = tuple(s for s in cfg.s_list if s in (500, 2000, 5000)) or cfg.s_list[:3]
        trimmed["r_grid"] = cfg.r_grid[1::2] if len(cfg.r_grid) > 2 else cfg.r_grid
    elif cfg.experiment == "table6":
        trimmed["s_list"] = cfg.s_list[:1]
    return cfg.with_overrides(**trimmed)


def _coerce(value: str, current):
    if isinstance(current, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    if isinstance(current, tuple):
        items = [v.strip() for v in value.split(",") if v.strip()]
        if current and isinstance(current[0], str):
            return tuple(items)
        if current and isinstance(current[0], int) and not isinstance(current[0], bool):
            return tuple(int(float(v)) for v in items)
        return tuple(float(v) for v in items)
    return value


def load_config(path, experiment: str | None = None) -> ExperimentConfig:
    """Read a flat ``key=value`` experiment config; unknown keys are errors."""
    kv = parse_key_values(Path(path).read_text(encoding="utf-8"))
    experiment = kv.pop("experiment", experiment)
    if experiment is None:
        raise InvalidArgument(f"{path}: no experiment given")
    cfg = default_config(experiment)
    names = {f.name for f in dataclasses.fields(cfg)}
    updates = {}
    for key, value in kv.items():
        key = key.replace("-", "_")
        if key not in names:
            raise InvalidArgument(f"{path}: unknown config key {key!r}")
        updates[key] = _coerce(value, getattr(cfg, key))
    return cfg.with_overrides(**updates)


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    distance: str
    condition_name: str
    condition_value: float
    estimate: float
    se: float
    reps: int
    seed: int


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def get(self, distance: str, condition_name: str, condition_value: float) -> ResultRow:
        for row in self.rows:
            if row.distance == distance and row.condition_name == condition_name and math.isclose(row.condition_value, condition_value, abs_tol=1e-9):
                return row
        raise KeyError((distance, condition_name, condition_value))

    def estimate(self, distance, condition_name, condition_value) -> float:
        return self.get(distance, condition_name, condition_value).estimate

    def __len__(self):
        return len(self.rows)


def proportion_se(p: float, reps: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / reps)


def emit_csv(table: ResultTable, path) -> None:
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in table.rows:
                writer.writerow([
                    row.experiment,
                    row.distance,
                    row.condition_name,
                    format(row.condition_value, ".10g"),
                    format(row.estimate, ".10g"),
                    format(row.se, ".10g"),
                    row.reps,
                    row.seed,
                ])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_csv(path) -> ResultTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise InvalidArgument(f"{path}: unexpected header {reader.fieldnames}")
        rows = [
            ResultRow(
                r["experiment"],
                r["distance"],
                r["condition_name"],
                float(r["condition_value"]),
                float(r["estimate"]),
                float(r["se"]),
                int(r["reps"]),
                int(r["seed"]),
            )
            for r in reader
        ]
    return ResultTable(rows)


def emit_svg(table: ResultTable, path) -> None:
    """Estimate-vs-condition curves, one panel per condition group."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    groups = sorted({row.condition_name for row in table.rows})
    fig, axes = plt.subplots(1, max(len(groups), 1), figsize=(4.5 * max(len(groups), 1), 3.6), squeeze=False)
    for ax, group in zip(axes[0], groups):
        rows = [r for r in table.rows if r.condition_name == group]
        for distance in dict.fromkeys(r.distance for r in rows):
            pts = sorted((r.condition_value, r.estimate) for r in rows if r.distance == distance)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=distance)
        ax.set_title(group, fontsize=9)
        ax.set_xlabel(group.rsplit("/", 1)[-1])
    if groups:
        axes[0][0].legend(fontsize=7)
    try:
        fig.tight_layout()
        fig.savefig(path, format="svg")
    except OSError as exc:
        raise OSError(f"cannot write plot to {path}: {exc}") from exc
    finally:
        plt.close(fig)


# ---------------------------------------------------------------------------
# shared machinery


def replicate_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep,)))


def alpha_vector(pattern: str, K: int, r: float) -> np.ndarray:
    """Mixture centre for the named layout; its norm equals r."""
    alpha = np.zeros(K)
    if pattern == "none" or r == 0:
        return alpha
    if pattern == "fig4":
        idx = np.arange(4, K)
    elif pattern == "table5":
        idx = np.arange(0, min(4, K))
    elif pattern == "fig5":
        idx = np.arange(K // 2, K)
    else:
        raise InvalidArgument(f"unknown alpha pattern {pattern!r}")
    alpha[idx] = r / math.sqrt(idx.size)
    return alpha


def experiment_basis(cfg: ExperimentConfig, K: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_BASIS_STREAM, K)))
    return sample_factor_basis(cfg.d, K, rng)


def make_model(U, lambda_scale, sigma2, alpha=None) -> FactorModelSpec:
    return FactorModelSpec(U, factor_spectrum(U.shape[1], lambda_scale), sigma2, alpha)


def true_metrics(model: FactorModelSpec) -> dict:
    return {
        "euclid": MahalanobisMetric.euclidean(model.d),
        "dstar_true": MahalanobisMetric(factor=model.B, name="dstar_true"),
        "dss_true": MahalanobisMetric(factor=model.U, name="dss_true"),
    }


def learned_metrics(model: FactorModelSpec, n: int, m_list, rng, keep_views: bool = False):
    """Spectral estimates from a fresh unlabeled multi-view draw per m.

    Returns ``(metrics, calibration)`` where ``calibration`` maps each metric
    name to the first two views of the data it was learned from (only when
    ``keep_views``).
    """
    metrics, calibration = {}, {}
    for m in m_list:
        data = sample_multiview(model, m, n, rng)
        est = spectral_learn(data, model.K)
        for name, metric in ((f"dstar_hat_m{m}", est.metric_star), (f"dss_hat_m{m}", est.metric_star_star)):
            metrics[name] = metric(name)
            if keep_views:
                calibration[name] = data.data[:, :2, :]
    return metrics, calibration


def all_metrics(model, n, m_list, rng, keep_views=False):
    learned, calibration = learned_metrics(model, n, m_list, rng, keep_views)
    metrics = true_metrics(model)
    metrics.update(learned)
    return {name: metrics[name] for name in _ordered_names(metrics)}, calibration


def _ordered_names(metrics):
    known = [d for d in DISTANCES if d in metrics]
    return known + sorted(set(metrics) - set(known))


def _run(fn, cfg: ExperimentConfig):
    """Evaluate ``fn(rep)`` for every replicate, ordered by replicate index."""
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, range(cfg.reps), chunksize=max(1, cfg.reps // (4 * cfg.workers))))
    return [fn(rep) for rep in range(cfg.reps)]


def _aggregate(cfg, outcomes, proportion=True) -> ResultTable:
    """Average per-replicate outcome dicts keyed by (distance, name, value)."""
    keys = list(outcomes[0])
    rows = []
    for key in keys:
        values = np.array([o[key] for o in outcomes], dtype=float)
        est = float(values.mean())
        if proportion:
            se = proportion_se(est, values.size)
        else:
            se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
        distance, name, value = key
        rows.append(ResultRow(cfg.experiment, distance, name, float(value), est, se, int(values.size), cfg.seed))
    return ResultTable(rows)


# ---------------------------------------------------------------------------
# experiments


def _table3_rep(rep, cfg, contexts):
    rng = replicate_rng(cfg.seed, rep)
    out = {}
    for K, model, known_thresholds in contexts:
        metrics, calibration = all_metrics(model, cfg.n, cfg.m_list, rng, keep_views=not cfg.fresh_calibration)
        thresholds = dict(known_thresholds)
        for name, metric in metrics.items():
            if name in thresholds:
                continue
            if cfg.fresh_calibration:
                cal = sample_multiview(model, cfg.m_cal, 2, rng)
            else:
                cal = calibration[name]
            thresholds[name] = estimate_threshold(cal, metric, cfg.alpha_level).value
        for t in cfg.dz_norms:
            delta = offset_vector(K, cfg.id_offset_scale * t)
            X1, X2 = draw_id_pairs(model, delta, 1, rng)
            for name, metric in metrics.items():
                out[(name, f"K={K}/dz_norm", t)] = float(metric.pair_sq(X1, X2)[0] > thresholds[name])
    return out


def run_table3(cfg: ExperimentConfig) -> ResultTable:
    contexts = []
    for K in cfg.K:
        model = make_model(experiment_basis(cfg, K), cfg.lambda_scale[0], cfg.sigma2)
        cal_rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_CALIBRATION_STREAM, K)))
        cal = sample_multiview(model, cfg.m_cal, 2, cal_rng)
        known = {name: estimate_threshold(cal, metric, cfg.alpha_level).value for name, metric in true_metrics(model).items()}
        contexts.append((K, model, known))
    return _aggregate(cfg, _run(partial(_table3_rep, cfg=cfg, contexts=contexts), cfg))


def _fig4_conditions(cfg):
    """(condition name, value, lambda, r) tuples for the chosen setting."""
    if cfg.setting == 1:
        return [("setting=1/r", r, cfg.lambda_scale[0], r) for r in cfg.r_grid]
    lambdas = cfg.lambda_scale if len(cfg.lambda_scale) > 1 else FIG4_SETTING2_LAMBDAS
    return [("setting=2/lambda", lam, lam, 0.3 / lam) for lam in lambdas]


def _fig4_rep(rep, cfg, U):
    rng = replicate_rng(cfg.seed, rep)
    out = {}
    by_lambda = {}
    for name, value, lam, r in _fig4_conditions(cfg):
        if lam not in by_lambda:
            by_lambda[lam] = all_metrics(make_model(U, lam, cfg.sigma2), cfg.n, cfg.m_list, rng)[0]
        metrics = by_lambda[lam]
        model = make_model(U, lam, cfg.sigma2, alpha_vector(cfg.alpha_pattern, U.shape[1], r))
        data = sample_labeled(model, cfg.s_list[0], rng)
        if min(np.sum(data.labels == 1), np.sum(data.labels == -1)) < 2:
            raise InvalidArgument("labeled draw left a group with fewer than 2 members")
        for dist_name, metric in metrics.items():
            if cfg.test_method == "permutation":
                D = metric.pairwise(data.points)
                _, p = permutation_pvalue(D, data.labels, cfg.n_perm, rng)
                reject = p <= cfg.alpha_level
            else:
                reject = asymptotic_test(data, metric, cfg.alpha_level).reject
            out[(dist_name, name, value)] = float(reject)
    return out


def run_fig4(cfg: ExperimentConfig) -> ResultTable:
    U = experiment_basis(cfg, cfg.K[0])
    return _aggregate(cfg, _run(partial(_fig4_rep, cfg=cfg, U=U), cfg))


def _table5_rep(rep, cfg, U):
    rng = replicate_rng(cfg.seed, rep)
    lam = cfg.lambda_scale[0]
    metrics, _ = all_metrics(make_model(U, lam, cfg.sigma2), cfg.n, cfg.m_list, rng)
    out = {}
    for r in cfg.r_grid:
        model = make_model(U, lam, cfg.sigma2, alpha_vector(cfg.alpha_pattern, U.shape[1], r))
        data = sample_labeled(model, cfg.s_list[0], rng)
        starts = {}
        if "random" in cfg.inits:
            starts["random"] = km.init_random(data.points, rng)
        if "perfect" in cfg.inits:
            starts["perfect"] = km.init_oracle(model)
        for init_name, init in starts.items():
            for dist_name, metric in metrics.items():
                fit = km.kmeans_fit(data.points, metric, init, max_iter=cfg.max_iter)
                out[(dist_name, f"start={init_name}/r", r)] = km.miscluster_rate(fit.labels, data.labels)
    return out


def run_table5(cfg: ExperimentConfig) -> ResultTable:
    U = experiment_basis(cfg, cfg.K[0])
    return _aggregate(cfg, _run(partial(_table5_rep, cfg=cfg, U=U), cfg), proportion=False)


def _fig5_conditions(cfg):
    """(name suffix, value, s, r): s sweep at r_fixed, then r sweep at s_fixed."""
    conds = [(f"r={cfg.r_fixed:g}/s", float(s), int(s), cfg.r_fixed) for s in cfg.s_list]
    conds += [(f"s={cfg.s_fixed}/r", float(r), cfg.s_fixed, float(r)) for r in cfg.r_grid]
    return conds


def fig5_pilot_k(cfg: ExperimentConfig, U) -> dict:
    """k for every (distance, s, r), chosen once by cross-validation on pilot draws."""
    if cfg.knn_k:
        return {}
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_PILOT_STREAM,)))
    lam = cfg.lambda_scale[0]
    metrics, _ = all_metrics(make_model(U, lam, cfg.sigma2), cfg.n, cfg.m_list, rng)
    chosen = {}
    for _, _, s, r in _fig5_conditions(cfg):
        if (s, r) in {(key[1], key[2]) for key in chosen}:
            continue
        model = make_model(U, lam, cfg.sigma2, alpha_vector(cfg.alpha_pattern, U.shape[1], r))
        train = sample_labeled(model, s, rng)
        for name, metric in metrics.items():
            chosen[(name, s, r)] = select_k_cv(train, metric, cfg.k_grid, cfg.cv_folds, rng)
    log.info("fig5 pilot k: %s", chosen)
    return chosen


def _fig5_rep(rep, cfg, U, k_table):
    rng = replicate_rng(cfg.seed, rep)
    lam = cfg.lambda_scale[0]
    metrics, _ = all_metrics(make_model(U, lam, cfg.sigma2), cfg.n, cfg.m_list, rng)
    out = {}
    for suffix, value, s, r in _fig5_conditions(cfg):
        model = make_model(U, lam, cfg.sigma2, alpha_vector(cfg.alpha_pattern, U.shape[1], r))
        train = sample_labeled(model, s, rng)
        test = sample_labeled(model, cfg.n_test, rng)
        bayes_wrong = np.mean(bayes_classify(model, test.points) != test.labels)
        for name, metric in metrics.items():
            k = cfg.knn_k or k_table[(name, s, r)]
            wrong = np.mean(knn_predict(train, metric, min(k, s), test.points) != test.labels)
            out[(name, "misclass/" + suffix, value)] = float(wrong)
            out[(name, "excess_risk/" + suffix, value)] = float(wrong - bayes_wrong)
    return out


def run_fig5(cfg: ExperimentConfig) -> ResultTable:
    U = experiment_basis(cfg, cfg.K[0])
    k_table = fig5_pilot_k(cfg, U)
    return _aggregate(cfg, _run(partial(_fig5_rep, cfg=cfg, U=U, k_table=k_table), cfg), proportion=False)


def _table6_rep(rep, cfg, train_set, test_set):
    from .mnist import build_multiview

    rng = replicate_rng(cfg.seed, rep)
    K = cfg.mnist_k
    order = rng.permutation(train_set.count)
    unlabeled = train_set.subset(order[: cfg.mnist_m])
    est = spectral_learn(build_multiview(unlabeled, cfg.shift_px), K)
    metrics = {
        "euclid": MahalanobisMetric.euclidean(train_set.pixels.shape[1]),
        "dstar_hat": est.metric_star("dstar_hat"),
        "dss_hat": est.metric_star_star("dss_hat"),
    }
    del est
    test = test_set.subset(rng.choice(test_set.count, size=min(cfg.n_test, test_set.count), replace=False))
    pool = order[cfg.mnist_m:]
    out = {}
    for s in cfg.s_list:
        labeled = train_set.subset(pool[rng.choice(pool.size, size=s, replace=False)])
        for name, metric in metrics.items():
            k = cfg.knn_k or _multiclass_cv_k(labeled, metric, cfg.k_grid, cfg.cv_folds, rng)
            pred = knn_predict_multiclass(labeled.pixels, labeled.labels, metric, k, test.pixels)
            out[(name, "mnist/s", float(s))] = float(np.mean(pred != test.labels))
    return out


def _multiclass_cv_k(images, metric, k_grid, folds, rng) -> int:
    fold = rng.permutation(images.count) % folds
    errors = {}
    for k in sorted(set(k_grid)):
        wrong = 0
        for f in range(folds):
            held, kept = fold == f, fold != f
            if k > kept.sum():
                break
            pred = knn_predict_multiclass(images.pixels[kept], images.labels[kept], metric, k, images.pixels[held])
            wrong += int(np.sum(pred != images.labels[held]))
        else:
            errors[k] = wrong
    best = min(errors.values())
    return min(k for k, e in errors.items() if e == best)


def run_table6(cfg: ExperimentConfig) -> ResultTable:
    from .mnist import load_split

    train_set = load_split(cfg.mnist_dir, "train")
    test_set = load_split(cfg.mnist_dir, "test")
    return _aggregate(cfg, _run(partial(_table6_rep, cfg=cfg, train_set=train_set, test_set=test_set), cfg))


_RUNNERS = {
    "table3": run_table3,
    "fig4": run_fig4,
    "table5": run_table5,
    "fig5": run_fig5,
    "table6": run_table6,
}


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    """Run one experiment; writes the CSV when ``cfg.out`` is set."""
    cfg.validate()
    table = _RUNNERS[cfg.experiment](cfg)
    if cfg.out:
        emit_csv(table, cfg.out)
    return table

"""Command line entry point: ``mvml reproduce | simulate | learn | eval-*``."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import harness
from .errors import InvalidArgument
from .kmeans import init_random, kmeans_fit, miscluster_rate
from .knn import DEFAULT_K_GRID, KnnConfig, misclassification_rate, select_k_cv
from .model import LabeledDataset, ModelConfig, MultiViewDataset, sample_labeled, sample_multiview
from .sampleid import draw_id_pairs, estimate_threshold, offset_vector
from .spectral import MahalanobisMetric, read_matrix_csv, spectral_learn, write_matrix_csv
from .twosample import asymptotic_test, permutation_test


def _fail(exc):
    raise click.ClickException(str(exc)) from exc


def _model_config(config_path, d, K, lambda_scale, sigma2, alpha, seed) -> ModelConfig:
    if config_path:
        return ModelConfig.load(config_path)
    alpha_t = tuple(float(a) for a in alpha.split(",") if a.strip()) if alpha else ()
    return ModelConfig(d, K, lambda_scale, sigma2, alpha_t, seed)


def _load_npz(path):
    try:
        return np.load(path)
    except (OSError, ValueError) as exc:
        _fail(OSError(f"cannot read dataset {path}: {exc}"))


def _labeled(path) -> LabeledDataset:
    z = _load_npz(path)
    if "points" not in z or "labels" not in z:
        _fail(InvalidArgument(f"{path}: expected arrays 'points' and 'labels'"))
    return LabeledDataset(z["points"], z["labels"])


def _multiview(path) -> MultiViewDataset:
    z = _load_npz(path)
    if "views" not in z:
        _fail(InvalidArgument(f"{path}: expected array 'views' (m x n x d)"))
    return MultiViewDataset(z["views"])


def _metric(path, d) -> MahalanobisMetric:
    if not path:
        return MahalanobisMetric.euclidean(d)
    return MahalanobisMetric(read_matrix_csv(path), name=Path(path).stem)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Self-supervised metric learning for multi-view data."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@click.option("--experiment", type=click.Choice(harness.EXPERIMENTS), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--reps", type=int, default=None)
@click.option("--n-perm", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV path (default results/<experiment>.csv).")
@click.option("--fast", is_flag=True, help="A fifth of the replicates and trimmed grids.")
@click.option("--mnist-dir", type=click.Path(file_okay=False), default=None)
@click.option("--shift-px", type=int, default=None)
@click.option("--mnist-k", type=int, default=None)
@click.option("--workers", type=int, default=None, help="Worker processes for replicates.")
@click.option("--svg", type=click.Path(dir_okay=False), default=None, help="Also plot the curves (needs matplotlib).")
def reproduce(experiment, seed, reps, n_perm, config_path, out, fast, mnist_dir, shift_px, mnist_k, workers, svg):
    """Run one of the simulation or MNIST experiments and write a CSV."""
    try:
        cfg = harness.load_config(config_path, experiment) if config_path else harness.default_config(experiment)
        if cfg.experiment != experiment:
            raise InvalidArgument(f"config is for {cfg.experiment}, not {experiment}")
        if fast:
            cfg = harness.fast_profile(cfg)
        flags = dict(seed=seed, reps=reps, n_perm=n_perm, mnist_dir=mnist_dir, shift_px=shift_px, mnist_k=mnist_k, workers=workers)
        cfg = cfg.with_overrides(**{k: v for k, v in flags.items() if v is not None})
        cfg = cfg.with_overrides(out=out or cfg.out or f"results/{experiment}.csv")
        table = harness.run_experiment(cfg)
        if svg:
            harness.emit_svg(table, svg)
    except (InvalidArgument, OSError) as exc:
        _fail(exc)
    click.echo(f"wrote {len(table)} rows to {cfg.out}")


@main.command()
@click.option("--model-config", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--d", type=int, default=100)
@click.option("--K", "K", type=int, default=10)
@click.option("--lambda-scale", type=float, default=4.0)
@click.option("--sigma2", type=float, default=1.0)
@click.option("--alpha", default="", help="Comma-separated latent mixture offset (length K).")
@click.option("--seed", type=int, default=0, help="Seed of the factor basis.")
@click.option("--data-seed", type=int, default=1)
@click.option("--kind", type=click.Choice(["multiview", "labeled", "pairs"]), default="multiview")
@click.option("--m", type=int, default=1000, help="Samples (multiview) or pairs.")
@click.option("--n", type=int, default=10, help="Views per sample.")
@click.option("--s", type=int, default=500, help="Labeled sample size.")
@click.option("--dz-norm", type=float, default=0.0, help="Latent offset between paired views.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def simulate(model_config, d, K, lambda_scale, sigma2, alpha, seed, data_seed, kind, m, n, s, dz_norm, out):
    """Draw a dataset from the factor model and save it as .npz."""
    try:
        model = _model_config(model_config, d, K, lambda_scale, sigma2, alpha, seed).build()
        rng = np.random.default_rng(data_seed)
        if kind == "multiview":
            np.savez(out, views=sample_multiview(model, m, n, rng).data)
        elif kind == "labeled":
            data = sample_labeled(model, s, rng)
            np.savez(out, points=data.points, labels=data.labels)
        else:
            delta = offset_vector(model.K, dz_norm) if dz_norm else np.zeros(model.K)
            x1, x2 = draw_id_pairs(model, delta, m, rng)
            np.savez(out, x1=x1, x2=x2)
    except (InvalidArgument, OSError) as exc:
        _fail(exc)
    click.echo(f"wrote {kind} data to {out}")


@main.command()
@click.argument("dataset", type=click.Path(exists=True, dir_okay=False))
@click.option("--K", "K", type=int, required=True)
@click.option("--target", type=click.Choice(["star", "star_star"]), default="star_star")
@click.option("--method", type=click.Choice(["lapack", "jacobi"]), default="lapack")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def learn(dataset, K, target, method, out):
    """Learn a metric from a multi-view .npz and write its matrix as CSV."""
    try:
        est = spectral_learn(_multiview(dataset), K, method=method)
        write_matrix_csv(est.m_star if target == "star" else est.m_star_star, out)
    except (InvalidArgument, OSError) as exc:
        _fail(exc)
    click.echo(f"wrote {target} metric ({est.m_star.shape[0]}x{est.m_star.shape[0]}) to {out}")


@main.command("eval-knn")
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--test", "test_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--metric", "metric_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--k", type=int, default=0, help="Neighbors; 0 picks k by 5-fold cross-validation.")
@click.option("--seed", type=int, default=0)
def eval_knn(train_path, test_path, metric_path, k, seed):
    """Misclassification of k-NN on a labeled test set."""
    try:
        train, test = _labeled(train_path), _labeled(test_path)
        metric = _metric(metric_path, train.d)
        if k == 0:
            k = select_k_cv(train, metric, DEFAULT_K_GRID, 5, np.random.default_rng(seed))
        err = misclassification_rate(train, test, metric, KnnConfig(k))
    except (InvalidArgument, OSError) as exc:
        _fail(exc)
    click.echo(f"k={k} misclassification={err:.6f}")


@main.command("eval-twosample")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--metric", "metric_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--method", type=click.Choice(["permutation", "asymptotic"]), default="permutation")
@click.option("--n-perm", type=int, default=199)
@click.option("--alpha", type=float, default=0.05)
@click.option("--seed", type=int, default=0)
def eval_twosample(data_path, metric_path, method, n_perm, alpha, seed):
    """Energy-distance test of the +1 group against the -1 group."""
    try:
        data = _labeled(data_path)
        metric = _metric(metric_path, data.d)
        if method == "permutation":
            res = permutation_test(data, metric, n_perm, alpha, np.random.default_rng(seed))
        else:
            res = asymptotic_test(data, metric, alpha)
    except (InvalidArgument, OSError, ValueError) as exc:
        _fail(exc)
    click.echo(f"statistic={res.statistic:.6g} p_value={res.p_value:.6g} reject={res.reject}")


@main.command("eval-kmeans")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--metric", "metric_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--max-iter", type=int, default=100)
@click.option("--seed", type=int, default=0)
def eval_kmeans(data_path, metric_path, max_iter, seed):
    """Two-cluster k-means from a random start, scored against the labels."""
    try:
        data = _labeled(data_path)
        metric = _metric(metric_path, data.d)
        res = kmeans_fit(data.points, metric, init_random(data.points, np.random.default_rng(seed)), max_iter)
        rate = miscluster_rate(res.labels, data.labels)
    except (InvalidArgument, OSError) as exc:
        _fail(exc)
    click.echo(f"iterations={res.iterations} miscluster_rate={rate:.6f}")


@main.command("eval-sampleid")
@click.option("--calibration", type=click.Path(exists=True, dir_okay=False), required=True, help="Multi-view .npz for the threshold.")
@click.option("--pairs", type=click.Path(exists=True, dir_okay=False), required=True, help=".npz with arrays x1 and x2.")
@click.option("--metric", "metric_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--alpha", type=float, default=0.05)
def eval_sampleid(calibration, pairs, metric_path, alpha):
    """Fraction of pairs declared to come from different samples."""
    try:
        mv = _multiview(calibration)
        metric = _metric(metric_path, mv.d)
        thr = estimate_threshold(mv, metric, alpha)
        z = _load_npz(pairs)
        rate = float(np.mean(metric.pair_sq(z["x1"], z["x2"]) > thr.value))
    except (InvalidArgument, OSError, KeyError) as exc:
        _fail(exc)
    click.echo(f"threshold={thr.value:.6g} different_rate={rate:.6f}")


if __name__ == "__main__":
    sys.exit(main())

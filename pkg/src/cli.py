"""
`cli.py`:

This module contains the command-line interface: train, sample, density,
eval, diagnose and generate. Every command logs failures with their
traceback and exits with a non-zero status.

Usage:
    python -m src.cli train --config run.toml
    python -m src.cli sample --ckpt output/model.ckpt --count 1000 --seed 0 --out samples.csv
    python -m src.cli density --ckpt output/model.ckpt --grid 200 --out density.csv
    python -m src.cli eval --ckpt output/model.ckpt --test output/test.csv --out eval.jsonl
    python -m src.cli diagnose --ckpt output/model.ckpt --out-dir diagnostics
    python -m src.cli generate vmf_s2 --count 10000 --seed 0 --out data.csv
"""

import functools
import math
import os
import traceback
from typing import Optional

import click
import numpy as np
import pandas as pd

from src import checkpoint, data_loader, evalsuite, flow, generate_data, geometry, nnet
from src import config as run_config
from src import distributions
from src.data_loader import DataFormat
from src.geometry import ManifoldKind
from src.log_config import logger
from src.run_utils import run_training
from src.utils import export_frame_to_csv, export_frame_to_jsonl

ESTIMATOR_STATS_NAME = "estimator_statistics.csv"
ERROR_BOUND_NAME = "error_bound.csv"


def _reported(command):
    """Log any failure with its traceback and turn it into exit status 1."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except click.ClickException:
            raise
        except Exception as e:
            logger.error(f"Error in {command.__name__}: {str(e)}")
            logger.error(traceback.format_exc())
            raise click.ClickException(str(e)) from e

    return wrapper


def _coordinate_frame(points: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame(points, columns=[f"x{i}" for i in range(points.shape[1])])


@click.group()
def cli():
    """Manifold free-form flows."""


@cli.command("train")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@_reported
def cmd_train(config_path: str):
    """Train a flow from a TOML run configuration."""
    config = run_config.load_config(config_path)
    result = run_training(config)
    if result is None:
        raise click.ClickException("Training failed, see the log for details")
    final = result.metrics.iloc[-1] if len(result.metrics) else None
    if final is not None and not math.isnan(final["val_nll"]):
        logger.info(f"Final validation NLL {final['val_nll']:.5f}")
    click.echo(f"Checkpoint written to {result.checkpoint_path}")


@cli.command("sample")
@click.option("--ckpt", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--count", required=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_reported
def cmd_sample(ckpt: str, count: int, seed: int, out: str):
    """Draw samples in one decoder pass and write them as embedded points."""
    model = checkpoint.load_checkpoint(ckpt).model
    samples = flow.sample(model, count, np.random.default_rng(seed))
    data_loader.save_points_csv(samples, out)


@cli.command("density")
@click.option("--ckpt", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--points", "points_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", default=DataFormat.EMBEDDED.value, show_default=True,
              type=click.Choice([f.value for f in DataFormat]))
@click.option("--grid", type=click.IntRange(min=2), help="Quadrature grid resolution instead of --points")
@click.option("--direction", default="decoder", show_default=True, type=click.Choice(["decoder", "encoder"]))
@click.option("--seed", default=0, show_default=True, type=int, help="Random source of the SO(3) grid")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_reported
def cmd_density(ckpt: str, points_path: Optional[str], fmt: str, grid: Optional[int], direction: str,
                seed: int, out: str):
    """Evaluate the model log-density, in nats with respect to the Riemannian volume."""
    if (points_path is None) == (grid is None):
        raise click.UsageError("Give exactly one of --points and --grid")
    model = checkpoint.load_checkpoint(ckpt).model
    if points_path is not None:
        points = data_loader.ingest_dataset(points_path, fmt, model.manifold)
    else:
        points = evalsuite.quadrature_grid(model.manifold, grid, np.random.default_rng(seed)).nodes
    values = np.concatenate([
        flow.exact_log_density(model, points[start:start + evalsuite.DEFAULT_CHUNK], direction, on_singular="nan")
        for start in range(0, len(points), evalsuite.DEFAULT_CHUNK)
    ])
    singular = int(np.sum(np.isnan(values)))
    if singular:
        logger.warning(f"{singular} point(s) have a singular Jacobian; their density is NaN")
    frame = _coordinate_frame(points)
    frame["log_density"] = values
    export_frame_to_csv(frame, out)


@cli.command("eval")
@click.option("--ckpt", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--test", "test_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", default=DataFormat.EMBEDDED.value, show_default=True,
              type=click.Choice([f.value for f in DataFormat]))
@click.option("--refine-sigma", default=0.0, show_default=True, type=click.FloatRange(min=0.0))
@click.option("--refine-tries", default=flow.DEFAULT_REFINE_TRIES, show_default=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_reported
def cmd_eval(ckpt: str, test_path: str, fmt: str, refine_sigma: float, refine_tries: int, seed: int, out: str):
    """Report test NLL, reconstruction error and W2 against model samples as JSON lines."""
    loaded = checkpoint.load_checkpoint(ckpt)
    model = loaded.model
    test = data_loader.ingest_dataset(test_path, fmt, model.manifold)
    rng = np.random.default_rng(seed)
    result = evalsuite.test_nll(model, test, refine_sigma, refine_tries, rng)
    recon_x, recon_z = flow.reconstruction_losses(model, test)
    w2_count = min(len(test), evalsuite.MAX_W2_POINTS)
    reference = test[rng.choice(len(test), size=w2_count, replace=False)]
    w2 = evalsuite.wasserstein2(flow.sample(model, w2_count, rng), reference, model.manifold)
    record = {
        "test_nll": result.mean_nll, "test_nll_std": result.std_nll, "count": result.count,
        "excluded": result.excluded, "recon_x": recon_x, "recon_z": recon_z, "w2": w2, "w2_points": w2_count,
        "refine_sigma": refine_sigma, "refine_tries": refine_tries, "seed": seed,
        "train_seed": loaded.seed, "config_hash": loaded.extra.get("config_hash", ""),
    }
    logger.info(f"Test NLL {result.mean_nll:.5f} ± {result.std_nll:.5f} over {result.count} points, W2 {w2:.5f}")
    export_frame_to_jsonl(pd.DataFrame([record]), out)


def _fresh_model(kind: str, dim: int, width: int, seed: int) -> flow.FlowModel:
    kind = ManifoldKind(kind)
    if kind is ManifoldKind.SO3:
        man = geometry.special_orthogonal3()
    elif kind is ManifoldKind.SPHERE:
        man = geometry.sphere(dim)
    elif kind is ManifoldKind.TORUS:
        man = geometry.torus(dim)
    else:
        man = geometry.poincare_ball(dim)
    spec = nnet.NetworkSpec(input_dim=man.m, residual_blocks=1, inner_depth=2, inner_width=width, init_scale=0.1)
    return flow.create_model(man, spec, spec, distributions.uniform_latent(man), np.random.default_rng(seed))


@cli.command("diagnose")
@click.option("--ckpt", type=click.Path(exists=True, dir_okay=False), help="Trained model; a fresh one otherwise")
@click.option("--manifold", "kind", type=click.Choice([k.value for k in ManifoldKind]),
              help="Manifold of a fresh near-identity model")
@click.option("--dim", default=2, show_default=True, type=click.IntRange(min=1))
@click.option("--width", default=16, show_default=True, type=click.IntRange(min=1))
@click.option("--points", "point_count", default=100, show_default=True, type=click.IntRange(min=1),
              help="Random points of the error-bound report")
@click.option("--draws", default=1_000_000, show_default=True, type=click.IntRange(min=2))
@click.option("--repeats", default=2000, show_default=True, type=click.IntRange(min=2))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@_reported
def cmd_diagnose(ckpt: Optional[str], kind: Optional[str], dim: int, width: int, point_count: int, draws: int,
                 repeats: int, seed: int, out_dir: str):
    """Write estimator statistics and the gradient error-bound report."""
    if ckpt is not None:
        model = checkpoint.load_checkpoint(ckpt).model
    elif kind is not None:
        model = _fresh_model(kind, dim, width, seed)
    else:
        model = None
    stats_config = evalsuite.EstimatorStatsConfig(seed=seed, hutchinson_draws=draws, example_draws=draws,
                                                  surrogate_repeats=repeats)
    stats = evalsuite.estimator_statistics(stats_config, model)
    export_frame_to_csv(stats, os.path.join(out_dir, ESTIMATOR_STATS_NAME))
    if model is not None:
        points = geometry.sample_uniform(model.manifold, point_count, np.random.default_rng(seed))
        report = evalsuite.error_bound_report(model, points)
        if not report["holds"].all():
            logger.warning(f"Error bound violated at {int((~report['holds']).sum())} point(s)")
        export_frame_to_csv(report, os.path.join(out_dir, ERROR_BOUND_NAME))


@cli.command("generate")
@click.argument("name", type=click.Choice([d.value for d in generate_data.DatasetName]))
@click.option("--count", required=True, type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_reported
def cmd_generate(name: str, count: int, seed: int, out: str):
    """Write a synthetic dataset as embedded points."""
    points = generate_data.generate_dataset(name, count, np.random.default_rng(seed))
    data_loader.save_points_csv(points, out)


def main():
    cli()


if __name__ == "__main__":
    main()

"""
`run_utils.py`:

This module contains the function run_training, which runs a configured
training job end to end: data loading and splitting, model creation,
training with checkpointing, and the run artifacts. It is common to the CLI
and the script that runs the demo automatically.
"""

import os
import time
import traceback
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from src import config as run_config
from src import data_loader, flow, generate_data, trainer
from src.config import RunConfig
from src.flow import FlowModel
from src.log_config import logger
from src.utils import ensure_dir_exists, export_frame_to_csv, log_memory_usage

METRICS_NAME = "metrics.csv"
TEST_SPLIT_NAME = "test.csv"
SAMPLES_NAME = "samples.csv"


@dataclass
class TrainingRun:
    model: FlowModel
    metrics: pd.DataFrame
    test: np.ndarray
    config_hash: str
    checkpoint_path: str


def load_splits(config: RunConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Load or generate the configured dataset and split it.

    Returns:
        Tuple of (train, validation, test) points
    """
    data = config.data
    if data.synthetic:
        points = generate_data.generate_dataset(data.synthetic, data.count, np.random.default_rng(data.split_seed))
    else:
        points = data_loader.ingest_dataset(data.path, data.format, config.manifold)
    return data_loader.split_dataset(points, data.split_seed, data.fractions)


def run_training(config: RunConfig) -> Optional[TrainingRun]:
    """
    Run a training job and write its artifacts into the output directory.

    Args:
        config (RunConfig): Validated run configuration

    Returns:
        TrainingRun, or None if the run failed (the error is logged)
    """
    try:
        output_dir = config.output.directory
        ensure_dir_exists(output_dir)
        logger.info("Writing resolved config")
        digest = run_config.write_resolved_config(config, output_dir)

        logger.info("Loading data")
        train_points, validation, test = load_splits(config)
        data_loader.save_points_csv(test, os.path.join(output_dir, TEST_SPLIT_NAME))

        logger.info("Creating model")
        rng = np.random.default_rng(config.train.seed)
        latent = config.latent.build(config.manifold, train_points, rng)
        model = flow.create_model(config.manifold, config.encoder, config.decoder, latent, rng)

        logger.info(f"Training on {len(train_points)} points")
        start_time = time.time()
        log_memory_usage()
        model, metrics = trainer.train(model, train_points, config.train,
                                       validation=validation if len(validation) else None,
                                       checkpoint_path=config.output.checkpoint_path,
                                       checkpoint_header={"config_hash": digest})
        logger.info(f"Training run finished in {time.time() - start_time:.2f} seconds")
        export_frame_to_csv(metrics, os.path.join(output_dir, METRICS_NAME))

        if config.output.emit_samples:
            samples = flow.sample(model, config.output.emit_samples, np.random.default_rng(config.train.seed))
            data_loader.save_points_csv(samples, os.path.join(output_dir, SAMPLES_NAME))
        return TrainingRun(model, metrics, test, digest, config.output.checkpoint_path)
    except Exception as e:
        logger.error(f"Error in run_training: {str(e)}")
        logger.error(traceback.format_exc())
        return None

"""
`run_flow.py`:

This module contains the main function to run the manifold flow process end-to-end automatically
(without user input): generate a von Mises-Fisher dataset on the 2-sphere, train a flow on it,
and evaluate the test NLL against the analytic optimum.
"""

import os
import sys
import time

import numpy as np

# Ensure the 'src' directory is added to the system path
sys.path.append(os.path.abspath(os.path.dirname(__file__)))

from src import evalsuite, generate_data
from src.config import parse_config
from src.log_config import logger
from src.run_utils import run_training
from src.utils import log_memory_usage

DEMO_CONFIG = """
[manifold]
kind = "sphere"
n = 2

[model.encoder]
residual_blocks = 2
inner_depth = 2
inner_width = 64
activation = "silu"

[model.latent]
kind = "uniform"

[train]
batch_size = 256
step_count = 20000
learning_rate = 1e-3
schedule = "one_cycle"
seed = 0
validation_every = 1000

[train.loss_weights]
beta_r_x = 100.0
beta_u_x = 10.0

[data]
synthetic = "vmf_s2"
count = 20000

[output]
directory = "output/vmf_s2"
emit_samples = 2000
"""


def main():
    current_dir = os.path.dirname(os.path.abspath(__file__))

    try:
        logger.info("Parsing demo configuration")
        config = parse_config(DEMO_CONFIG, current_dir)

        logger.info("Running training")
        start_time = time.time()
        log_memory_usage()
        run = run_training(config)
        end_time = time.time()
        log_memory_usage()

        if run is not None:
            logger.info(f"Flow trained successfully in {end_time - start_time:.2f} seconds!")

            result = evalsuite.test_nll(run.model, run.test, rng=np.random.default_rng(0))
            optimum = generate_data.reference_nll(config.data.synthetic, run.test)
            print("Evaluation:")
            print(f"  Test NLL: {result.mean_nll:.4f} ± {result.std_nll:.4f} ({result.count} points)")
            print(f"  Analytic optimum: {optimum:.4f}")
            print(f"  Gap: {result.mean_nll - optimum:.4f} nats")
            print(f"Artifacts written to {config.output.directory}")
        else:
            logger.error("Training failed. Please check the configuration and data.")

    except Exception as e:
        logger.error(f"An error occurred: {str(e)}")
        logger.exception("Exception details:")


if __name__ == "__main__":
    main()

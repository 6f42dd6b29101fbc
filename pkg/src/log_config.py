"""
`log_config.py`:

This module contains the configuration for logging in the manifold flow package.
"""


import logging

# Set up logging
logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("mfff")

# OR-Tools logs through absl; keep its chatter out of run logs
logging.getLogger("absl").setLevel(logging.WARNING)

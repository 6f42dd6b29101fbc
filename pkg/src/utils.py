"""
`utils.py`:

This module contains utility functions for the manifold flow project.
These functions provide support for writing artifacts, directory handling
and resource logging.
"""

import os
import tempfile
from typing import Optional

import numpy as np
import pandas as pd
import psutil

from src.log_config import logger

# Configuration
OUTPUT_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), 'output')
OUTPUT_DIR_ENV = "MFFF_OUTPUT_DIR"
FLOAT_FORMAT = "%.17g"


def resolve_output_dir(configured: Optional[str] = None) -> str:
    """Return the output directory, honouring the environment override."""
    return os.environ.get(OUTPUT_DIR_ENV) or configured or OUTPUT_DIR


def ensure_dir_exists(directory):
    """Ensure that a directory exists, creating it if necessary."""
    if directory and not os.path.exists(directory):
        os.makedirs(directory)


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """
    Write bytes to `path` through a temporary file and a rename.

    Args:
        path (str): Destination file
        payload (bytes): File contents
    """
    directory = os.path.dirname(os.path.abspath(path))
    ensure_dir_exists(directory)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def export_frame_to_csv(frame: pd.DataFrame, path: str, header: bool = True) -> None:
    """
    Export a data frame to CSV with round-trip float formatting.

    Args:
        frame (pd.DataFrame): Table to export
        path (str): Destination file
        header (bool): Whether to write the column names
    """
    text = frame.to_csv(index=False, header=header, float_format=FLOAT_FORMAT, lineterminator="\n")
    atomic_write_text(path, text)
    logger.info(f"Exported {len(frame)} rows to {path}")


def export_points_to_csv(points: np.ndarray, path: str) -> None:
    """Export embedded points as headerless CSV, one point per row."""
    export_frame_to_csv(pd.DataFrame(np.atleast_2d(points)), path, header=False)


def export_frame_to_jsonl(frame: pd.DataFrame, path: str) -> None:
    """Export a data frame as JSON lines."""
    text = frame.to_json(orient="records", lines=True, double_precision=15)
    atomic_write_text(path, text if text.endswith("\n") else text + "\n")
    logger.info(f"Exported {len(frame)} records to {path}")


def log_memory_usage():
    process = psutil.Process(os.getpid())
    mem_info = process.memory_info()
    logger.info(f"Memory usage: {mem_info.rss / 1024 / 1024:.2f} MB")

"""
`data_loader.py`:

This module provides functions to load manifold datasets from CSV files into
arrays of embedded points, canonicalize them onto the manifold and split
them into training, validation and test sets.

Supported row formats:
    angles          n angles in radians per row, mapped to (cos, sin) per circle
    unit_vectors    m coordinates, renormalized
    rotmat9         9 entries of a rotation matrix in row-major order
    latlon_degrees  latitude in [-90, 90], longitude in [-180, 180] on S²
    embedded        m embedding coordinates of any manifold
"""

import csv
import math
from enum import Enum
from io import BytesIO, StringIO, TextIOWrapper
from typing import List, Tuple, Union

import numpy as np

from src import geometry
from src.exceptions import DegenerateInput, OffManifoldRow, ParseError
from src.geometry import ManifoldDescriptor, ManifoldKind
from src.log_config import logger
from src.utils import export_points_to_csv

CANONICALIZE_TOL = 1e-3

FileLike = Union[str, BytesIO, StringIO, TextIOWrapper]


class DataFormat(Enum):
    """Enumeration of the dataset row formats."""
    ANGLES = "angles"
    UNIT_VECTORS = "unit_vectors"
    ROTMAT9 = "rotmat9"
    LATLON_DEGREES = "latlon_degrees"
    EMBEDDED = "embedded"


def ensure_text_mode(file: FileLike):
    """
    Ensure the file is opened in text mode.

    Args:
        file (FileLike): The file object or path.

    Returns:
        A file object in text mode.
    """
    if isinstance(file, str):
        return open(file, newline="", encoding="utf-8")
    elif isinstance(file, BytesIO):
        return TextIOWrapper(file, encoding="utf-8")
    elif isinstance(file, (TextIOWrapper, StringIO)):
        return file
    else:
        raise ValueError("Unsupported file type")


def expected_columns(fmt: DataFormat, man: ManifoldDescriptor) -> int:
    if fmt is DataFormat.ANGLES:
        if man.kind is ManifoldKind.TORUS or (man.kind is ManifoldKind.SPHERE and man.n == 1):
            return man.n
        raise ValueError(f"angles format needs a torus or S¹, got {man.kind.value}({man.n})")
    if fmt is DataFormat.UNIT_VECTORS:
        if man.kind not in (ManifoldKind.SPHERE, ManifoldKind.TORUS):
            raise ValueError(f"unit_vectors format needs a sphere or torus, got {man.kind.value}")
        return man.m
    if fmt is DataFormat.ROTMAT9:
        if man.kind is not ManifoldKind.SO3:
            raise ValueError(f"rotmat9 format needs SO(3), got {man.kind.value}")
        return 9
    if fmt is DataFormat.LATLON_DEGREES:
        if man.kind is not ManifoldKind.SPHERE or man.n != 2:
            raise ValueError(f"latlon_degrees format needs S², got {man.kind.value}({man.n})")
        return 2
    return man.m


def latlon_to_sphere(lat_deg, lon_deg) -> np.ndarray:
    """(cos lat·cos lon, cos lat·sin lon, sin lat) for angles in degrees."""
    lat = np.radians(np.asarray(lat_deg, dtype=np.float64))
    lon = np.radians(np.asarray(lon_deg, dtype=np.float64))
    return np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=-1)


def angles_to_torus(angles) -> np.ndarray:
    """Map n angles per row to the (cos, sin) embedding of the n-torus."""
    angles = np.asarray(angles, dtype=np.float64)
    return np.stack([np.cos(angles), np.sin(angles)], axis=-1).reshape(angles.shape[:-1] + (-1,))


def read_rows(file: FileLike, columns: int) -> Tuple[np.ndarray, List[int]]:
    """
    Read numeric CSV rows with line numbers.

    Blank lines and lines starting with '#' are skipped; a non-numeric first
    row is treated as a header.

    Args:
        file (FileLike): Path or file object
        columns (int): Required number of columns

    Returns:
        Tuple of (values of shape (N, columns), source line number per row)
    """
    values: List[List[float]] = []
    lines: List[int] = []
    logger.debug(f"Starting to read rows from {file}")
    try:
        with ensure_text_mode(file) as f:
            reader = csv.reader(f)
            for row in reader:
                line = reader.line_num
                cells = [cell.strip() for cell in row]
                if not cells or all(cell == "" for cell in cells) or cells[0].startswith("#"):
                    continue
                try:
                    parsed = [float(cell) for cell in cells]
                except ValueError:
                    if not values and line == 1:
                        logger.debug(f"Treating line 1 as header: {row}")
                        continue
                    raise ParseError(f"non-numeric value in {row}", line)
                if len(parsed) != columns:
                    raise ParseError(f"expected {columns} columns, found {len(parsed)}", line)
                if not all(math.isfinite(value) for value in parsed):
                    raise ParseError(f"non-finite value in {row}", line)
                values.append(parsed)
                lines.append(line)
        logger.debug(f"Successfully read {len(values)} rows")
    except Exception as e:
        logger.error(f"Error reading rows: {str(e)}")
        raise
    return np.array(values, dtype=np.float64).reshape(-1, columns), lines


def canonicalize(man: ManifoldDescriptor, raw: np.ndarray, tol: float = CANONICALIZE_TOL) -> np.ndarray:
    """
    Project rows onto the manifold, rejecting any row that moves more than `tol`.

    Raises:
        OffManifoldRow: For the first rejected row, with its index and distance
    """
    projected = np.empty_like(raw)
    for index, row in enumerate(raw):
        try:
            projected[index] = geometry.project(man, row)
        except DegenerateInput:
            raise OffManifoldRow(index, math.inf)
        distance = float(np.linalg.norm(projected[index] - row))
        if distance > tol:
            raise OffManifoldRow(index, distance)
    return projected


def ingest_dataset(path: FileLike, fmt: Union[str, DataFormat], man: ManifoldDescriptor) -> np.ndarray:
    """
    Load a dataset file into on-manifold embedded points.

    Args:
        path (FileLike): CSV path or file object
        fmt: Row format name or DataFormat
        man (ManifoldDescriptor): Target manifold

    Returns:
        np.ndarray: Points of shape (N, m)
    """
    fmt = DataFormat(fmt)
    columns = expected_columns(fmt, man)
    values, lines = read_rows(path, columns)
    if fmt is DataFormat.ANGLES:
        points = angles_to_torus(values)
    elif fmt is DataFormat.LATLON_DEGREES:
        for (lat, lon), line in zip(values, lines):
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                raise ParseError(f"latitude/longitude ({lat}, {lon}) out of range", line)
        points = latlon_to_sphere(values[:, 0], values[:, 1])
    else:
        points = canonicalize(man, values)
    points = geometry.check_on_manifold(man, points)
    logger.info(f"Ingested {len(points)} points in {fmt.value} format onto {man.kind.value}({man.n})")
    return points


def split_dataset(points: np.ndarray, seed: int,
                  fractions: Tuple[float, float, float] = (0.8, 0.1, 0.1)) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Shuffle and split points into train, validation and test sets.

    Args:
        points (np.ndarray): Points of shape (N, m)
        seed (int): Shuffle seed
        fractions: Train, validation and test fractions summing to 1

    Returns:
        Tuple of (train, validation, test)
    """
    if len(fractions) != 3 or any(f < 0.0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"Split fractions must be three nonnegative numbers summing to 1, got {fractions}")
    order = np.random.default_rng(seed).permutation(len(points))
    n_val = int(round(fractions[1] * len(points)))
    n_test = int(round(fractions[2] * len(points)))
    n_train = len(points) - n_val - n_test
    train = points[order[:n_train]]
    validation = points[order[n_train:n_train + n_val]]
    test = points[order[n_train + n_val:]]
    logger.info(f"Split {len(points)} points into {len(train)} train, {len(validation)} validation "
                f"and {len(test)} test")
    return train, validation, test


def save_points_csv(points: np.ndarray, path: str) -> None:
    """Write points in the embedded format, re-ingestible with `ingest_dataset`."""
    export_points_to_csv(points, path)

"""
`generate_data.py`:

A module to generate synthetic manifold datasets with known densities, used
for end-to-end training checks and demos.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional

import numpy as np
from scipy.spatial.transform import Rotation

from src import distributions, geometry
from src.distributions import LatentSpec, ToyKind, ToyTargetSpec, VmfComponent
from src.geometry import ManifoldDescriptor
from src.log_config import logger

VMF_KAPPA = 10.0
WRAPPED_SIGMA = 0.5
CONCENTRATED_SO3_SIGMA = 0.3


class DatasetName(Enum):
    """Enumeration of the synthetic datasets."""
    VMF_S2 = "vmf_s2"
    VMF_MIXTURE_S2 = "vmf_mixture_s2"
    UNIFORM_T2 = "uniform_t2"
    WRAPPED_NORMAL_H2 = "wrapped_normal_h2"
    ONE_GAUSSIAN_H2 = "one_gaussian_h2"
    FIVE_GAUSSIANS_H2 = "five_gaussians_h2"
    SWISH_H2 = "swish_h2"
    CHECKERBOARD_H2 = "checkerboard_h2"
    UNIFORM_SO3 = "uniform_so3"
    CONCENTRATED_SO3 = "concentrated_so3"


@dataclass(frozen=True)
class SyntheticDataset:
    """
    A synthetic target: its manifold, a sampler and, where known, its log-density.
    """
    name: DatasetName
    manifold: ManifoldDescriptor
    sample: Callable[[int, np.random.Generator], np.ndarray]
    log_prob: Optional[Callable[[np.ndarray], np.ndarray]] = None


def vmf_target() -> LatentSpec:
    return distributions.single_vmf((0.0, 0.0, 1.0), VMF_KAPPA)


def vmf_mixture_target() -> LatentSpec:
    means = [(0.0, 0.0, 1.0), (1.0, 0.0, 0.0), (0.0, -0.6, -0.8)]
    return distributions.vmf_mixture(geometry.sphere(2), [
        VmfComponent(mean, kappa, weight) for mean, kappa, weight in zip(means, (20.0, 8.0, 4.0), (0.5, 0.3, 0.2))
    ])


def wrapped_normal_target() -> LatentSpec:
    return distributions.wrapped_normal(geometry.poincare_ball(2), WRAPPED_SIGMA)


def _latent_dataset(name: DatasetName, spec: LatentSpec) -> SyntheticDataset:
    return SyntheticDataset(name, spec.manifold,
                            lambda count, rng: distributions.sample(spec, count, rng),
                            lambda x: distributions.log_prob(spec, x))


def _toy_dataset(name: DatasetName, kind: ToyKind) -> SyntheticDataset:
    spec = ToyTargetSpec(kind, sigma=WRAPPED_SIGMA if kind is ToyKind.ONE_GAUSSIAN else None)
    return SyntheticDataset(name, spec.manifold,
                            lambda count, rng: distributions.toy_sample(spec, count, rng),
                            lambda x: distributions.toy_log_prob(spec, x, strict=False))


def _concentrated_rotations(count: int, rng: np.random.Generator) -> np.ndarray:
    rotvecs = CONCENTRATED_SO3_SIGMA * rng.standard_normal((count, 3))
    return Rotation.from_rotvec(rotvecs).as_matrix().reshape(count, 9)


def get_dataset(name) -> SyntheticDataset:
    """
    Look up a synthetic dataset by name.

    Args:
        name: DatasetName or its string value

    Returns:
        SyntheticDataset: Manifold, sampler and optional log-density
    """
    name = DatasetName(name)
    if name is DatasetName.VMF_S2:
        return _latent_dataset(name, vmf_target())
    if name is DatasetName.VMF_MIXTURE_S2:
        return _latent_dataset(name, vmf_mixture_target())
    if name is DatasetName.UNIFORM_T2:
        return _latent_dataset(name, distributions.uniform_latent(geometry.torus(2)))
    if name is DatasetName.WRAPPED_NORMAL_H2:
        return _latent_dataset(name, wrapped_normal_target())
    if name is DatasetName.ONE_GAUSSIAN_H2:
        return _toy_dataset(name, ToyKind.ONE_GAUSSIAN)
    if name is DatasetName.FIVE_GAUSSIANS_H2:
        return _toy_dataset(name, ToyKind.FIVE_GAUSSIANS)
    if name is DatasetName.SWISH_H2:
        return _toy_dataset(name, ToyKind.SWISH)
    if name is DatasetName.CHECKERBOARD_H2:
        return _toy_dataset(name, ToyKind.CHECKERBOARD)
    if name is DatasetName.UNIFORM_SO3:
        return _latent_dataset(name, distributions.uniform_latent(geometry.special_orthogonal3()))
    return SyntheticDataset(name, geometry.special_orthogonal3(), _concentrated_rotations)


def generate_dataset(name, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` points of a synthetic dataset."""
    dataset = get_dataset(name)
    points = dataset.sample(count, rng)
    logger.info(f"Generated {count} points of {dataset.name.value}")
    return points


def reference_nll(name, points: np.ndarray) -> float:
    """
    Mean −log p_target over points, the best NLL a model can reach on them.

    Raises:
        ValueError: If the dataset has no closed-form density
    """
    dataset = get_dataset(name)
    if dataset.log_prob is None:
        raise ValueError(f"Dataset {dataset.name.value} has no closed-form density")
    return float(-np.mean(dataset.log_prob(points)))

import math

import numpy as np
import pytest

from src import distributions, generate_data, geometry
from src.generate_data import DatasetName


@pytest.mark.parametrize("name", list(DatasetName), ids=[d.value for d in DatasetName])
def test_points_lie_on_dataset_manifold(name, rng):
    dataset = generate_data.get_dataset(name)
    points = generate_data.generate_dataset(name, 200, rng)
    assert points.shape == (200, dataset.manifold.m)
    distance = geometry.on_manifold_distance(dataset.manifold, points)
    assert np.all(distance <= dataset.manifold.on_manifold_tol)


def test_seeded_generation():
    first = generate_data.generate_dataset("five_gaussians_h2", 50, np.random.default_rng(9))
    second = generate_data.generate_dataset("five_gaussians_h2", 50, np.random.default_rng(9))
    assert np.array_equal(first, second)


def test_vmf_reference_nll_matches_entropy(rng):
    points = generate_data.generate_dataset("vmf_s2", 200_000, rng)
    entropy = distributions.vmf_entropy(generate_data.VMF_KAPPA)
    assert math.isclose(generate_data.reference_nll("vmf_s2", points), entropy, abs_tol=1e-2)


def test_uniform_torus_reference_nll(rng):
    points = generate_data.generate_dataset(DatasetName.UNIFORM_T2, 10, rng)
    assert math.isclose(generate_data.reference_nll("uniform_t2", points), 2.0 * math.log(2.0 * math.pi))


def test_no_closed_form_density(rng):
    points = generate_data.generate_dataset("concentrated_so3", 5, rng)
    with pytest.raises(ValueError):
        generate_data.reference_nll("concentrated_so3", points)

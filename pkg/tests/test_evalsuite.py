import math

import numpy as np
import pytest

from src import distributions, evalsuite, geometry
from src.evalsuite import EstimatorStatsConfig
from src.exceptions import SizeMismatch
from src.flow import FlowModel
from src.nnet import NetworkParams, NetworkSpec
from tests.helpers import identity_model, small_model


class TestQuadratureGrid:
    @pytest.mark.parametrize("man, resolution", [
        (geometry.sphere(1), 1000), (geometry.torus(1), 1000), (geometry.sphere(2), 100),
        (geometry.torus(2), 100), (geometry.poincare_ball(2), 300),
    ], ids=["circle", "torus1", "sphere", "torus2", "ball"])
    def test_weights_sum_to_volume(self, man, resolution):
        grid = evalsuite.quadrature_grid(man, resolution)
        assert math.isclose(np.sum(grid.weights), geometry.manifold_volume(man), rel_tol=1e-3)
        assert np.all(geometry.on_manifold_distance(man, grid.nodes) <= man.on_manifold_tol)

    def test_default_sizes(self):
        assert len(evalsuite.quadrature_grid(geometry.sphere(1)).nodes) == 10_000
        assert len(evalsuite.quadrature_grid(geometry.sphere(2)).nodes) == 400 * 800

    def test_so3_is_monte_carlo(self, rng):
        man = geometry.special_orthogonal3()
        grid = evalsuite.quadrature_grid(man, 1000, rng)
        assert grid.monte_carlo
        assert math.isclose(np.sum(grid.weights), 8.0 * math.pi ** 2)

    def test_so3_needs_random_source(self):
        with pytest.raises(ValueError):
            evalsuite.quadrature_grid(geometry.special_orthogonal3(), 10)

    def test_unsupported_manifold(self):
        with pytest.raises(ValueError):
            evalsuite.quadrature_grid(geometry.sphere(3))


class TestNormalization:
    def test_near_identity_circle(self, rng):
        model = small_model(geometry.sphere(1), rng, init_scale=0.1)
        grid = evalsuite.quadrature_grid(model.manifold)
        assert math.isclose(evalsuite.normalization_integral(model, grid), 1.0, abs_tol=1e-3)

    def test_sphere_with_vmf_latent(self):
        man = geometry.sphere(2)
        model = identity_model(man, distributions.single_vmf([0.0, 0.6, 0.8], 10.0))
        grid = evalsuite.quadrature_grid(man)
        assert math.isclose(evalsuite.normalization_integral(model, grid), 1.0, abs_tol=1e-2)

    def test_near_identity_torus(self, rng):
        model = small_model(geometry.torus(2), rng, init_scale=0.1)
        grid = evalsuite.quadrature_grid(model.manifold, 200)
        assert math.isclose(evalsuite.normalization_integral(model, grid), 1.0, abs_tol=1e-2)

    @pytest.mark.parametrize("direction", ["encoder", "decoder"])
    def test_ball_with_wrapped_normal(self, direction):
        man = geometry.poincare_ball(2)
        model = identity_model(man, distributions.wrapped_normal(man, 0.5))
        grid = evalsuite.quadrature_grid(man)
        assert math.isclose(evalsuite.normalization_integral(model, grid, direction), 1.0, abs_tol=1e-2)

    def test_so3_within_standard_errors(self, rng):
        man = geometry.special_orthogonal3()
        model = small_model(man, rng, init_scale=0.1)
        grid = evalsuite.quadrature_grid(man, 20_000, rng)
        total, stderr = evalsuite.normalization_integral(model, grid, return_stderr=True)
        assert stderr > 0.0
        assert abs(total - 1.0) <= 3.0 * stderr + 1e-3

    def test_deterministic_grid_has_no_stderr(self):
        man = geometry.sphere(1)
        _, stderr = evalsuite.normalization_integral(identity_model(man), evalsuite.quadrature_grid(man, 100),
                                                     return_stderr=True)
        assert stderr == 0.0

    def test_grid_must_match_model(self):
        with pytest.raises(ValueError):
            evalsuite.normalization_integral(identity_model(geometry.sphere(2)),
                                             evalsuite.quadrature_grid(geometry.sphere(1), 10))


class TestNll:
    def test_uniform_torus(self, rng):
        man = geometry.torus(2)
        result = evalsuite.test_nll(identity_model(man), geometry.sample_uniform(man, 50, rng))
        assert math.isclose(result.mean_nll, 2.0 * math.log(2.0 * math.pi), rel_tol=1e-12)
        assert math.isclose(result.mean_nll, 3.6757, abs_tol=1e-4)
        assert result.std_nll <= 1e-12 and result.count == 50 and result.excluded == 0

    def test_refinement_keeps_exact_inverse(self, rng):
        man = geometry.sphere(2)
        model = identity_model(man, distributions.single_vmf([0.0, 0.0, 1.0], 5.0))
        data = geometry.sample_uniform(man, 20, rng)
        plain = evalsuite.test_nll(model, data)
        refined = evalsuite.test_nll(model, data, refine_sigma=0.05, refine_tries=4, rng=rng)
        assert math.isclose(plain.mean_nll, refined.mean_nll, rel_tol=1e-9)

    def test_singular_points_excluded(self, rng):
        man = geometry.sphere(2)
        spec = NetworkSpec(input_dim=3, residual_blocks=1, inner_depth=2, inner_width=3, residual=False)
        decoder = NetworkParams(spec)
        decoder.biases[0][-1][...] = [0.0, 0.0, 1.0]
        model = FlowModel(man, identity_model(man).encoder, decoder, distributions.uniform_latent(man))
        result = evalsuite.test_nll(model, geometry.sample_uniform(man, 5, rng))
        assert result.excluded == 5 and result.count == 0 and math.isnan(result.mean_nll)

    def test_chunking_does_not_change_result(self, rng):
        man = geometry.sphere(2)
        model = small_model(man, rng)
        data = geometry.sample_uniform(man, 30, rng)
        whole = evalsuite.test_nll(model, data)
        chunked = evalsuite.test_nll(model, data, chunk=7)
        assert np.allclose(whole.per_point, chunked.per_point)

    def test_repeated_over_seeds(self, rng):
        man = geometry.sphere(2)
        model = small_model(man, rng)
        data = geometry.sample_uniform(man, 10, rng)
        frame = evalsuite.repeated_test_nll(model, data, [0, 1, 2], refine_sigma=0.01, refine_tries=2)
        assert frame["seed"].tolist() == [0, 1, 2]
        assert frame["mean_nll"].notna().all()


class TestWasserstein:
    def test_identity_and_permutation(self, rng):
        man = geometry.sphere(2)
        a = geometry.sample_uniform(man, 64, rng)
        assert evalsuite.wasserstein2(a, a, man) <= 1e-7
        assert evalsuite.wasserstein2(a, a[rng.permutation(64)], man) <= 1e-7

    def test_symmetric(self, rng):
        man = geometry.torus(2)
        a = geometry.sample_uniform(man, 40, rng)
        b = geometry.sample_uniform(man, 40, rng)
        assert math.isclose(evalsuite.wasserstein2(a, b, man), evalsuite.wasserstein2(b, a, man), rel_tol=1e-9)

    def test_single_pair_is_geodesic_distance(self):
        man = geometry.sphere(2)
        assert math.isclose(evalsuite.wasserstein2([[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]], man), math.pi / 2)

    def test_antipodal_clouds(self, rng):
        north = distributions.sample(distributions.single_vmf([0.0, 0.0, 1.0], 50.0), 200, rng)
        south = distributions.sample(distributions.single_vmf([0.0, 0.0, -1.0], 50.0), 200, rng)
        distance = evalsuite.wasserstein2(north, south, geometry.sphere(2))
        assert 2.5 < distance <= math.pi

    def test_size_mismatch(self, rng):
        man = geometry.sphere(2)
        with pytest.raises(SizeMismatch):
            evalsuite.wasserstein2(geometry.sample_uniform(man, 3, rng), geometry.sample_uniform(man, 4, rng), man)

    def test_too_many_points(self, rng):
        man = geometry.sphere(1)
        a = geometry.sample_uniform(man, evalsuite.MAX_W2_POINTS + 1, rng)
        with pytest.raises(SizeMismatch):
            evalsuite.wasserstein2(a, a, man)


def test_error_bound_report(rng):
    man = geometry.sphere(2)
    report = evalsuite.error_bound_report(small_model(man, rng), geometry.sample_uniform(man, 4, rng))
    assert list(report.columns) == ["point", "lhs", "rhs", "holds"]
    assert report["holds"].all()


class TestEstimatorStatistics:
    @pytest.fixture(scope="class")
    def stats(self):
        config = EstimatorStatsConfig(seed=5, hutchinson_draws=200_000, example_draws=100_000,
                                      surrogate_repeats=20, surrogate_draws=(1, 4), chunk=50_000)
        frame = evalsuite.estimator_statistics(config)
        return frame.set_index(["statistic", "setting"])

    def test_hutchinson_variance(self, stats):
        row = stats.loc[("hutchinson_variance", "dim=5")]
        assert math.isclose(row["estimate"], row["reference"], rel_tol=0.05)

    def test_tangent_noise_has_no_variance(self, stats):
        assert stats.loc[("tangent_variance", "n=1,m=2"), "estimate"] <= 1e-12

    def test_ambient_noise_variance(self, stats):
        assert math.isclose(stats.loc[("ambient_variance", "n=1,m=2"), "estimate"], 0.5, rel_tol=0.05)

    def test_surrogate_rows(self, stats):
        for k in (1, 4):
            variance = stats.loc[("surrogate_variance", f"k={k}"), "estimate"]
            scaled = stats.loc[("surrogate_variance_times_k", f"k={k}"), "estimate"]
            assert variance >= 0.0 and math.isclose(scaled, k * variance)

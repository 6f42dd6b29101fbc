import math

import numpy as np
import pytest
from scipy import stats
from scipy.spatial.transform import Rotation

from src import geometry
from src.exceptions import DegenerateInput, DimensionMismatch, OffManifold, SingularPolar
from src.geometry import ManifoldDescriptor, ManifoldKind
from tests.helpers import ALL_MANIFOLDS, central_difference, manifold_id, random_ambient


def _skew(rng):
    a = rng.standard_normal((3, 3))
    return a - a.T


class TestProject:
    def test_sphere_normalizes(self):
        assert np.allclose(geometry.project(geometry.sphere(2), [0.0, 0.0, 2.0]), [0.0, 0.0, 1.0])

    def test_so3_reflection_case(self):
        result = geometry.project(geometry.special_orthogonal3(), np.diag([3.0, 2.0, -1.0]).ravel())
        assert np.allclose(result.reshape(3, 3), np.eye(3), atol=1e-12)

    def test_poincare_clamp(self):
        result = geometry.project(geometry.poincare_ball(2, 1e-5), [3.0, 4.0])
        assert np.allclose(result, [0.599994, 0.799992], atol=1e-12)

    def test_poincare_interior_unchanged(self):
        y = np.array([0.3, -0.2])
        assert np.array_equal(geometry.project(geometry.poincare_ball(2), y), y)

    @pytest.mark.parametrize("man", ALL_MANIFOLDS, ids=manifold_id)
    def test_idempotent(self, man, rng):
        once = geometry.project(man, random_ambient(man, 2000, rng))
        twice = geometry.project(man, once)
        assert np.max(np.abs(twice - once)) <= 1e-10

    @pytest.mark.parametrize("man", ALL_MANIFOLDS, ids=manifold_id)
    def test_result_on_manifold(self, man, rng):
        points = geometry.project(man, random_ambient(man, 500, rng))
        assert np.all(geometry.on_manifold_distance(man, points) <= man.on_manifold_tol)

    def test_so3_beats_random_rotations(self, rng):
        man = geometry.special_orthogonal3()
        candidates = geometry.sample_uniform(man, 100_000, rng)
        for _ in range(10):
            target = rng.standard_normal(9)
            best = geometry.project(man, target)
            nearest = np.min(np.linalg.norm(candidates - target, axis=-1))
            assert np.linalg.norm(best - target) <= nearest + 1e-12

    def test_zero_vector_on_sphere_is_degenerate(self):
        with pytest.raises(DegenerateInput):
            geometry.project(geometry.sphere(2), np.zeros(3))

    def test_torus_zero_circle_is_degenerate(self):
        with pytest.raises(DegenerateInput):
            geometry.project(geometry.torus(2), [1.0, 0.0, 0.0, 0.0])

    def test_so3_tie_is_degenerate(self):
        with pytest.raises(DegenerateInput):
            geometry.project(geometry.special_orthogonal3(), np.diag([1.0, 1.0, -1.0]).ravel())

    def test_wrong_dimension(self):
        with pytest.raises(DimensionMismatch):
            geometry.project(geometry.sphere(2), [1.0, 0.0])


class TestProjectDerivatives:
    def test_circle_tangent_direction_kept(self):
        assert np.allclose(geometry.project_jvp(geometry.sphere(1), [1.0, 0.0], [0.0, 1.0]), [0.0, 1.0])

    def test_circle_radial_direction_removed(self):
        assert np.allclose(geometry.project_jvp(geometry.sphere(1), [1.0, 0.0], [1.0, 0.0]), [0.0, 0.0])

    def test_so3_identity_keeps_skew(self, rng):
        w = _skew(rng)
        result = geometry.project_jvp(geometry.special_orthogonal3(), np.eye(3).ravel(), w.ravel())
        assert np.allclose(result, w.ravel(), atol=1e-12)

    def test_so3_fd_at_identity(self, rng):
        man = geometry.special_orthogonal3()
        w = _skew(rng).ravel()
        fd = central_difference(lambda y: geometry.project(man, y), np.eye(3).ravel(), w)
        assert np.allclose(geometry.project_jvp(man, np.eye(3).ravel(), w), fd, atol=1e-8)

    @pytest.mark.parametrize("man", ALL_MANIFOLDS, ids=manifold_id)
    def test_jvp_matches_finite_differences(self, man, rng):
        ys = random_ambient(man, 50, rng)
        vs = rng.standard_normal(ys.shape)
        for y, v in zip(ys, vs):
            fd = central_difference(lambda p: geometry.project(man, p), y, v)
            exact = geometry.project_jvp(man, y, v)
            assert np.linalg.norm(exact - fd) <= 1e-7 * max(1.0, np.linalg.norm(exact))

    def test_clamped_ball_jvp_matches_finite_differences(self, rng):
        man = geometry.poincare_ball(2)
        y = np.array([1.5, -0.7])
        v = rng.standard_normal(2)
        fd = central_difference(lambda p: geometry.project(man, p), y, v)
        assert np.allclose(geometry.project_jvp(man, y, v), fd, atol=1e-7)

    @pytest.mark.parametrize("man", ALL_MANIFOLDS, ids=manifold_id)
    def test_vjp_is_adjoint(self, man, rng):
        y = random_ambient(man, 20, rng)
        v = rng.standard_normal(y.shape)
        g = rng.standard_normal(y.shape)
        lhs = np.sum(g * geometry.project_jvp(man, y, v), axis=-1)
        rhs = np.sum(geometry.project_vjp(man, y, g) * v, axis=-1)
        assert np.allclose(lhs, rhs, atol=1e-10)

    @pytest.mark.parametrize("man", ALL_MANIFOLDS, ids=manifold_id)
    def test_hvp_matches_finite_differences_of_jvp(self, man, rng):
        for y in random_ambient(man, 10, rng):
            a, b = rng.standard_normal((2, man.m))
            fd = central_difference(lambda p: geometry.project_jvp(man, p, a), y, b, step=1e-5)
            exact = geometry.project_hvp(man, y, a, b)
            assert np.linalg.norm(exact - fd) <= 1e-6 * max(1.0, np.linalg.norm(exact))

    def test_hvp_is_symmetric(self, rng):
        man = geometry.special_orthogonal3()
        y = random_ambient(man, 5, rng)
        a, b = rng.standard_normal((2,) + y.shape)
        assert np.allclose(geometry.project_hvp(man, y, a, b), geometry.project_hvp(man, y, b, a), atol=1e-10)

    @pytest.mark.parametrize("man", ALL_MANIFOLDS, ids=manifold_id)
    def test_curvature_cotangent_is_gradient(self, man, rng):
        y = random_ambient(man, 1, rng)[0]
        t, u, d = rng.standard_normal((3, man.m))
        fd = central_difference(lambda p: np.sum(u * geometry.project_jvp(man, p, t)), y, d, step=1e-5)
        exact = np.sum(geometry.project_curvature_cotangent(man, y, t, u) * d)
        assert math.isclose(exact, fd, rel_tol=1e-5, abs_tol=1e-8)

    def test_polar_derivative_singular(self):
        man = geometry.special_orthogonal3()
        y = np.diag([1e-3, 1e-4, -(1e-4 - 5e-11)]).ravel()
        geometry.project(man, y)
        with pytest.raises(SingularPolar):
            geometry.project_jvp(man, y, np.eye(3).ravel())


class TestTangentFrame:
    def test_circle_at_pole(self):
        frame = geometry.tangent_frame(geometry.sphere(1), [0.0, 1.0])
        assert np.allclose(frame.projector, [[1.0, 0.0], [0.0, 0.0]])
        assert np.allclose(np.abs(frame.basis[:, 0]), [1.0, 0.0])

    def test_ball_is_identity(self, rng):
        frame = geometry.tangent_frame(geometry.poincare_ball(2), [0.2, 0.4])
        assert np.allclose(frame.projector, np.eye(2))
        assert np.allclose(frame.basis.T @ frame.basis, np.eye(2))

    def test_so3_identity_fixes_skew_and_kills_symmetric(self, rng):
        frame = geometry.tangent_frame(geometry.special_orthogonal3(), np.eye(3).ravel())
        skew = _skew(rng)
        sym = rng.standard_normal((3, 3))
        sym = sym + sym.T
        assert np.allclose(frame.projector @ skew.ravel(), skew.ravel(), atol=1e-12)
        assert np.allclose(frame.projector @ sym.ravel(), 0.0, atol=1e-12)

    @pytest.mark.parametrize("man", ALL_MANIFOLDS, ids=manifold_id)
    def test_projector_rank(self, man, rng):
        points = geometry.sample_uniform(man, 20, rng)
        singular = np.linalg.svd(geometry.tangent_frame(man, points).projector, compute_uv=False)
        assert np.all(np.abs(singular[:, :man.n] - 1.0) <= 1e-8)
        assert np.all(singular[:, man.n:] <= 1e-8)

    @pytest.mark.parametrize("man", ALL_MANIFOLDS, ids=manifold_id)
    def test_projector_agrees_with_jvp(self, man, rng):
        points = geometry.sample_uniform(man, 20, rng)
        vectors = rng.standard_normal(points.shape)
        projector = geometry.tangent_frame(man, points).projector
        expected = np.einsum("bij,bj->bi", projector, vectors)
        assert np.allclose(geometry.project_jvp(man, points, vectors), expected, atol=1e-8)


class TestMetricAndDistances:
    def test_sphere_metric_identity(self):
        assert np.array_equal(geometry.metric(geometry.sphere(2), [0.0, 1.0, 0.0]), np.eye(3))

    @pytest.mark.parametrize("point, scale", [([0.0, 0.0], 4.0), ([0.5, 0.5], 16.0)])
    def test_poincare_metric(self, point, scale):
        assert np.allclose(geometry.metric(geometry.poincare_ball(2), point), scale * np.eye(2))

    def test_log_volume_element(self):
        man = geometry.poincare_ball(2)
        assert math.isclose(geometry.log_volume_element(man, [0.0, 0.0]), 2.0 * math.log(2.0))

    def test_antipodal_sphere(self):
        assert math.isclose(geometry.geodesic_distance(geometry.sphere(2), [1, 0, 0], [-1, 0, 0]), math.pi)

    def test_torus_wraps(self):
        man = geometry.torus(1)
        b = [math.cos(1.5 * math.pi), math.sin(1.5 * math.pi)]
        assert math.isclose(geometry.geodesic_distance(man, [1.0, 0.0], b), math.pi / 2.0, rel_tol=1e-12)

    def test_poincare_identity(self):
        assert geometry.geodesic_distance(geometry.poincare_ball(2), [0.3, 0.1], [0.3, 0.1]) == 0.0

    def test_poincare_from_origin(self):
        distance = geometry.geodesic_distance(geometry.poincare_ball(2), [0.0, 0.0], [0.5, 0.0])
        assert math.isclose(distance, 2.0 * math.atanh(0.5), rel_tol=1e-12)

    def test_so3_rotation_angle(self):
        c, s = math.cos(0.7), math.sin(0.7)
        rotation = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        man = geometry.special_orthogonal3()
        assert math.isclose(geometry.geodesic_distance(man, np.eye(3).ravel(), rotation.ravel()), 0.7,
                            rel_tol=1e-10)

    def test_volumes(self):
        assert math.isclose(geometry.manifold_volume(geometry.sphere(1)), 2.0 * math.pi)
        assert math.isclose(geometry.manifold_volume(geometry.sphere(2)), 4.0 * math.pi)
        assert math.isclose(geometry.manifold_volume(geometry.torus(2)), (2.0 * math.pi) ** 2)
        assert math.isclose(geometry.manifold_volume(geometry.special_orthogonal3()), 8.0 * math.pi ** 2)

    def test_ball_volume_general_dimension_matches_closed_form_in_two(self):
        man = geometry.poincare_ball(2, 1e-2)
        r = man.ball_radius
        assert math.isclose(geometry.manifold_volume(man), 4.0 * math.pi * r * r / (1.0 - r * r))
        three = geometry.manifold_volume(geometry.poincare_ball(3, 1e-2))
        assert three > 0.0 and math.isfinite(three)


class TestSampling:
    def test_sphere_mean_is_centered(self, rng):
        points = geometry.sample_uniform(geometry.sphere(2), 100_000, rng)
        assert np.all(np.abs(points.mean(axis=0)) < 0.02)

    def test_so3_haar_trace(self, rng):
        points = geometry.sample_uniform(geometry.special_orthogonal3(), 100_000, rng).reshape(-1, 3, 3)
        trace = np.trace(points, axis1=1, axis2=2)
        assert abs(trace.mean()) < 0.05
        assert abs((trace ** 2).mean() - 1.0) < 0.05
        assert np.allclose(np.linalg.det(points), 1.0)

    def test_so3_uses_scipy_rotation_sampler(self):
        man = geometry.special_orthogonal3()
        points = geometry.sample_uniform(man, 50, np.random.default_rng(5))
        expected = Rotation.random(50, random_state=np.random.default_rng(5)).as_matrix().reshape(50, 9)
        assert np.array_equal(points, expected)
        assert np.all(geometry.on_manifold_distance(man, points) <= man.on_manifold_tol)

    def test_torus_angles_uniform(self, rng):
        points = geometry.sample_uniform(geometry.torus(2), 100_000, rng)
        angles = np.arctan2(points[:, 1], points[:, 0])
        counts, _ = np.histogram(angles, bins=20, range=(-math.pi, math.pi))
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_ball_inside_clamp(self, rng):
        man = geometry.poincare_ball(2)
        points = geometry.sample_uniform(man, 10_000, rng)
        assert np.all(np.linalg.norm(points, axis=-1) <= man.ball_radius)

    def test_count_must_be_positive(self, rng):
        with pytest.raises(ValueError):
            geometry.sample_uniform(geometry.sphere(2), 0, rng)


class TestTangentNoise:
    def test_circle_noise_is_a_sign(self, rng):
        noise = geometry.tangent_noise(geometry.sphere(1), np.tile([1.0, 0.0], (100, 1)), rng)
        assert np.allclose(noise[:, 0], 0.0)
        assert np.allclose(np.abs(noise[:, 1]), 1.0)

    @pytest.mark.parametrize("man", ALL_MANIFOLDS, ids=manifold_id)
    def test_tangent_and_rescaled(self, man, rng):
        z = geometry.sample_uniform(man, 200, rng)
        noise = geometry.tangent_noise(man, z, rng)
        projector = geometry.tangent_projector(man, z)
        assert np.allclose(np.einsum("bij,bj->bi", projector, noise), noise, atol=1e-10)
        assert np.allclose(np.linalg.norm(noise, axis=-1), math.sqrt(man.n))

    def test_covariance_before_rescaling(self, rng):
        man = geometry.sphere(2)
        z = np.tile([0.0, 0.0, 1.0], (1_000_000, 1))
        noise = geometry.tangent_noise(man, z, rng, rescale=False)
        covariance = noise.T @ noise / len(noise)
        assert np.max(np.abs(covariance - np.diag([1.0, 1.0, 0.0]))) < 5e-3


class TestPoincareMaps:
    def test_exp_at_zero(self):
        assert np.array_equal(geometry.exp0_poincare([0.0, 0.0]), [0.0, 0.0])
        assert geometry.logdet_jac_exp0([0.0, 0.0]) == 0.0

    def test_exp_unit(self):
        assert np.allclose(geometry.exp0_poincare([1.0, 0.0]), [math.tanh(1.0), 0.0])

    def test_log_inverts_exp(self, rng):
        v = rng.standard_normal((100, 2))
        assert np.allclose(geometry.log_poincare(geometry.exp0_poincare(v)), v, atol=1e-9)

    @pytest.mark.parametrize("v", [[1.0, 0.0], [0.3, -0.4], [1.2, 0.9]])
    def test_logdet_matches_numerical_jacobian(self, v):
        v = np.asarray(v)
        jac = np.stack([central_difference(geometry.exp0_poincare, v, e) for e in np.eye(2)], axis=-1)
        assert math.isclose(geometry.logdet_jac_exp0(v), math.log(abs(np.linalg.det(jac))), abs_tol=1e-6)

    def test_logdet_closed_form_at_unit_norm(self):
        expected = math.log(math.tanh(1.0)) - 2.0 * math.log(math.cosh(1.0))
        assert math.isclose(geometry.logdet_jac_exp0([1.0, 0.0]), expected, rel_tol=1e-12)
        assert math.isclose(expected, -1.13990, abs_tol=1e-5)


class TestDescriptor:
    def test_check_on_manifold_rejects(self):
        with pytest.raises(OffManifold):
            geometry.check_on_manifold(geometry.sphere(2), [[0.0, 0.0, 1.1]])

    def test_so3_dimension_fixed(self):
        with pytest.raises(ValueError):
            ManifoldDescriptor(ManifoldKind.SO3, 2)

    def test_dict_round_trip(self):
        man = geometry.poincare_ball(2, 1e-4)
        assert ManifoldDescriptor.from_dict(man.to_dict()) == man

    @pytest.mark.parametrize("man, m", [(geometry.sphere(2), 3), (geometry.torus(7), 14),
                                        (geometry.special_orthogonal3(), 9), (geometry.poincare_ball(2), 2)])
    def test_embedding_dimension(self, man, m):
        assert man.m == m

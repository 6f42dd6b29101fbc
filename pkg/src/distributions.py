"""
`distributions.py`:

This module contains the latent and target distributions on manifolds:
uniform densities, von Mises-Fisher mixtures on S², wrapped normals on the
Poincaré ball and the toy targets (one Gaussian, five Gaussians, swish,
checkerboard) defined in the tangent space at the origin of the ball.

All densities are with respect to the Riemannian volume of the manifold and
are returned in nats. Functions take a single point of shape (m,) or a batch
of shape (B, m).
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.special import expit, logsumexp

from src import geometry
from src.exceptions import NonDifferentiable, OutOfSupport
from src.geometry import ManifoldDescriptor, ManifoldKind
from src.log_config import logger

SERIES_CUTOFF = 1e-4
KAPPA_MIN = 1e-6
KAPPA_MAX = 1e6

# Toy-target shape constants
RING_RADIUS = 1.5
RING_SIGMA = 0.3
RING_COMPONENTS = 5
CHECKER_HALF_WIDTH = 2.0
CHECKER_CELLS = 4
SWISH_HALF_WIDTH = 2.0
SWISH_TAU = 0.2
SWISH_OFFSET = 0.5
TOY_GAUSSIAN_SIGMA = 0.5


class LatentKind(Enum):
    """Enumeration of the latent distribution families."""
    UNIFORM_MANIFOLD = "uniform"
    VMF_MIXTURE = "vmf_mixture"
    WRAPPED_NORMAL = "wrapped_normal"
    PRODUCT_UNIFORM_CIRCLES = "product_uniform_circles"


class ToyKind(Enum):
    """Enumeration of the toy targets on the Poincaré ball."""
    ONE_GAUSSIAN = "one_gaussian"
    FIVE_GAUSSIANS = "five_gaussians"
    SWISH = "swish"
    CHECKERBOARD = "checkerboard"


@dataclass(frozen=True)
class VmfComponent:
    mean: Tuple[float, float, float]
    kappa: float
    weight: float


@dataclass(frozen=True)
class LatentSpec:
    """
    A latent distribution on a manifold.

    Attributes:
        kind: Distribution family
        manifold: Manifold the distribution lives on
        components: vMF mixture components (VMF_MIXTURE only)
        sigma: Tangent standard deviation (WRAPPED_NORMAL only)
    """
    kind: LatentKind
    manifold: ManifoldDescriptor
    components: Tuple[VmfComponent, ...] = ()
    sigma: float = 1.0

    def __post_init__(self):
        if not isinstance(self.kind, LatentKind):
            object.__setattr__(self, "kind", LatentKind(self.kind))
        man = self.manifold
        if self.kind is LatentKind.VMF_MIXTURE:
            if man.kind is not ManifoldKind.SPHERE or man.n != 2:
                raise ValueError("vMF mixtures are defined on S² only")
            if not self.components:
                raise ValueError("vMF mixture needs at least one component")
            weights = np.array([c.weight for c in self.components])
            if np.any(weights <= 0.0) or abs(weights.sum() - 1.0) > 1e-9:
                raise ValueError(f"Mixture weights must be positive and sum to 1, got {weights.tolist()}")
            for component in self.components:
                if abs(np.linalg.norm(component.mean) - 1.0) > 1e-9:
                    raise ValueError(f"vMF mean {component.mean} is not unit norm")
                if not (np.isfinite(component.kappa) and component.kappa > 0.0):
                    raise ValueError(f"vMF concentration must be finite and positive, got {component.kappa}")
        elif self.kind is LatentKind.WRAPPED_NORMAL:
            if man.kind is not ManifoldKind.POINCARE_BALL or man.n != 2:
                raise ValueError("Wrapped normals are supported on the two-dimensional Poincaré ball only")
            if not (np.isfinite(self.sigma) and self.sigma > 0.0):
                raise ValueError(f"sigma must be finite and positive, got {self.sigma}")
        elif self.kind is LatentKind.PRODUCT_UNIFORM_CIRCLES and man.kind is not ManifoldKind.TORUS:
            raise ValueError("Product of uniform circles requires a torus")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "manifold": self.manifold.to_dict(),
            "components": [
                {"mean": list(c.mean), "kappa": c.kappa, "weight": c.weight} for c in self.components
            ],
            "sigma": self.sigma,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LatentSpec":
        return cls(
            kind=LatentKind(data["kind"]),
            manifold=ManifoldDescriptor.from_dict(data["manifold"]),
            components=tuple(
                VmfComponent(tuple(float(v) for v in c["mean"]), float(c["kappa"]), float(c["weight"]))
                for c in data.get("components", [])
            ),
            sigma=float(data.get("sigma", 1.0)),
        )


@dataclass(frozen=True)
class ToyTargetSpec:
    """
    A toy density defined in the tangent space at the origin of the Poincaré
    ball and pushed forward through exp₀.

    Only the one-Gaussian target takes a `sigma` (default TOY_GAUSSIAN_SIGMA);
    the other shapes are fixed and reject one.
    """
    kind: ToyKind
    manifold: ManifoldDescriptor = field(default_factory=lambda: geometry.poincare_ball(2))
    sigma: Optional[float] = None

    def __post_init__(self):
        if not isinstance(self.kind, ToyKind):
            object.__setattr__(self, "kind", ToyKind(self.kind))
        if self.manifold.kind is not ManifoldKind.POINCARE_BALL or self.manifold.n != 2:
            raise ValueError("Toy targets live on the two-dimensional Poincaré ball")
        if self.kind is not ToyKind.ONE_GAUSSIAN:
            if self.sigma is not None:
                raise ValueError(f"sigma only applies to the one_gaussian target, not {self.kind.value}")
            return
        if self.sigma is None:
            object.__setattr__(self, "sigma", TOY_GAUSSIAN_SIGMA)
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise ValueError(f"sigma must be finite and positive, got {self.sigma}")


def uniform_latent(man: ManifoldDescriptor) -> LatentSpec:
    return LatentSpec(LatentKind.UNIFORM_MANIFOLD, man)


def vmf_mixture(man: ManifoldDescriptor, components: Sequence[VmfComponent]) -> LatentSpec:
    return LatentSpec(LatentKind.VMF_MIXTURE, man, components=tuple(components))


def single_vmf(mean: Sequence[float], kappa: float) -> LatentSpec:
    unit = np.asarray(mean, dtype=np.float64)
    unit = unit / np.linalg.norm(unit)
    return vmf_mixture(geometry.sphere(2), [VmfComponent(tuple(float(v) for v in unit), float(kappa), 1.0)])


def wrapped_normal(man: ManifoldDescriptor, sigma: float) -> LatentSpec:
    return LatentSpec(LatentKind.WRAPPED_NORMAL, man, sigma=sigma)


# von Mises-Fisher on S²

def _log_sinh(kappa: np.ndarray) -> np.ndarray:
    return kappa + np.log(-np.expm1(-2.0 * kappa)) - math.log(2.0)


def vmf_log_normalizer(kappa) -> np.ndarray:
    """log C(κ) = log κ − log 4π − log sinh κ, evaluated in the log domain."""
    kappa = np.asarray(kappa, dtype=np.float64)
    return np.log(kappa) - math.log(4.0 * math.pi) - _log_sinh(kappa)


def vmf_mean_resultant(kappa) -> np.ndarray:
    """A(κ) = coth κ − 1/κ, the mean resultant length of a vMF on S²."""
    kappa = np.asarray(kappa, dtype=np.float64)
    return 1.0 / np.tanh(kappa) - 1.0 / kappa


def vmf_entropy(kappa: float) -> float:
    """
    Differential entropy −E[log p] of a vMF on S², the best achievable NLL.
    """
    return float(-vmf_log_normalizer(kappa) - kappa * vmf_mean_resultant(kappa))


def _vmf_arrays(spec: LatentSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    means = np.array([c.mean for c in spec.components], dtype=np.float64)
    kappas = np.array([c.kappa for c in spec.components], dtype=np.float64)
    weights = np.array([c.weight for c in spec.components], dtype=np.float64)
    return means, kappas, weights


def _vmf_component_logits(spec: LatentSpec, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    means, kappas, weights = _vmf_arrays(spec)
    logits = np.log(weights) + vmf_log_normalizer(kappas) + kappas * (x @ means.T)
    return logits, means, kappas


def _vmf_sample(spec: LatentSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    means, kappas, weights = _vmf_arrays(spec)
    labels = rng.choice(len(weights), size=count, p=weights)
    mu = means[labels]
    kappa = kappas[labels]
    u = rng.uniform(size=count)
    cosine = 1.0 + np.log1p((1.0 - u) * np.expm1(-2.0 * kappa)) / kappa
    cosine = np.clip(cosine, -1.0, 1.0)
    azimuth = rng.uniform(0.0, 2.0 * np.pi, size=count)
    first, second = _orthonormal_complement(mu)
    radial = np.sqrt(np.maximum(1.0 - cosine ** 2, 0.0))
    points = (cosine[:, None] * mu
              + (radial * np.cos(azimuth))[:, None] * first
              + (radial * np.sin(azimuth))[:, None] * second)
    return points / np.linalg.norm(points, axis=-1, keepdims=True)


def _orthonormal_complement(mu: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    helper = np.zeros_like(mu)
    axis = np.argmin(np.abs(mu), axis=-1)
    helper[np.arange(len(mu)), axis] = 1.0
    first = helper - mu * np.sum(helper * mu, axis=-1, keepdims=True)
    first /= np.linalg.norm(first, axis=-1, keepdims=True)
    return first, np.cross(mu, first)


def fit_vmf_mixture(points: np.ndarray, components: int, rng: np.random.Generator,
                    iterations: int = 50) -> LatentSpec:
    """
    Fit a fixed vMF mixture on S² by k-means++ clustering and moment matching.

    Args:
        points (np.ndarray): Data on S², shape (N, 3)
        components (int): Number of mixture components
        rng (np.random.Generator): Random source for the initial centers
        iterations (int): k-means iterations

    Returns:
        LatentSpec: VMF_MIXTURE latent with κ ≈ R̄(3 − R̄²)/(1 − R̄²) per cluster
    """
    points = geometry.check_on_manifold(geometry.sphere(2), np.atleast_2d(points))
    if components < 1 or components > len(points):
        raise ValueError(f"Cannot fit {components} components to {len(points)} points")
    _, labels = kmeans2(points, components, iter=iterations, minit="++", seed=rng)
    fitted = []
    for k in range(components):
        members = points[labels == k]
        if len(members) == 0:
            continue
        mean = members.mean(axis=0)
        resultant = min(np.linalg.norm(mean), 1.0 - 1e-12)
        kappa = resultant * (3.0 - resultant ** 2) / (1.0 - resultant ** 2)
        kappa = float(np.clip(kappa, KAPPA_MIN, KAPPA_MAX))
        fitted.append((mean / np.linalg.norm(mean), kappa, len(members) / len(points)))
    total_weight = sum(weight for _, _, weight in fitted)
    logger.info(f"Fitted vMF mixture with {len(fitted)} components, "
                f"kappas {[round(kappa, 3) for _, kappa, _ in fitted]}")
    return vmf_mixture(geometry.sphere(2), [
        VmfComponent(tuple(float(v) for v in mean), kappa, weight / total_weight) for mean, kappa, weight in fitted
    ])


# Wrapped densities on the Poincaré ball

def _check_ball_support(man: ManifoldDescriptor, x: np.ndarray) -> None:
    radius = np.linalg.norm(x, axis=-1)
    if np.any(radius >= man.ball_radius * (1.0 - 1e-12)):
        raise OutOfSupport(f"{int(np.sum(radius >= man.ball_radius * (1.0 - 1e-12)))} point(s) "
                           f"on the clamped boundary of the Poincaré ball")


def _log_grad(v: np.ndarray) -> np.ndarray:
    """Gradient of logdet_jac_exp0 with respect to v."""
    n = v.shape[-1]
    s = np.linalg.norm(v, axis=-1, keepdims=True)
    safe = np.maximum(s, SERIES_CUTOFF)
    slope = (n - 1) * (2.0 / np.sinh(2.0 * safe) - 1.0 / safe) - 2.0 * np.tanh(safe)
    series = -(2.0 * (n - 1) / 3.0 + 2.0)
    return np.where(s < SERIES_CUTOFF, series * v, slope / safe * v)


def _log_map_pullback(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """(∂v/∂x)ᵀ g for v = log₀(x); the Jacobian is symmetric."""
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    safe = np.maximum(r, SERIES_CUTOFF)
    psi = np.arctanh(safe) / safe
    dpsi_over_r = (safe / (1.0 - safe ** 2) - np.arctanh(safe)) / safe ** 3
    psi = np.where(r < SERIES_CUTOFF, 1.0 + r ** 2 / 3.0, psi)
    dpsi_over_r = np.where(r < SERIES_CUTOFF, 2.0 / 3.0 + 0.8 * r ** 2, dpsi_over_r)
    return psi * g + dpsi_over_r * x * np.sum(x * g, axis=-1, keepdims=True)


def _wrapped_log_prob(man: ManifoldDescriptor, x: np.ndarray,
                      tangent_log_prob: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    v = geometry.log_poincare(x)
    return tangent_log_prob(v) - geometry.logdet_jac_exp0(v) - geometry.log_volume_element(man, x)


def _wrapped_grad_log_prob(man: ManifoldDescriptor, x: np.ndarray,
                           tangent_grad: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    v = geometry.log_poincare(x)
    inner = tangent_grad(v) - _log_grad(v)
    metric_grad = man.n * 2.0 * x / (1.0 - np.sum(x * x, axis=-1, keepdims=True))
    return _log_map_pullback(x, inner) - metric_grad


def _gaussian_log_prob(v: np.ndarray, sigma: float) -> np.ndarray:
    n = v.shape[-1]
    return -0.5 * np.sum(v * v, axis=-1) / sigma ** 2 - 0.5 * n * math.log(2.0 * math.pi * sigma ** 2)


def _ball_uniform_log_prob(man: ManifoldDescriptor, x: np.ndarray) -> np.ndarray:
    log_ball = (0.5 * man.n * math.log(math.pi) - math.lgamma(0.5 * man.n + 1.0)
                + man.n * math.log(man.ball_radius))
    return -log_ball - geometry.log_volume_element(man, x)


def _prepare(man: ManifoldDescriptor, x) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    return geometry.check_on_manifold(man, np.atleast_2d(x)), single


def log_prob(spec: LatentSpec, x) -> np.ndarray:
    """
    Log-density of a latent distribution with respect to Riemannian volume.

    The uniform latent on the Poincaré ball is Lebesgue-uniform on the
    clamped ball, matching `geometry.sample_uniform`.

    Args:
        spec (LatentSpec): Distribution
        x: On-manifold point(s), shape (m,) or (B, m)

    Returns:
        np.ndarray: Log-density per point (scalar array for a single point)
    """
    man = spec.manifold
    pts, single = _prepare(man, x)
    if spec.kind in (LatentKind.UNIFORM_MANIFOLD, LatentKind.PRODUCT_UNIFORM_CIRCLES):
        if man.kind is ManifoldKind.POINCARE_BALL:
            out = _ball_uniform_log_prob(man, pts)
        else:
            out = np.full(len(pts), -math.log(geometry.manifold_volume(man)))
    elif spec.kind is LatentKind.VMF_MIXTURE:
        logits, _, _ = _vmf_component_logits(spec, pts)
        out = logsumexp(logits, axis=-1)
    else:
        _check_ball_support(man, pts)
        out = _wrapped_log_prob(man, pts, lambda v: _gaussian_log_prob(v, spec.sigma))
    return out[0] if single else out


def grad_log_prob(spec: LatentSpec, x) -> np.ndarray:
    """
    Tangential gradient of `log_prob` in embedding coordinates.

    Args:
        spec (LatentSpec): Distribution
        x: On-manifold point(s), shape (m,) or (B, m)

    Returns:
        np.ndarray: Gradient projected onto T_xM, same shape as x
    """
    man = spec.manifold
    pts, single = _prepare(man, x)
    if spec.kind is LatentKind.VMF_MIXTURE:
        logits, means, kappas = _vmf_component_logits(spec, pts)
        resp = np.exp(logits - logsumexp(logits, axis=-1, keepdims=True))
        ambient = resp @ (kappas[:, None] * means)
        grad = ambient - pts * np.sum(ambient * pts, axis=-1, keepdims=True)
    elif spec.kind is LatentKind.WRAPPED_NORMAL:
        _check_ball_support(man, pts)
        grad = _wrapped_grad_log_prob(man, pts, lambda v: -v / spec.sigma ** 2)
    elif man.kind is ManifoldKind.POINCARE_BALL:
        grad = -man.n * 2.0 * pts / (1.0 - np.sum(pts * pts, axis=-1, keepdims=True))
    else:
        grad = np.zeros_like(pts)
    return grad[0] if single else grad


def sample(spec: LatentSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw `count` points from a latent distribution.

    Args:
        spec (LatentSpec): Distribution
        count (int): Number of samples
        rng (np.random.Generator): Random source

    Returns:
        np.ndarray: Samples of shape (count, m)
    """
    if spec.kind in (LatentKind.UNIFORM_MANIFOLD, LatentKind.PRODUCT_UNIFORM_CIRCLES):
        return geometry.sample_uniform(spec.manifold, count, rng)
    if spec.kind is LatentKind.VMF_MIXTURE:
        return _vmf_sample(spec, count, rng)
    v = spec.sigma * rng.standard_normal((count, spec.manifold.n))
    return geometry.project(spec.manifold, geometry.exp0_poincare(v))


# Toy targets

def _ring_means() -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(RING_COMPONENTS) / RING_COMPONENTS
    return RING_RADIUS * np.stack([np.cos(angles), np.sin(angles)], axis=-1)


def _swish_curve(t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    s = expit(t)
    return t * s - SWISH_OFFSET, s * (1.0 + t * (1.0 - s))


def _checker_cells(v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    scaled = (v + CHECKER_HALF_WIDTH) * CHECKER_CELLS / (2.0 * CHECKER_HALF_WIDTH)
    return np.floor(scaled).astype(int), scaled


def _tangent_log_prob(spec: ToyTargetSpec, v: np.ndarray) -> np.ndarray:
    if spec.kind is ToyKind.ONE_GAUSSIAN:
        return _gaussian_log_prob(v, spec.sigma)
    if spec.kind is ToyKind.FIVE_GAUSSIANS:
        diffs = v[:, None, :] - _ring_means()[None, :, :]
        comps = _gaussian_log_prob(diffs, RING_SIGMA)
        return logsumexp(comps, axis=-1) - math.log(RING_COMPONENTS)
    if spec.kind is ToyKind.SWISH:
        inside = np.abs(v[:, 0]) <= SWISH_HALF_WIDTH
        center, _ = _swish_curve(v[:, 0])
        value = (-math.log(2.0 * SWISH_HALF_WIDTH)
                 - 0.5 * ((v[:, 1] - center) / SWISH_TAU) ** 2 - 0.5 * math.log(2.0 * math.pi * SWISH_TAU ** 2))
        return np.where(inside, value, -np.inf)
    cells, _ = _checker_cells(v)
    inside = np.all((cells >= 0) & (cells < CHECKER_CELLS), axis=-1) & (np.sum(cells, axis=-1) % 2 == 0)
    on_cells = CHECKER_CELLS * CHECKER_CELLS // 2
    cell_area = (2.0 * CHECKER_HALF_WIDTH / CHECKER_CELLS) ** 2
    return np.where(inside, -math.log(on_cells * cell_area), -np.inf)


def _tangent_grad(spec: ToyTargetSpec, v: np.ndarray) -> np.ndarray:
    if spec.kind is ToyKind.ONE_GAUSSIAN:
        return -v / spec.sigma ** 2
    if spec.kind is ToyKind.FIVE_GAUSSIANS:
        diffs = v[:, None, :] - _ring_means()[None, :, :]
        comps = _gaussian_log_prob(diffs, RING_SIGMA)
        resp = np.exp(comps - logsumexp(comps, axis=-1, keepdims=True))
        return -np.sum(resp[:, :, None] * diffs, axis=1) / RING_SIGMA ** 2
    if spec.kind is ToyKind.SWISH:
        if np.any(np.isclose(np.abs(v[:, 0]), SWISH_HALF_WIDTH, rtol=0.0, atol=1e-12)):
            raise NonDifferentiable("Swish density is not differentiable at the edge of its support")
        center, slope = _swish_curve(v[:, 0])
        resid = (v[:, 1] - center) / SWISH_TAU ** 2
        return np.stack([resid * slope, -resid], axis=-1)
    _, scaled = _checker_cells(v)
    if np.any(np.abs(scaled - np.round(scaled)) < 1e-12):
        raise NonDifferentiable("Checkerboard density is not differentiable on cell boundaries")
    return np.zeros_like(v)


def toy_log_prob(spec: ToyTargetSpec, x, strict: bool = True) -> np.ndarray:
    """
    Log-density of a toy target on the Poincaré ball.

    Args:
        spec (ToyTargetSpec): Target
        x: On-manifold point(s), shape (2,) or (B, 2)
        strict (bool): Raise OutOfSupport outside the support instead of returning −inf

    Returns:
        np.ndarray: Log-density per point
    """
    man = spec.manifold
    pts, single = _prepare(man, x)
    _check_ball_support(man, pts)
    out = _wrapped_log_prob(man, pts, lambda v: _tangent_log_prob(spec, v))
    if strict and np.any(np.isneginf(out)):
        raise OutOfSupport(f"{int(np.sum(np.isneginf(out)))} point(s) outside the {spec.kind.value} support")
    return out[0] if single else out


def toy_grad_log_prob(spec: ToyTargetSpec, x) -> np.ndarray:
    """Gradient of `toy_log_prob` in embedding coordinates."""
    man = spec.manifold
    pts, single = _prepare(man, x)
    if np.any(np.isneginf(toy_log_prob(spec, pts, strict=False))):
        raise OutOfSupport("Gradient requested outside the target support")
    grad = _wrapped_grad_log_prob(man, pts, lambda v: _tangent_grad(spec, v))
    return grad[0] if single else grad


def _tangent_sample(spec: ToyTargetSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    if spec.kind is ToyKind.ONE_GAUSSIAN:
        return spec.sigma * rng.standard_normal((count, 2))
    if spec.kind is ToyKind.FIVE_GAUSSIANS:
        labels = rng.integers(RING_COMPONENTS, size=count)
        return _ring_means()[labels] + RING_SIGMA * rng.standard_normal((count, 2))
    if spec.kind is ToyKind.SWISH:
        first = rng.uniform(-SWISH_HALF_WIDTH, SWISH_HALF_WIDTH, size=count)
        center, _ = _swish_curve(first)
        return np.stack([first, center + SWISH_TAU * rng.standard_normal(count)], axis=-1)
    size = 2.0 * CHECKER_HALF_WIDTH / CHECKER_CELLS
    on_cells = np.array([(i, j) for i in range(CHECKER_CELLS) for j in range(CHECKER_CELLS) if (i + j) % 2 == 0])
    chosen = on_cells[rng.integers(len(on_cells), size=count)]
    return -CHECKER_HALF_WIDTH + size * (chosen + rng.uniform(size=(count, 2)))


def toy_sample(spec: ToyTargetSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` points from a toy target by tangent sampling and exp₀."""
    return geometry.project(spec.manifold, geometry.exp0_poincare(_tangent_sample(spec, count, rng)))


def toy_as_latent(spec: ToyTargetSpec) -> Optional[LatentSpec]:
    """The equivalent latent spec, if the toy target has one."""
    if spec.kind is ToyKind.ONE_GAUSSIAN:
        return wrapped_normal(spec.manifold, spec.sigma)
    return None

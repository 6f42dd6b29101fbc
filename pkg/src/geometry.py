"""
`geometry.py`:

This module contains the embedded-manifold abstraction used by the flows:
projections and their derivatives, tangent frames, metrics, geodesic
distances, uniform sampling and the Poincaré exponential map.

Points are numpy arrays whose last axis holds the m embedding coordinates;
leading axes are batch axes. SO(3) points are row-major 3x3 matrices stored
as length-9 vectors and every matrix operation reshapes explicitly.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Tuple

import numpy as np
from scipy import integrate
from scipy.spatial.transform import Rotation

from src.exceptions import DegenerateInput, DimensionMismatch, OffManifold, SingularPolar, ZeroTangent
from src.log_config import logger

EmbeddedPoint = np.ndarray

ROW_NORM_FLOOR = 1e-12
SO3_TIE_TOL = 1e-9
POLAR_PAIR_TOL = 1e-10
SERIES_CUTOFF = 1e-8
BASIS_THRESHOLD = 0.5


class ManifoldKind(Enum):
    """Enumeration of the supported embedded manifolds."""
    SPHERE = "sphere"
    TORUS = "torus"
    SO3 = "so3"
    POINCARE_BALL = "poincare_ball"


@dataclass(frozen=True)
class ManifoldDescriptor:
    """
    Which embedded manifold a point lives on, plus its numeric guards.

    Attributes:
        kind: Manifold family
        n: Intrinsic dimension
        epsilon_ball: Clamp margin of the Poincaré projection
        on_manifold_tol: Largest ‖proj(x) − x‖ accepted as on-manifold
    """
    kind: ManifoldKind
    n: int
    epsilon_ball: float = 1e-5
    on_manifold_tol: float = 1e-6

    def __post_init__(self):
        if not isinstance(self.kind, ManifoldKind):
            object.__setattr__(self, "kind", ManifoldKind(self.kind))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"Intrinsic dimension must be a positive integer, got {self.n}")
        if self.kind is ManifoldKind.SO3 and self.n != 3:
            raise ValueError(f"SO(3) has intrinsic dimension 3, got {self.n}")
        if not 0.0 < self.epsilon_ball < 1.0:
            raise ValueError(f"epsilon_ball must lie in (0, 1), got {self.epsilon_ball}")
        if self.on_manifold_tol <= 0.0:
            raise ValueError(f"on_manifold_tol must be positive, got {self.on_manifold_tol}")

    @property
    def m(self) -> int:
        """Embedding dimension."""
        if self.kind is ManifoldKind.SPHERE:
            return self.n + 1
        if self.kind is ManifoldKind.TORUS:
            return 2 * self.n
        if self.kind is ManifoldKind.SO3:
            return 9
        return self.n

    @property
    def ball_radius(self) -> float:
        return 1.0 - self.epsilon_ball

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "n": int(self.n),
            "epsilon_ball": float(self.epsilon_ball),
            "on_manifold_tol": float(self.on_manifold_tol),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ManifoldDescriptor":
        return cls(
            kind=ManifoldKind(data["kind"]),
            n=int(data["n"]),
            epsilon_ball=float(data.get("epsilon_ball", 1e-5)),
            on_manifold_tol=float(data.get("on_manifold_tol", 1e-6)),
        )


def sphere(n: int) -> ManifoldDescriptor:
    return ManifoldDescriptor(ManifoldKind.SPHERE, n)


def torus(n: int) -> ManifoldDescriptor:
    return ManifoldDescriptor(ManifoldKind.TORUS, n)


def special_orthogonal3() -> ManifoldDescriptor:
    return ManifoldDescriptor(ManifoldKind.SO3, 3)


def poincare_ball(n: int, epsilon_ball: float = 1e-5) -> ManifoldDescriptor:
    return ManifoldDescriptor(ManifoldKind.POINCARE_BALL, n, epsilon_ball=epsilon_ball)


@dataclass
class TangentFrame:
    """
    Orthonormal tangent basis at a point and the matching orthogonal projector.

    Attributes:
        point: The base point(s), shape (..., m)
        basis: Orthonormal columns spanning the tangent space, shape (..., m, n)
        projector: Tangent projector basis·basisᵀ, shape (..., m, m)
    """
    point: EmbeddedPoint
    basis: np.ndarray
    projector: np.ndarray


def _coords(man: ManifoldDescriptor, y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 0 or y.shape[-1] != man.m:
        raise DimensionMismatch(f"Expected last axis of length {man.m} for {man.kind.value}, got shape {y.shape}")
    return y


def _t(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def _as_matrices(y: np.ndarray) -> np.ndarray:
    return y.reshape(y.shape[:-1] + (3, 3))


def _as_vectors(a: np.ndarray) -> np.ndarray:
    return a.reshape(a.shape[:-2] + (9,))


def _as_circles(man: ManifoldDescriptor, y: np.ndarray) -> np.ndarray:
    return y.reshape(y.shape[:-1] + (man.n, 2))


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=-1, keepdims=True)


def _normalize_rows(v: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(norms < ROW_NORM_FLOOR):
        raise DegenerateInput(f"Cannot project a vector with norm below {ROW_NORM_FLOOR} onto the sphere")
    return v / norms


# Sphere rules act on the last axis; the torus reuses them per circle.

def _sphere_jvp(y: np.ndarray, v: np.ndarray) -> np.ndarray:
    radius = np.linalg.norm(y, axis=-1, keepdims=True)
    if np.any(radius < ROW_NORM_FLOOR):
        raise DegenerateInput("Projection derivative undefined at the origin")
    unit = y / radius
    return (v - unit * _dot(unit, v)) / radius


def _sphere_hvp(y: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    radius = np.linalg.norm(y, axis=-1, keepdims=True)
    if np.any(radius < ROW_NORM_FLOOR):
        raise DegenerateInput("Projection derivative undefined at the origin")
    unit = y / radius
    pa = (a - unit * _dot(unit, a)) / radius
    pb = (b - unit * _dot(unit, b)) / radius
    return -(_dot(unit, a) * pb + _dot(unit, b) * pa + _dot(a, pb) * unit) / radius


def _so3_polar(y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Signed polar decomposition M = Q·V·diag(σ̃)·Vᵀ with Q the Procrustes solution.

    Returns:
        Tuple of (Q, V, σ̃) with σ̃ = (σ1, σ2, det(UVᵀ)·σ3)
    """
    mats = _as_matrices(y)
    u, s, vt = np.linalg.svd(mats)
    sign = np.where(np.linalg.det(u @ vt) < 0.0, -1.0, 1.0)
    scale = np.maximum(s[..., 0], ROW_NORM_FLOOR)
    if np.any(s[..., 1] < ROW_NORM_FLOOR * np.maximum(scale, 1.0)):
        raise DegenerateInput("SO(3) projection is not unique for matrices of rank below 2")
    tie = (sign < 0.0) & ((s[..., 1] - s[..., 2]) / scale < SO3_TIE_TOL)
    if np.any(tie):
        raise DegenerateInput("SO(3) projection is not unique: two smallest singular values coincide")
    vt_fixed = vt.copy()
    vt_fixed[..., 2, :] *= sign[..., None]
    sig = s.copy()
    sig[..., 2] *= sign
    return u @ vt_fixed, _t(vt), sig


_OFF_DIAGONAL = ~np.eye(3, dtype=bool)


def _pair_sums(sig: np.ndarray) -> np.ndarray:
    pairs = sig[..., :, None] + sig[..., None, :]
    if np.any(np.abs(pairs[..., _OFF_DIAGONAL]) < POLAR_PAIR_TOL):
        raise SingularPolar(f"Polar derivative undefined: singular value pair sum below {POLAR_PAIR_TOL}")
    return np.where(_OFF_DIAGONAL, pairs, 1.0)


def _sylvester(v: np.ndarray, pairs: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve H̃X + XH̃ = rhs for skew rhs, with H̃ = V·diag(σ̃)·Vᵀ."""
    rotated = _t(v) @ rhs @ v
    solved = np.where(_OFF_DIAGONAL, rotated / pairs, 0.0)
    return v @ solved @ _t(v)


def project(man: ManifoldDescriptor, y) -> EmbeddedPoint:
    """
    Project ambient vectors onto the manifold.

    Args:
        man (ManifoldDescriptor): Target manifold
        y: Ambient coordinates, shape (..., m)

    Returns:
        EmbeddedPoint: Projected points, same shape as y
    """
    y = _coords(man, y)
    if man.kind is ManifoldKind.SPHERE:
        return _normalize_rows(y)
    if man.kind is ManifoldKind.TORUS:
        return _normalize_rows(_as_circles(man, y)).reshape(y.shape)
    if man.kind is ManifoldKind.SO3:
        q, _, _ = _so3_polar(y)
        return _as_vectors(q)
    radius = np.linalg.norm(y, axis=-1, keepdims=True)
    limit = man.ball_radius
    scale = np.where(radius > limit, limit / np.maximum(radius, ROW_NORM_FLOOR), 1.0)
    return y * scale


def project_jvp(man: ManifoldDescriptor, y, v) -> np.ndarray:
    """
    Apply the Jacobian of the projection at y to v, i.e. proj′(y)·v.

    Args:
        man (ManifoldDescriptor): Target manifold
        y: Ambient points, shape (..., m)
        v: Ambient directions, broadcastable to y

    Returns:
        np.ndarray: proj′(y)·v
    """
    y = _coords(man, y)
    v = np.broadcast_to(np.asarray(v, dtype=np.float64), y.shape)
    if man.kind is ManifoldKind.SPHERE:
        return _sphere_jvp(y, v)
    if man.kind is ManifoldKind.TORUS:
        return _sphere_jvp(_as_circles(man, y), _as_circles(man, v)).reshape(y.shape)
    if man.kind is ManifoldKind.SO3:
        q, basis, sig = _so3_polar(y)
        direction = _as_matrices(v)
        skew = _sylvester(basis, _pair_sums(sig), _t(q) @ direction - _t(direction) @ q)
        return _as_vectors(q @ skew)
    radius = np.linalg.norm(y, axis=-1, keepdims=True)
    clamped = radius > man.ball_radius
    if not np.any(clamped):
        return v.copy()
    safe = np.where(clamped, y, 1.0)
    return np.where(clamped, man.ball_radius * _sphere_jvp(safe, v), v)


def project_vjp(man: ManifoldDescriptor, y, g) -> np.ndarray:
    """
    Apply the transposed projection Jacobian at y to a cotangent g, i.e. proj′(y)ᵀ·g.
    """
    y = _coords(man, y)
    g = np.broadcast_to(np.asarray(g, dtype=np.float64), y.shape)
    if man.kind is not ManifoldKind.SO3:
        return project_jvp(man, y, g)
    q, basis, sig = _so3_polar(y)
    rotated = _t(basis) @ _t(q) @ _as_matrices(g) @ basis
    d = basis @ np.where(_OFF_DIAGONAL, rotated / _pair_sums(sig), 0.0) @ _t(basis)
    return _as_vectors(q @ (d - _t(d)))


def project_hvp(man: ManifoldDescriptor, y, a, b) -> np.ndarray:
    """
    Second directional derivative of the projection, D²proj(y)[a, b].

    Args:
        man (ManifoldDescriptor): Target manifold
        y: Ambient points, shape (..., m)
        a: First direction, broadcastable to y
        b: Second direction, broadcastable to y

    Returns:
        np.ndarray: Symmetric bilinear second derivative applied to (a, b)
    """
    y = _coords(man, y)
    a = np.broadcast_to(np.asarray(a, dtype=np.float64), y.shape)
    b = np.broadcast_to(np.asarray(b, dtype=np.float64), y.shape)
    if man.kind is ManifoldKind.SPHERE:
        return _sphere_hvp(y, a, b)
    if man.kind is ManifoldKind.TORUS:
        return _sphere_hvp(_as_circles(man, y), _as_circles(man, a), _as_circles(man, b)).reshape(y.shape)
    if man.kind is ManifoldKind.SO3:
        q, basis, sig = _so3_polar(y)
        pairs = _pair_sums(sig)
        da, db = _as_matrices(a), _as_matrices(b)
        xa = _sylvester(basis, pairs, _t(q) @ da - _t(da) @ q)
        xb = _sylvester(basis, pairs, _t(q) @ db - _t(db) @ q)
        h = basis @ (sig[..., :, None] * _t(basis))
        dh = -xb @ h + _t(q) @ db
        rhs = -xb @ _t(q) @ da - _t(da) @ q @ xb - dh @ xa - xa @ dh
        return _as_vectors(q @ (xb @ xa + _sylvester(basis, pairs, rhs)))
    radius = np.linalg.norm(y, axis=-1, keepdims=True)
    clamped = radius > man.ball_radius
    if not np.any(clamped):
        return np.zeros_like(y)
    safe = np.where(clamped, y, 1.0)
    return np.where(clamped, man.ball_radius * _sphere_hvp(safe, a, b), 0.0)


def project_curvature_cotangent(man: ManifoldDescriptor, y, t, u) -> np.ndarray:
    """
    Gradient with respect to y of the scalar u·proj′(y)·t, holding t and u fixed.

    Args:
        man (ManifoldDescriptor): Target manifold
        y: Ambient points, shape (..., m)
        t: Tangent directions pushed through proj′(y)
        u: Cotangents contracting the result

    Returns:
        np.ndarray: ∇_y [u·proj′(y)·t], shape (..., m)
    """
    y = _coords(man, y)
    u = np.broadcast_to(np.asarray(u, dtype=np.float64), y.shape)
    columns = []
    for k in range(man.m):
        unit = np.zeros(man.m)
        unit[k] = 1.0
        columns.append(np.sum(u * project_hvp(man, y, unit, t), axis=-1))
    return np.stack(columns, axis=-1)


def on_manifold_distance(man: ManifoldDescriptor, x) -> np.ndarray:
    """Distance ‖proj(x) − x‖ per point (inf where x is not projectable)."""
    x = _coords(man, x)
    try:
        return np.linalg.norm(project(man, x) - x, axis=-1)
    except DegenerateInput:
        flat = x.reshape(-1, man.m)
        out = np.empty(len(flat))
        for i, row in enumerate(flat):
            try:
                out[i] = np.linalg.norm(project(man, row) - row)
            except DegenerateInput:
                out[i] = np.inf
        return out.reshape(x.shape[:-1])


def check_on_manifold(man: ManifoldDescriptor, x) -> EmbeddedPoint:
    """
    Return x as an array after verifying every point lies on the manifold.

    Raises:
        OffManifold: If any point is further than on_manifold_tol from its projection
    """
    x = _coords(man, x)
    distance = on_manifold_distance(man, x)
    if np.any(distance > man.on_manifold_tol):
        raise OffManifold(f"{int(np.sum(distance > man.on_manifold_tol))} point(s) off {man.kind.value}; "
                          f"max distance {float(np.max(distance)):.3e}")
    return x


def tangent_projector(man: ManifoldDescriptor, x) -> np.ndarray:
    """Analytic orthogonal projector onto T_xM for on-manifold x, shape (..., m, m)."""
    x = _coords(man, x)
    eye = np.eye(man.m)
    if man.kind is ManifoldKind.SPHERE:
        return eye - x[..., :, None] * x[..., None, :]
    if man.kind is ManifoldKind.TORUS:
        circles = _as_circles(man, x)
        proj = np.zeros(x.shape[:-1] + (man.m, man.m))
        for i in range(man.n):
            c = circles[..., i, :]
            proj[..., 2 * i:2 * i + 2, 2 * i:2 * i + 2] = np.eye(2) - c[..., :, None] * c[..., None, :]
        return proj
    if man.kind is ManifoldKind.SO3:
        rot = _as_matrices(x)
        columns = []
        for k in range(9):
            e = np.zeros((3, 3))
            e.flat[k] = 1.0
            columns.append(_as_vectors(0.5 * (e - rot @ e.T @ rot)))
        return np.stack(columns, axis=-1)
    return np.broadcast_to(eye, x.shape[:-1] + (man.m, man.m)).copy()


def tangent_frame(man: ManifoldDescriptor, x) -> TangentFrame:
    """
    Orthonormal tangent basis at x, taken from the SVD of the analytic projector.

    Args:
        man (ManifoldDescriptor): Manifold of x
        x: On-manifold points, shape (..., m)

    Returns:
        TangentFrame: basis of shape (..., m, n) and projector of shape (..., m, m)
    """
    x = _coords(man, x)
    projector = tangent_projector(man, x)
    left, singular, _ = np.linalg.svd(projector)
    rank = np.sum(singular > BASIS_THRESHOLD, axis=-1)
    if np.any(rank != man.n):
        raise DegenerateInput(f"Tangent projector rank {np.unique(rank)} differs from n={man.n}")
    return TangentFrame(point=x, basis=left[..., :, :man.n], projector=projector)


def conformal_factor(x) -> np.ndarray:
    """λ_x = 2 / (1 − ‖x‖²) of the Poincaré ball."""
    x = np.asarray(x, dtype=np.float64)
    return 2.0 / (1.0 - np.sum(x * x, axis=-1))


def metric(man: ManifoldDescriptor, x) -> np.ndarray:
    """Riemannian metric in embedding coordinates, shape (..., m, m)."""
    x = _coords(man, x)
    eye = np.broadcast_to(np.eye(man.m), x.shape[:-1] + (man.m, man.m))
    if man.kind is ManifoldKind.POINCARE_BALL:
        return conformal_factor(x)[..., None, None] ** 2 * eye
    return eye.copy()


def log_volume_element(man: ManifoldDescriptor, x) -> np.ndarray:
    """½·log|QᵀG Q| at x: n·log λ_x on the Poincaré ball, 0 for isometric embeddings."""
    x = _coords(man, x)
    if man.kind is ManifoldKind.POINCARE_BALL:
        return man.n * np.log(conformal_factor(x))
    return np.zeros(x.shape[:-1])


def manifold_volume(man: ManifoldDescriptor) -> float:
    """
    Riemannian volume of the manifold.

    SO(3) uses the bi-invariant convention (8π²); the Poincaré ball is truncated
    at Euclidean radius 1 − epsilon_ball.
    """
    if man.kind is ManifoldKind.SPHERE:
        return 2.0 * math.pi ** ((man.n + 1) / 2.0) / math.gamma((man.n + 1) / 2.0)
    if man.kind is ManifoldKind.TORUS:
        return (2.0 * math.pi) ** man.n
    if man.kind is ManifoldKind.SO3:
        return 8.0 * math.pi ** 2
    r = man.ball_radius
    if man.n == 2:
        return 4.0 * math.pi * r * r / (1.0 - r * r)
    shell = 2.0 * math.pi ** (man.n / 2.0) / math.gamma(man.n / 2.0)
    radial, _ = integrate.quad(lambda t: (2.0 / (1.0 - t * t)) ** man.n * t ** (man.n - 1), 0.0, r, limit=200)
    return shell * radial


def geodesic_distance(man: ManifoldDescriptor, a, b) -> np.ndarray:
    """
    Geodesic distance between on-manifold points, broadcasting over leading axes.
    """
    a, b = _coords(man, a), _coords(man, b)
    if man.kind is ManifoldKind.SPHERE:
        return np.arccos(np.clip(np.sum(a * b, axis=-1), -1.0, 1.0))
    if man.kind is ManifoldKind.TORUS:
        ca, cb = _as_circles(man, a), _as_circles(man, b)
        delta = np.arctan2(ca[..., 1], ca[..., 0]) - np.arctan2(cb[..., 1], cb[..., 0])
        wrapped = np.mod(delta + np.pi, 2.0 * np.pi) - np.pi
        return np.sqrt(np.sum(wrapped ** 2, axis=-1))
    if man.kind is ManifoldKind.SO3:
        cosine = (np.sum(a * b, axis=-1) - 1.0) / 2.0
        return np.arccos(np.clip(cosine, -1.0, 1.0))
    sq = np.sum((a - b) ** 2, axis=-1)
    denom = (1.0 - np.sum(a * a, axis=-1)) * (1.0 - np.sum(b * b, axis=-1))
    return np.arccosh(np.maximum(1.0 + 2.0 * sq / denom, 1.0))


def sample_uniform(man: ManifoldDescriptor, count: int, rng: np.random.Generator) -> EmbeddedPoint:
    """
    Draw points uniformly from the manifold.

    The Poincaré ball is sampled Lebesgue-uniformly on the ball of radius
    1 − epsilon_ball; SO(3) follows the Haar measure.

    Args:
        man (ManifoldDescriptor): Manifold to sample
        count (int): Number of points, at least 1
        rng (np.random.Generator): Random source

    Returns:
        EmbeddedPoint: Array of shape (count, m)
    """
    if count < 1:
        raise ValueError(f"count must be positive, got {count}")
    if man.kind is ManifoldKind.SPHERE:
        return _normalize_rows(rng.standard_normal((count, man.m)))
    if man.kind is ManifoldKind.TORUS:
        angles = rng.uniform(0.0, 2.0 * np.pi, size=(count, man.n))
        return np.stack([np.cos(angles), np.sin(angles)], axis=-1).reshape(count, man.m)
    if man.kind is ManifoldKind.SO3:
        return _as_vectors(Rotation.random(count, random_state=rng).as_matrix())
    directions = _normalize_rows(rng.standard_normal((count, man.n)))
    radii = man.ball_radius * rng.uniform(size=(count, 1)) ** (1.0 / man.n)
    return directions * radii


def tangent_noise(man: ManifoldDescriptor, z, rng: np.random.Generator, rescale: bool = True) -> np.ndarray:
    """
    Gaussian ambient noise projected into the tangent space at z.

    Args:
        man (ManifoldDescriptor): Manifold of z
        z: On-manifold points, shape (..., m)
        rng (np.random.Generator): Random source
        rescale (bool): Rescale every vector to length √n

    Returns:
        np.ndarray: Tangent vectors with E[vvᵀ] = RRᵀ before rescaling
    """
    z = _coords(man, z)
    v = project_jvp(man, z, rng.standard_normal(z.shape))
    norms = np.linalg.norm(v, axis=-1)
    degenerate = norms < ROW_NORM_FLOOR
    if np.any(degenerate):
        logger.warning(f"Resampling {int(np.sum(degenerate))} vanishing tangent noise vector(s)")
        v[degenerate] = project_jvp(man, z[degenerate], rng.standard_normal(z[degenerate].shape))
        norms = np.linalg.norm(v, axis=-1)
        if np.any(norms < ROW_NORM_FLOOR):
            raise ZeroTangent("Projected tangent noise vanished twice")
    if rescale:
        v = v * (math.sqrt(man.n) / norms)[..., None]
    return v


def _log_cosh(r: np.ndarray) -> np.ndarray:
    return r + np.log1p(np.exp(-2.0 * r)) - math.log(2.0)


def exp0_poincare(v) -> EmbeddedPoint:
    """Exponential map at the origin of the Poincaré ball, tanh(‖v‖)·v/‖v‖."""
    v = np.asarray(v, dtype=np.float64)
    r = np.linalg.norm(v, axis=-1, keepdims=True)
    safe = np.maximum(r, SERIES_CUTOFF)
    return np.where(r < SERIES_CUTOFF, v, np.tanh(safe) * v / safe)


def log_poincare(x) -> np.ndarray:
    """Inverse of exp0_poincare, artanh(‖x‖)·x/‖x‖."""
    x = np.asarray(x, dtype=np.float64)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    safe = np.clip(r, SERIES_CUTOFF, 1.0 - 1e-16)
    return np.where(r < SERIES_CUTOFF, x, np.arctanh(safe) * x / safe)


def logdet_jac_exp0(v) -> np.ndarray:
    """
    log|det J_exp0(v)| = (n − 1)·log(tanh‖v‖ / ‖v‖) − 2·log cosh‖v‖.

    For n = 2 this is log(tanh r / (r cosh² r)).
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[-1]
    r = np.linalg.norm(v, axis=-1)
    safe = np.maximum(r, SERIES_CUTOFF)
    value = (n - 1) * (np.log(np.tanh(safe)) - np.log(safe)) - 2.0 * _log_cosh(safe)
    return np.where(r < SERIES_CUTOFF, 0.0, value)

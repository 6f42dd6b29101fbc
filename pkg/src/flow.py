"""
`flow.py`:

This module contains the manifold free-form flow model: a projected encoder
f = proj∘f̃ and decoder g = proj∘g̃, the surrogate maximum-likelihood gradient,
the reconstruction, uniform and projection regularizers, exact
log-densities through tangent-space Jacobians, latent refinement, sampling
and the gradient error-bound diagnostic.

Batches are arrays of shape (B, m). Parameter gradients are flat vectors
aligned with `NetworkParams.flat`.
"""

from dataclasses import asdict, dataclass, fields
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from src import distributions, geometry, nnet
from src.distributions import LatentSpec
from src.exceptions import DimensionMismatch, SingularJacobian
from src.geometry import ManifoldDescriptor
from src.log_config import logger
from src.nnet import NetworkParams, NetworkSpec

SINGULAR_DET_TOL = 1e-12
DEFAULT_REFINE_SIGMA = 1e-2
DEFAULT_REFINE_TRIES = 64

# (x, z, v) -> w replacing the stop-gradient decoder tangent
DecoderJvp = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class FlowModel:
    """
    The trainable artifact: encoder and decoder parameters on a manifold
    together with the latent distribution.
    """
    manifold: ManifoldDescriptor
    encoder: NetworkParams
    decoder: NetworkParams
    latent: LatentSpec

    def __post_init__(self):
        m = self.manifold.m
        for name, params in (("encoder", self.encoder), ("decoder", self.decoder)):
            if params.spec.input_dim != m:
                raise DimensionMismatch(f"{name} dimension {params.spec.input_dim} does not match manifold m={m}")
        latent_man = self.latent.manifold
        if latent_man.kind is not self.manifold.kind or latent_man.n != self.manifold.n:
            raise DimensionMismatch(f"Latent manifold {latent_man.kind.value}({latent_man.n}) differs from "
                                    f"model manifold {self.manifold.kind.value}({self.manifold.n})")

    def copy(self) -> "FlowModel":
        return FlowModel(self.manifold, self.encoder.copy(), self.decoder.copy(), self.latent)


@dataclass(frozen=True)
class LossWeights:
    beta_r_x: float = 0.0
    beta_r_z: float = 0.0
    beta_u_x: float = 0.0
    beta_u_z: float = 0.0
    beta_p_x: float = 0.0
    beta_p_z: float = 0.0

    def __post_init__(self):
        for item in fields(self):
            value = getattr(self, item.name)
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"{item.name} must be finite and nonnegative, got {value}")

    @property
    def trains_decoder(self) -> bool:
        """The decoder only receives gradients from the regularizers."""
        return any(getattr(self, item.name) > 0.0 for item in fields(self))

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LossWeights":
        return cls(**{item.name: float(data.get(item.name, 0.0)) for item in fields(cls)})


@dataclass
class LossReport:
    nll_surrogate: float = 0.0
    recon_x: float = 0.0
    recon_z: float = 0.0
    uniform_x: float = 0.0
    uniform_z: float = 0.0
    proj_x: float = 0.0
    proj_z: float = 0.0
    total: float = 0.0

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class FlowGradients:
    encoder: np.ndarray
    decoder: np.ndarray


def create_model(man: ManifoldDescriptor, encoder_spec: NetworkSpec, decoder_spec: NetworkSpec,
                 latent: LatentSpec, rng: np.random.Generator) -> FlowModel:
    """
    Build a flow with near-identity encoder and decoder.

    Args:
        man (ManifoldDescriptor): Data and latent manifold
        encoder_spec (NetworkSpec): Encoder architecture
        decoder_spec (NetworkSpec): Decoder architecture
        latent (LatentSpec): Latent distribution
        rng (np.random.Generator): Random source for initialization

    Returns:
        FlowModel: Freshly initialized model
    """
    encoder = nnet.init_near_identity(encoder_spec, rng)
    decoder = nnet.init_near_identity(decoder_spec, rng)
    model = FlowModel(man, encoder, decoder, latent)
    logger.info(f"Created flow on {man.kind.value}({man.n}) with {len(encoder)} encoder and "
                f"{len(decoder)} decoder parameters")
    return model


def _batch(x) -> Tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    return np.atleast_2d(x), x.ndim == 1


def encode(model: FlowModel, x) -> Tuple[np.ndarray, np.ndarray]:
    """
    Apply the projected encoder.

    Returns:
        Tuple of (z = proj(f̃(x)), raw = f̃(x))
    """
    raw = nnet.forward(model.encoder, x)
    return geometry.project(model.manifold, raw), raw


def decode(model: FlowModel, z) -> Tuple[np.ndarray, np.ndarray]:
    """
    Apply the projected decoder.

    Returns:
        Tuple of (x = proj(g̃(z)), raw = g̃(z))
    """
    raw = nnet.forward(model.decoder, z)
    return geometry.project(model.manifold, raw), raw


def sample_tangent_noise(model: FlowModel, z, rng: np.random.Generator) -> np.ndarray:
    """Tangent noise at z rescaled to length √n."""
    return geometry.tangent_noise(model.manifold, z, rng, rescale=True)


def decoder_tangent(model: FlowModel, z, v) -> np.ndarray:
    """J_g(z)·v for the projected decoder."""
    raw, raw_dot = nnet.jvp(model.decoder, z, v)
    return geometry.project_jvp(model.manifold, raw, raw_dot)


def chain_jacobian(man: ManifoldDescriptor, params: NetworkParams, x) -> Tuple[np.ndarray, np.ndarray]:
    """
    Full Jacobian of proj∘net at x.

    Returns:
        Tuple of (raw network output (B, m), Jacobian (B, m, m))
    """
    batch, _ = _batch(x)
    raw = nnet.forward(params, batch)
    jac = nnet.jacobian(params, batch)
    columns = np.swapaxes(jac, -1, -2)
    projected = geometry.project_jvp(man, np.broadcast_to(raw[:, None, :], columns.shape), columns)
    return raw, np.swapaxes(projected, -1, -2)


def chain_grad_of_jvp(man: ManifoldDescriptor, params: NetworkParams, x, w, u) -> np.ndarray:
    """
    Parameter gradient of Σ_b u_b·proj′(net(x_b))·J_net(x_b)·w_b with x, w, u fixed.

    The projection contributes through both proj′ applied to the output tangent
    and the curvature of the projection at the raw output.
    """
    batch, _ = _batch(x)
    raw, raw_dot = nnet.jvp(params, batch, w)
    primal_bar = geometry.project_curvature_cotangent(man, raw, raw_dot, u)
    tangent_bar = geometry.project_vjp(man, raw, u)
    _, _, _, _, grads = nnet.dual_backward(params, batch, w, primal_bar, tangent_bar)
    return grads


def exact_inverse_tangent(model: FlowModel, x, v) -> np.ndarray:
    """
    Q(RᵀJ_fQ)⁻¹Rᵀ·v: the tangent map of an exact inverse of the encoder at x.

    Args:
        model (FlowModel): Flow whose encoder is inverted
        x: Data points, shape (B, m)
        v: Latent tangent vectors at f(x), shape (B, m)

    Returns:
        np.ndarray: Tangent vectors at x, shape (B, m)
    """
    man = model.manifold
    batch, _ = _batch(x)
    raw, jac = chain_jacobian(man, model.encoder, batch)
    q = geometry.tangent_frame(man, batch).basis
    r = geometry.tangent_frame(man, geometry.project(man, raw)).basis
    core = np.swapaxes(r, -1, -2) @ jac @ q
    coeffs = np.linalg.solve(core, np.einsum("bmn,bm->bn", r, np.asarray(v, dtype=np.float64))[..., None])
    return (q @ coeffs)[..., 0]


def surrogate_nll_and_grads(model: FlowModel, batch, rng: np.random.Generator,
                            decoder_jvp: Optional[DecoderJvp] = None) -> Tuple[float, np.ndarray]:
    """
    Surrogate negative log-likelihood and its encoder gradient.

    Per item the surrogate is −log p_Z(z) − v·J_f(x)·SG[J_g(z)·v], with one
    tangent noise vector v per item. The reported value is the batch mean of
    −log p_Z(z); the volume term only shapes the gradient.

    Args:
        model (FlowModel): Flow
        batch: On-manifold data, shape (B, m)
        rng (np.random.Generator): Random source for the noise vectors
        decoder_jvp (DecoderJvp): Optional replacement for the decoder tangent map

    Returns:
        Tuple of (mean −log p_Z(z), encoder gradient of length P_enc)
    """
    man = model.manifold
    x, _ = _batch(batch)
    size = x.shape[0]
    raw = nnet.forward(model.encoder, x)
    z = geometry.project(man, raw)
    v = sample_tangent_noise(model, z, rng)
    w = decoder_jvp(x, z, v) if decoder_jvp is not None else decoder_tangent(model, z, v)

    _, raw_dot = nnet.jvp(model.encoder, x, w)
    z_bar = -distributions.grad_log_prob(model.latent, z) / size
    primal_bar = (geometry.project_vjp(man, raw, z_bar)
                  + geometry.project_curvature_cotangent(man, raw, raw_dot, -v / size))
    tangent_bar = geometry.project_vjp(man, raw, -v / size)
    _, _, _, _, grads = nnet.dual_backward(model.encoder, x, w, primal_bar, tangent_bar)
    value = float(-np.mean(distributions.log_prob(model.latent, z)))
    return value, grads


def _projection_residual_grad(man: ManifoldDescriptor, raw: np.ndarray, projected: np.ndarray) -> np.ndarray:
    """∇_raw ‖raw − proj(raw)‖² per row."""
    residual = raw - projected
    return 2.0 * (residual - geometry.project_vjp(man, raw, residual))


def _cycle_x(model: FlowModel, x: np.ndarray, weights: Dict[str, float], with_grads: bool):
    """
    Losses along x → z = f(x) → x̂ = g(z) → ẑ = f(x̂) and their weighted gradients.

    `weights` maps recon_x, recon_z, proj_x, proj_z to the factor applied to
    the batch-mean loss in the returned gradients.
    """
    man = model.manifold
    size = x.shape[0]
    raw_z = nnet.forward(model.encoder, x)
    z = geometry.project(man, raw_z)
    raw_x = nnet.forward(model.decoder, z)
    x_hat = geometry.project(man, raw_x)
    raw_zz = nnet.forward(model.encoder, x_hat)
    z_hat = geometry.project(man, raw_zz)
    values = {
        "recon_x": float(np.mean(np.sum((x_hat - x) ** 2, axis=-1))),
        "recon_z": float(np.mean(np.sum((z_hat - z) ** 2, axis=-1))),
        "proj_x": float(np.mean(np.sum((raw_x - x_hat) ** 2, axis=-1))),
        "proj_z": float(np.mean(np.sum((raw_z - z) ** 2, axis=-1))),
    }
    if not with_grads:
        return values, None, None

    z_hat_bar = weights.get("recon_z", 0.0) * 2.0 * (z_hat - z) / size
    x_hat_bar = weights.get("recon_x", 0.0) * 2.0 * (x_hat - x) / size
    pulled, enc_outer = nnet.vjp(model.encoder, x_hat, geometry.project_vjp(man, raw_zz, z_hat_bar))
    x_hat_bar = x_hat_bar + pulled
    raw_x_bar = (geometry.project_vjp(man, raw_x, x_hat_bar)
                 + weights.get("proj_x", 0.0) * _projection_residual_grad(man, raw_x, x_hat) / size)
    z_bar, dec_grads = nnet.vjp(model.decoder, z, raw_x_bar)
    z_bar = z_bar - z_hat_bar
    raw_z_bar = (geometry.project_vjp(man, raw_z, z_bar)
                 + weights.get("proj_z", 0.0) * _projection_residual_grad(man, raw_z, z) / size)
    _, enc_inner = nnet.vjp(model.encoder, x, raw_z_bar)
    return values, enc_outer + enc_inner, dec_grads


def _cycle_z(model: FlowModel, z: np.ndarray, weight: float, with_grads: bool):
    """Loss along z → x = g(z) → ẑ = f(x) with z held fixed."""
    man = model.manifold
    size = z.shape[0]
    raw_x = nnet.forward(model.decoder, z)
    x = geometry.project(man, raw_x)
    raw_z = nnet.forward(model.encoder, x)
    z_hat = geometry.project(man, raw_z)
    value = float(np.mean(np.sum((z_hat - z) ** 2, axis=-1)))
    if not with_grads:
        return value, None, None
    z_hat_bar = weight * 2.0 * (z_hat - z) / size
    x_bar, enc_grads = nnet.vjp(model.encoder, x, geometry.project_vjp(man, raw_z, z_hat_bar))
    _, dec_grads = nnet.vjp(model.decoder, z, geometry.project_vjp(man, raw_x, x_bar))
    return value, enc_grads, dec_grads


def reconstruction_losses(model: FlowModel, batch) -> Tuple[float, float]:
    """
    Mean squared embedding-space reconstruction errors.

    Returns:
        Tuple of (E‖x − g(f(x))‖², E‖f(x) − f(g(f(x)))‖²)
    """
    x, _ = _batch(batch)
    values, _, _ = _cycle_x(model, x, {}, with_grads=False)
    return values["recon_x"], values["recon_z"]


def uniform_recon_losses(model: FlowModel, rng: np.random.Generator, count: int) -> Tuple[float, float]:
    """
    Reconstruction errors on uniformly sampled points of the data and latent side.

    Returns:
        Tuple of (E_{x∼U}‖x − g(f(x))‖², E_{z∼U}‖z − f(g(z))‖²)
    """
    x = geometry.sample_uniform(model.manifold, count, rng)
    z = geometry.sample_uniform(model.manifold, count, rng)
    values, _, _ = _cycle_x(model, x, {}, with_grads=False)
    uniform_z, _, _ = _cycle_z(model, z, 0.0, with_grads=False)
    return values["recon_x"], uniform_z


def projection_losses(model: FlowModel, batch) -> Tuple[float, float]:
    """
    Squared distances between raw network outputs and their projections.

    Returns:
        Tuple of (E‖g̃(f(x)) − g(f(x))‖², E‖f̃(x) − f(x)‖²)
    """
    x, _ = _batch(batch)
    values, _, _ = _cycle_x(model, x, {}, with_grads=False)
    return values["proj_x"], values["proj_z"]


def total_loss_and_grads(model: FlowModel, batch, weights: LossWeights, rng: np.random.Generator,
                         uniform_count: Optional[int] = None,
                         decoder_jvp: Optional[DecoderJvp] = None) -> Tuple[LossReport, FlowGradients]:
    """
    Full training objective: surrogate NLL plus the weighted regularizers.

    Uniform terms are only evaluated (and only consume randomness) when their
    weight is positive; otherwise they are reported as 0.

    Args:
        model (FlowModel): Flow
        batch: On-manifold data, shape (B, m)
        weights (LossWeights): Regularizer weights
        rng (np.random.Generator): Random source
        uniform_count (int): Uniform points per uniform term, defaults to the batch size
        decoder_jvp (DecoderJvp): Optional replacement for the decoder tangent map

    Returns:
        Tuple of (LossReport, FlowGradients)
    """
    man = model.manifold
    x, _ = _batch(batch)
    count = uniform_count or x.shape[0]
    report = LossReport()
    report.nll_surrogate, enc_grads = surrogate_nll_and_grads(model, x, rng, decoder_jvp)
    dec_grads = np.zeros(len(model.decoder))

    cycle_weights = {"recon_x": weights.beta_r_x, "recon_z": weights.beta_r_z,
                     "proj_x": weights.beta_p_x, "proj_z": weights.beta_p_z}
    values, enc_cycle, dec_cycle = _cycle_x(model, x, cycle_weights, with_grads=True)
    enc_grads = enc_grads + enc_cycle
    dec_grads = dec_grads + dec_cycle
    report.recon_x, report.recon_z = values["recon_x"], values["recon_z"]
    report.proj_x, report.proj_z = values["proj_x"], values["proj_z"]

    if weights.beta_u_x > 0.0:
        uniform_x = geometry.sample_uniform(man, count, rng)
        u_values, enc_u, dec_u = _cycle_x(model, uniform_x, {"recon_x": weights.beta_u_x}, with_grads=True)
        report.uniform_x = u_values["recon_x"]
        enc_grads = enc_grads + enc_u
        dec_grads = dec_grads + dec_u
    if weights.beta_u_z > 0.0:
        uniform_z = geometry.sample_uniform(man, count, rng)
        report.uniform_z, enc_u, dec_u = _cycle_z(model, uniform_z, weights.beta_u_z, with_grads=True)
        enc_grads = enc_grads + enc_u
        dec_grads = dec_grads + dec_u

    report.total = (report.nll_surrogate
                    + weights.beta_r_x * report.recon_x + weights.beta_r_z * report.recon_z
                    + weights.beta_u_x * report.uniform_x + weights.beta_u_z * report.uniform_z
                    + weights.beta_p_x * report.proj_x + weights.beta_p_z * report.proj_z)
    return report, FlowGradients(encoder=enc_grads, decoder=dec_grads)


def _tangent_logdet(core: np.ndarray, on_singular: str) -> np.ndarray:
    _, logdet = np.linalg.slogdet(core)
    singular = ~(logdet >= np.log(SINGULAR_DET_TOL))
    if np.any(singular):
        if on_singular == "raise":
            raise SingularJacobian(f"{int(np.sum(singular))} point(s) with |det| below {SINGULAR_DET_TOL}")
        logdet = np.where(singular, np.nan, logdet)
    return logdet


def exact_log_density(model: FlowModel, x, direction: str = "decoder", latent_point=None,
                      on_singular: str = "raise") -> np.ndarray:
    """
    Log-density of the model at x through the manifold change of variables.

    Encoder direction: log p_Z(f(x)) + log|det(RᵀJ_f Q)| + ½log|RᵀG_Z R| − ½log|QᵀG_X Q|,
    with Q at x and R at f(x). Decoder direction: log p_Z(z) − log|det(Q̂ᵀJ_g R)|
    with the same metric correction, where z = f(x) (or `latent_point`), R is
    taken at z and Q̂ at g(z).

    Args:
        model (FlowModel): Flow
        x: On-manifold data, shape (m,) or (B, m)
        direction (str): "encoder" or "decoder"
        latent_point: Optional latent points replacing f(x) in the decoder direction
        on_singular (str): "raise" for SingularJacobian, "nan" to return NaN for those points

    Returns:
        np.ndarray: Log-density per point in nats
    """
    if direction not in ("encoder", "decoder"):
        raise ValueError(f"direction must be 'encoder' or 'decoder', got {direction!r}")
    if on_singular not in ("raise", "nan"):
        raise ValueError(f"on_singular must be 'raise' or 'nan', got {on_singular!r}")
    man = model.manifold
    pts, single = _batch(x)
    pts = geometry.check_on_manifold(man, pts)

    if direction == "encoder":
        raw, jac = chain_jacobian(man, model.encoder, pts)
        z = geometry.project(man, raw)
        q = geometry.tangent_frame(man, pts).basis
        r = geometry.tangent_frame(man, z).basis
        logdet = _tangent_logdet(np.swapaxes(r, -1, -2) @ jac @ q, on_singular)
        out = (distributions.log_prob(model.latent, z) + logdet
               + geometry.log_volume_element(man, z) - geometry.log_volume_element(man, pts))
    else:
        if latent_point is None:
            z, _ = encode(model, pts)
        else:
            z = np.atleast_2d(np.asarray(latent_point, dtype=np.float64))
        raw, jac = chain_jacobian(man, model.decoder, z)
        x_hat = geometry.project(man, raw)
        r = geometry.tangent_frame(man, z).basis
        q_hat = geometry.tangent_frame(man, x_hat).basis
        logdet = _tangent_logdet(np.swapaxes(q_hat, -1, -2) @ jac @ r, on_singular)
        out = (distributions.log_prob(model.latent, z) - logdet
               + geometry.log_volume_element(man, z) - geometry.log_volume_element(man, x_hat))
    return out[0] if single else out


def refine_latent(model: FlowModel, x, sigma: float = DEFAULT_REFINE_SIGMA, tries: int = DEFAULT_REFINE_TRIES,
                  rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    Improve the latent estimate f(x) by candidate search.

    Candidates are f(x) itself, `tries` perturbations proj(f(x) + N(0, σ²)),
    `tries` perturbations proj(x + N(0, σ²)) and `tries` uniform latent points;
    the candidate with the smallest ‖g(z̃) − x‖² wins, ties going to f(x).

    Args:
        model (FlowModel): Flow
        x: On-manifold data, shape (m,) or (B, m)
        sigma (float): Perturbation scale; 0 returns f(x)
        tries (int): Candidates per source, at least 1
        rng (np.random.Generator): Random source

    Returns:
        np.ndarray: Refined latent points with the shape of x
    """
    if tries < 1:
        raise ValueError(f"tries must be at least 1, got {tries}")
    man = model.manifold
    pts, single = _batch(x)
    z, _ = encode(model, pts)
    if sigma == 0.0:
        return z[0] if single else z
    rng = rng if rng is not None else np.random.default_rng()
    size = pts.shape[0]
    around_z = z[:, None, :] + sigma * rng.standard_normal((size, tries, man.m))
    around_x = pts[:, None, :] + sigma * rng.standard_normal((size, tries, man.m))
    uniform = geometry.sample_uniform(man, size * tries, rng).reshape(size, tries, man.m)
    candidates = np.concatenate([
        z[:, None, :],
        geometry.project(man, around_z),
        geometry.project(man, around_x),
        uniform,
    ], axis=1)
    flat = candidates.reshape(-1, man.m)
    decoded, _ = decode(model, flat)
    errors = np.sum((decoded.reshape(candidates.shape) - pts[:, None, :]) ** 2, axis=-1)
    best = np.argmin(errors, axis=1)
    refined = candidates[np.arange(size), best]
    return refined[0] if single else refined


def sample(model: FlowModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` samples by decoding latent samples in one decoder pass."""
    z = distributions.sample(model.latent, count, rng)
    x, _ = decode(model, z)
    return x


def estimator_error_bound(model: FlowModel, x) -> Tuple[np.ndarray, np.ndarray]:
    """
    Compare the decoder-based gradient estimate with the exact volume-change gradient.

    lhs = max over parameters of |∂_θ tr(Rᵀ J_f P_x J_g R) − ∂_θ log|det(RᵀJ_fQ)||,
    rhs = max over parameters of ‖Rᵀ(∂_θJ_f)J_{f⁻¹}R‖_F · ‖RᵀJ_f P_x J_g R − I‖_F,
    with J_{f⁻¹} = Q(RᵀJ_fQ)⁻¹Rᵀ and P_x the tangent projector at x. The
    decoder contribution is held fixed, so lhs ≤ rhs holds pointwise.

    Args:
        model (FlowModel): Flow
        x: On-manifold data, shape (m,) or (B, m)

    Returns:
        Tuple of (lhs, rhs), one value per point
    """
    man = model.manifold
    pts, single = _batch(x)
    pts = geometry.check_on_manifold(man, pts)
    lhs = np.empty(len(pts))
    rhs = np.empty(len(pts))
    for idx, point in enumerate(pts):
        lhs[idx], rhs[idx] = _error_bound_at(model, point)
    return (lhs[0], rhs[0]) if single else (lhs, rhs)


def _error_bound_at(model: FlowModel, x: np.ndarray) -> Tuple[float, float]:
    man = model.manifold
    m, n = man.m, man.n
    raw, jac_f = chain_jacobian(man, model.encoder, x)
    z = geometry.project(man, raw)[0]
    jac_f = jac_f[0]
    frame_x = geometry.tangent_frame(man, x)
    q, proj_x = frame_x.basis, frame_x.projector
    r = geometry.tangent_frame(man, z).basis
    core = r.T @ jac_f @ q
    if abs(np.linalg.det(core)) < SINGULAR_DET_TOL:
        raise SingularJacobian(f"Tangent Jacobian determinant below {SINGULAR_DET_TOL} at {x}")
    _, jac_g = chain_jacobian(man, model.decoder, z)
    jac_g = proj_x @ jac_g[0]
    inverse = q @ np.linalg.solve(core, r.T)

    # ∂_θ tr(A J_f) = Σ_j ∂_θ (row_j(A) · J_f e_j)
    difference = jac_g @ r @ r.T - inverse
    repeated = np.repeat(x[None, :], m, axis=0)
    trace_grad = chain_grad_of_jvp(man, model.encoder, repeated, np.eye(m), difference)
    lhs = float(np.max(np.abs(trace_grad)))

    pairs = np.repeat(x[None, :], n * n, axis=0)
    directions = np.array([inverse @ r[:, j] for i in range(n) for j in range(n)])
    cotangents = np.array([r[:, i] for i in range(n) for j in range(n)])
    entry_grads = np.stack([
        chain_grad_of_jvp(man, model.encoder, pairs[k:k + 1], directions[k:k + 1], cotangents[k:k + 1])
        for k in range(n * n)
    ])
    bound_factor = np.sqrt(np.sum(entry_grads ** 2, axis=0))
    mismatch = np.linalg.norm(r.T @ jac_f @ jac_g @ r - np.eye(n))
    rhs = float(np.max(bound_factor) * mismatch)
    return lhs, rhs

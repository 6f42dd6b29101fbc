"""
`helpers.py`:

Numerical helpers and small model builders shared by the tests.
"""

import numpy as np

from src import distributions, flow, geometry, nnet


ALL_MANIFOLDS = [
    geometry.sphere(1),
    geometry.sphere(2),
    geometry.torus(2),
    geometry.special_orthogonal3(),
    geometry.poincare_ball(2),
]


def manifold_id(man):
    return f"{man.kind.value}{man.n}"


def random_ambient(man, count, rng):
    """Random projectable ambient points, kept away from degenerate inputs."""
    if man.kind is geometry.ManifoldKind.SO3:
        base = geometry.sample_uniform(man, count, rng).reshape(count, 3, 3)
        sym = rng.uniform(0.5, 1.5, size=(count, 3))
        return (base * sym[:, None, :]).reshape(count, 9) + 0.05 * rng.standard_normal((count, 9))
    if man.kind is geometry.ManifoldKind.POINCARE_BALL:
        return 0.6 * rng.uniform(-1.0, 1.0, size=(count, man.m))
    return geometry.sample_uniform(man, count, rng) * rng.uniform(0.5, 2.0, size=(count, 1)) \
        + 0.05 * rng.standard_normal((count, man.m))


def central_difference(fn, x, direction, step=1e-6):
    return (fn(x + step * direction) - fn(x - step * direction)) / (2.0 * step)


def small_spec(m, width=6, blocks=1, depth=2, activation="silu", init_scale=0.3):
    return nnet.NetworkSpec(input_dim=m, residual_blocks=blocks, inner_depth=depth, inner_width=width,
                            activation=activation, init_scale=init_scale)


def small_model(man, rng, latent=None, width=6, init_scale=0.3, activation="silu"):
    spec = small_spec(man.m, width=width, init_scale=init_scale, activation=activation)
    latent = latent if latent is not None else distributions.uniform_latent(man)
    return flow.create_model(man, spec, spec, latent, rng)


def identity_model(man, latent=None):
    spec = nnet.NetworkSpec(input_dim=man.m, residual_blocks=1, inner_depth=2, inner_width=4, init_scale=0.0)
    latent = latent if latent is not None else distributions.uniform_latent(man)
    return flow.create_model(man, spec, spec, latent, np.random.default_rng(0))


TINY_CONFIG = """
[manifold]
kind = "torus"
n = 2

[model.encoder]
residual_blocks = 1
inner_depth = 2
inner_width = 8

[train]
batch_size = 16
step_count = 4
validation_every = 2

[train.loss_weights]
beta_r_x = 10.0

[data]
synthetic = "uniform_t2"
count = 60

[output]
directory = "{output}"
emit_samples = 5
"""


def tiny_config_text(output_dir, replace=None):
    """TINY_CONFIG with the output directory filled in and the `replace` substitutions applied."""
    text = TINY_CONFIG.format(output=output_dir)
    for old, new in (replace or {}).items():
        text = text.replace(old, new)
    return text

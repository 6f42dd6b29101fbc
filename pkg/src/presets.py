"""
`presets.py`:

This module contains the hyperparameter presets of the reference
experiments, expressed as partial run configurations. A config file selects
one with `preset = "<name>"`; explicit keys in the file override preset values.
"""

import copy
from typing import Any, Dict

PRESETS: Dict[str, Dict[str, Any]] = {
    "rotations": {
        "manifold": {"kind": "so3", "n": 3},
        "model": {
            "encoder": {"residual_blocks": 2, "inner_depth": 5, "inner_width": 512, "activation": "relu"},
            "latent": {"kind": "uniform"},
        },
        "train": {
            "batch_size": 1024, "step_count": 585_600, "learning_rate": 5e-3,
            "schedule": "exponential", "gamma": 1.0 - 1e-5, "grad_clip_norm": 1.0, "weight_decay": 3e-5,
            "loss_weights": {"beta_r_x": 500.0, "beta_r_z": 0.0, "beta_u_x": 10.0, "beta_u_z": 10.0,
                             "beta_p_x": 10.0, "beta_p_z": 10.0},
        },
    },
    "earth": {
        "manifold": {"kind": "sphere", "n": 2},
        "model": {
            "encoder": {"residual_blocks": 4, "inner_depth": 2, "inner_width": 256, "activation": "sin"},
            "latent": {"kind": "vmf_mixture", "fit_components": 5},
        },
        "train": {
            "batch_size": 32, "step_count": 1_200_000, "learning_rate": 2e-4,
            "schedule": "one_cycle", "grad_clip_norm": 10.0, "weight_decay": 5e-5,
            "loss_weights": {"beta_r_x": 1e5, "beta_r_z": 0.0, "beta_u_x": 200.0, "beta_u_z": 200.0,
                             "beta_p_x": 0.0, "beta_p_z": 0.0},
        },
        "data": {"format": "latlon_degrees", "noise_sigma": 0.0015},
    },
    "tori_t2": {
        "manifold": {"kind": "torus", "n": 2},
        "model": {
            "encoder": {"residual_blocks": 6, "inner_depth": 3, "inner_width": 256, "activation": "silu"},
            "latent": {"kind": "uniform"},
        },
        "train": {
            "batch_size": 512, "step_count": 120_000, "learning_rate": 1e-3,
            "schedule": "one_cycle", "grad_clip_norm": 0.0, "weight_decay": 1e-3,
            "loss_weights": {"beta_r_x": 100.0, "beta_r_z": 100.0, "beta_u_x": 100.0, "beta_u_z": 0.0,
                             "beta_p_x": 0.0, "beta_p_z": 0.0},
        },
        "data": {"format": "angles"},
    },
    "tori_t7": {
        "manifold": {"kind": "torus", "n": 7},
        "model": {
            "encoder": {"residual_blocks": 2, "inner_depth": 2, "inner_width": 256, "activation": "silu"},
            "latent": {"kind": "uniform"},
        },
        "train": {
            "batch_size": 512, "step_count": 120_000, "learning_rate": 1e-3,
            "schedule": "one_cycle", "grad_clip_norm": 0.0, "weight_decay": 1e-3,
            "loss_weights": {"beta_r_x": 1000.0, "beta_r_z": 100.0, "beta_u_x": 100.0, "beta_u_z": 1000.0,
                             "beta_p_x": 0.0, "beta_p_z": 0.0},
        },
        "data": {"format": "angles", "noise_sigma": 1e-2},
    },
}


def _poincare(blocks: int, depth: int, width: int, lr: float, schedule: Dict[str, Any], steps: int,
              synthetic: str) -> Dict[str, Any]:
    return {
        "manifold": {"kind": "poincare_ball", "n": 2},
        "model": {
            "encoder": {"residual_blocks": blocks, "inner_depth": depth, "inner_width": width,
                        "activation": "silu"},
            "latent": {"kind": "wrapped_normal", "sigma": 0.5},
        },
        "train": dict(schedule, **{
            "batch_size": 4096, "step_count": steps, "learning_rate": lr,
            "grad_clip_norm": 0.0, "weight_decay": 1e-3,
            "loss_weights": {"beta_r_x": 1000.0, "beta_r_z": 100.0, "beta_u_x": 100.0, "beta_u_z": 0.0,
                             "beta_p_x": 1.0, "beta_p_z": 1.0},
        }),
        "data": {"synthetic": synthetic, "count": 100_000},
    }


PRESETS["poincare_one_gaussian"] = _poincare(2, 2, 128, 2e-4, {"schedule": "exponential", "gamma": 0.9986},
                                             84_000, "one_gaussian_h2")
PRESETS["poincare_five_gaussians"] = _poincare(6, 3, 256, 1e-4, {"schedule": "one_cycle"}, 485_000,
                                               "five_gaussians_h2")
PRESETS["poincare_swish"] = _poincare(6, 3, 256, 1e-4, {"schedule": "one_cycle"}, 240_000, "swish_h2")
PRESETS["poincare_checkerboard"] = _poincare(6, 3, 256, 1e-4, {"schedule": "one_cycle"}, 495_000,
                                             "checkerboard_h2")


def get_preset(name: str) -> Dict[str, Any]:
    """Return a deep copy of a named preset."""
    if name not in PRESETS:
        raise KeyError(f"Unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return copy.deepcopy(PRESETS[name])

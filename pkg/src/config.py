"""
`config.py`:

This module contains parsing and validation of run configurations.

A run is described by a TOML file with the sections [manifold],
[model.encoder], [model.decoder], [model.latent], [train],
[train.loss_weights], [data] and [output]. A top-level `preset = "<name>"`
seeds values from `src.presets`; explicit keys win. The resolved
configuration (defaults, preset and file merged, paths made absolute) is what
gets validated, hashed and echoed next to the run outputs, so loading the
echo reproduces the run.
"""

import copy
import hashlib
import os
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import toml

from src import data_loader, distributions, geometry, presets
from src.data_loader import DataFormat
from src.distributions import LatentKind, LatentSpec, VmfComponent
from src.exceptions import ConfigError
from src.flow import LossWeights
from src.generate_data import DatasetName, get_dataset
from src.geometry import ManifoldDescriptor
from src.log_config import logger
from src.nnet import NetworkSpec
from src.trainer import Schedule, TrainConfig
from src.utils import atomic_write_text, resolve_output_dir

RESOLVED_CONFIG_NAME = "config.resolved.toml"
CONFIG_HASH_NAME = "config.sha256"

DEFAULTS: Dict[str, Any] = {
    "manifold": {"kind": "sphere", "n": 2, "epsilon_ball": 1e-5, "on_manifold_tol": 1e-6},
    "model": {
        "encoder": {"residual_blocks": 2, "inner_depth": 2, "inner_width": 64, "activation": "silu",
                    "init_scale": 1e-2, "residual": True},
        "decoder": {},
        "latent": {"kind": "uniform", "sigma": 1.0, "fit_components": 0, "components": []},
    },
    "train": {
        "batch_size": 256, "step_count": 1000, "learning_rate": 1e-3,
        "schedule": "exponential", "gamma": 1.0, "peak_fraction": 0.3, "peak_multiplier": 10.0,
        "final_divisor": 25.0, "grad_clip_norm": 0.0, "weight_decay": 0.0, "seed": 0,
        "validation_every": 500, "uniform_count": 0,
        "loss_weights": {"beta_r_x": 0.0, "beta_r_z": 0.0, "beta_u_x": 0.0, "beta_u_z": 0.0,
                         "beta_p_x": 0.0, "beta_p_z": 0.0},
    },
    "data": {"path": "", "format": "embedded", "synthetic": "", "count": 10000, "split_seed": 0,
             "fractions": [0.8, 0.1, 0.1], "noise_sigma": 0.0},
    "output": {"directory": "output", "emit_samples": 0, "checkpoint_name": "model.ckpt"},
}


@dataclass(frozen=True)
class LatentConfig:
    """
    Latent section: either a fixed distribution or a vMF mixture fitted to
    the training data (`fit_components` > 0).
    """
    kind: LatentKind
    sigma: float = 1.0
    components: Tuple[VmfComponent, ...] = ()
    fit_components: int = 0

    def build(self, man: ManifoldDescriptor, train_points: Optional[np.ndarray] = None,
              rng: Optional[np.random.Generator] = None) -> LatentSpec:
        if self.fit_components > 0:
            if train_points is None or rng is None:
                raise ValueError("Fitting a vMF mixture latent needs training points and a random source")
            return distributions.fit_vmf_mixture(train_points, self.fit_components, rng)
        return LatentSpec(self.kind, man, components=self.components, sigma=self.sigma)


@dataclass(frozen=True)
class DataConfig:
    path: str = ""
    format: DataFormat = DataFormat.EMBEDDED
    synthetic: str = ""
    count: int = 10000
    split_seed: int = 0
    fractions: Tuple[float, float, float] = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "output"
    emit_samples: int = 0
    checkpoint_name: str = "model.ckpt"

    @property
    def checkpoint_path(self) -> str:
        return os.path.join(self.directory, self.checkpoint_name)


@dataclass(frozen=True)
class RunConfig:
    manifold: ManifoldDescriptor
    encoder: NetworkSpec
    decoder: NetworkSpec
    latent: LatentConfig
    train: TrainConfig
    data: DataConfig
    output: OutputConfig
    resolved: Dict[str, Any] = field(default_factory=dict, compare=False)

    @property
    def config_hash(self) -> str:
        return config_hash(self.resolved)


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge `override` into a copy of `base`."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _unknown_keys(section: str, given: Dict[str, Any], allowed: Dict[str, Any], violations: List[str]) -> None:
    for key, value in given.items():
        if key not in allowed:
            violations.append(f"[{section or 'top level'}] unknown key {key!r}")
        elif isinstance(value, dict) and isinstance(allowed[key], dict) and allowed[key]:
            _unknown_keys(f"{section}.{key}" if section else key, value, allowed[key], violations)


def resolve_config(raw: Dict[str, Any], base_dir: str = ".") -> Tuple[Dict[str, Any], List[str]]:
    """
    Merge defaults, the selected preset and the file contents.

    Args:
        raw (Dict[str, Any]): Parsed TOML document
        base_dir (str): Directory relative data paths are resolved against

    Returns:
        Tuple of (resolved document, violations found while resolving)
    """
    violations: List[str] = []
    raw = dict(raw)
    preset_name = raw.pop("preset", None)
    preset: Dict[str, Any] = {}
    if preset_name is not None:
        try:
            preset = presets.get_preset(str(preset_name))
        except KeyError as e:
            violations.append(f"[preset] {e.args[0]}")
    allowed = copy.deepcopy(DEFAULTS)
    allowed["model"]["decoder"] = allowed["model"]["encoder"]
    _unknown_keys("", raw, allowed, violations)
    resolved = deep_merge(deep_merge(DEFAULTS, preset), raw)

    # Decoder architecture defaults to the encoder's.
    model = resolved["model"]
    model["decoder"] = deep_merge(model["encoder"], model.get("decoder", {}))

    data = resolved["data"]
    if data["path"] and not os.path.isabs(data["path"]):
        data["path"] = os.path.normpath(os.path.join(os.path.abspath(base_dir), data["path"]))
    output = resolved["output"]
    output["directory"] = os.path.abspath(resolve_output_dir(output["directory"]))
    return resolved, violations


def _collect(violations: List[str], section: str, build: Callable[[], Any]) -> Any:
    try:
        return build()
    except (ValueError, TypeError, KeyError) as e:
        violations.append(f"[{section}] {str(e)}")
        return None


def _network(man: Optional[ManifoldDescriptor], section: Dict[str, Any]) -> NetworkSpec:
    if man is None:
        raise ValueError("architecture not checked because [manifold] is invalid")
    return NetworkSpec(input_dim=man.m, **section)


def _latent(section: Dict[str, Any]) -> LatentConfig:
    components = tuple(
        VmfComponent(tuple(float(v) for v in item["mean"]), float(item["kappa"]), float(item["weight"]))
        for item in section.get("components", [])
    )
    return LatentConfig(LatentKind(section["kind"]), float(section["sigma"]), components,
                        int(section["fit_components"]))


def _train(section: Dict[str, Any], noise_sigma: float) -> TrainConfig:
    schedule = Schedule(section["schedule"], float(section["gamma"]), float(section["peak_fraction"]),
                        float(section["peak_multiplier"]), float(section["final_divisor"]))
    uniform_count = int(section["uniform_count"])
    return TrainConfig(
        batch_size=int(section["batch_size"]), step_count=int(section["step_count"]),
        learning_rate=float(section["learning_rate"]), schedule=schedule,
        grad_clip_norm=float(section["grad_clip_norm"]), weight_decay=float(section["weight_decay"]),
        data_noise_sigma=float(noise_sigma), seed=int(section["seed"]),
        validation_every=int(section["validation_every"]),
        loss_weights=LossWeights.from_dict(section["loss_weights"]),
        uniform_count=uniform_count if uniform_count > 0 else None,
    )


def _data(section: Dict[str, Any]) -> DataConfig:
    fractions = tuple(float(f) for f in section["fractions"])
    if len(fractions) != 3 or any(f < 0.0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be three nonnegative numbers summing to 1, got {list(fractions)}")
    if bool(section["path"]) == bool(section["synthetic"]):
        raise ValueError("exactly one of path and synthetic must be set")
    if section["synthetic"]:
        DatasetName(section["synthetic"])
    if int(section["count"]) < 3:
        raise ValueError(f"count must be at least 3, got {section['count']}")
    return DataConfig(section["path"], DataFormat(section["format"]), section["synthetic"],
                      int(section["count"]), int(section["split_seed"]), fractions)


def _output(section: Dict[str, Any]) -> OutputConfig:
    if int(section["emit_samples"]) < 0:
        raise ValueError(f"emit_samples must be nonnegative, got {section['emit_samples']}")
    if not section["checkpoint_name"]:
        raise ValueError("checkpoint_name must not be empty")
    return OutputConfig(section["directory"], int(section["emit_samples"]), section["checkpoint_name"])


def _cross_checks(man: ManifoldDescriptor, latent: Optional[LatentConfig], data: Optional[DataConfig],
                  violations: List[str]) -> None:
    if latent is not None:
        if latent.fit_components > 0:
            if latent.kind is not LatentKind.VMF_MIXTURE:
                violations.append("[model.latent] fit_components requires kind = \"vmf_mixture\"")
            elif latent.components:
                violations.append("[model.latent] give either components or fit_components, not both")
            if man.kind is not geometry.ManifoldKind.SPHERE or man.n != 2:
                violations.append("[model.latent] fitted vMF mixtures need the 2-sphere")
        else:
            _collect(violations, "model.latent", lambda: latent.build(man))
    if data is not None:
        if data.path:
            _collect(violations, "data", lambda: data_loader.expected_columns(data.format, man))
        else:
            target = get_dataset(data.synthetic).manifold
            if (target.kind, target.n) != (man.kind, man.n):
                violations.append(f"[data] synthetic dataset {data.synthetic!r} lives on "
                                  f"{target.kind.value}({target.n}), not {man.kind.value}({man.n})")


def build_run_config(resolved: Dict[str, Any], violations: Optional[List[str]] = None) -> RunConfig:
    """
    Validate a resolved document and build the typed configuration.

    Raises:
        ConfigError: Listing every violation found
    """
    violations = list(violations or [])
    man = _collect(violations, "manifold", lambda: ManifoldDescriptor(
        resolved["manifold"]["kind"], int(resolved["manifold"]["n"]),
        float(resolved["manifold"]["epsilon_ball"]), float(resolved["manifold"]["on_manifold_tol"])))
    model = resolved["model"]
    encoder = _collect(violations, "model.encoder", lambda: _network(man, model["encoder"]))
    decoder = _collect(violations, "model.decoder", lambda: _network(man, model["decoder"]))
    latent = _collect(violations, "model.latent", lambda: _latent(model["latent"]))
    train = _collect(violations, "train", lambda: _train(resolved["train"], resolved["data"]["noise_sigma"]))
    data = _collect(violations, "data", lambda: _data(resolved["data"]))
    output = _collect(violations, "output", lambda: _output(resolved["output"]))
    if man is not None:
        _cross_checks(man, latent, data, violations)
    if violations:
        for violation in violations:
            logger.error(f"Config violation: {violation}")
        raise ConfigError(violations)
    return RunConfig(man, encoder, decoder, latent, train, data, output, resolved)


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    """Parse and validate TOML text."""
    try:
        raw = toml.loads(text)
    except toml.TomlDecodeError as e:
        raise ConfigError([f"TOML syntax: {str(e)}"]) from e
    resolved, violations = resolve_config(raw, base_dir)
    return build_run_config(resolved, violations)


def load_config(path: str) -> RunConfig:
    """
    Load a run configuration file.

    Args:
        path (str): TOML file

    Returns:
        RunConfig: Validated configuration
    """
    logger.info(f"Loading config from {path}")
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def config_hash(resolved: Dict[str, Any]) -> str:
    """SHA-256 of the resolved document, ignoring where the run writes its output."""
    hashed = copy.deepcopy(resolved)
    hashed.get("output", {}).pop("directory", None)
    return hashlib.sha256(toml.dumps(hashed).encode("utf-8")).hexdigest()


def write_resolved_config(config: RunConfig, directory: Optional[str] = None) -> str:
    """
    Echo the resolved configuration and its hash into the output directory.

    Returns:
        str: The SHA-256 hex digest of the echoed document
    """
    directory = directory or config.output.directory
    digest = config.config_hash
    atomic_write_text(os.path.join(directory, RESOLVED_CONFIG_NAME), toml.dumps(config.resolved))
    atomic_write_text(os.path.join(directory, CONFIG_HASH_NAME), digest + "\n")
    logger.info(f"Wrote resolved config to {directory} (sha256 {digest[:12]})")
    return digest

"""
`checkpoint.py`:

This module contains saving and loading of trained flows.

Layout: the 4-byte magic b"MFFF", a little-endian uint32 format version, a
little-endian uint32 header length, the UTF-8 JSON header (sorted keys), then
the encoder and decoder parameter vectors as little-endian float64.
Serialization is deterministic, so save → load → save is byte-identical.
"""

import json
import struct
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from src.distributions import LatentSpec
from src.exceptions import FlowError
from src.flow import FlowModel, LossWeights
from src.geometry import ManifoldDescriptor
from src.log_config import logger
from src.nnet import NetworkParams, NetworkSpec
from src.utils import atomic_write_bytes

MAGIC = b"MFFF"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sII")


class CheckpointError(FlowError, ValueError):
    """Checkpoint bytes are malformed or of an unknown version."""


@dataclass
class Checkpoint:
    model: FlowModel
    loss_weights: LossWeights = field(default_factory=LossWeights)
    seed: Optional[int] = None
    extra: Dict[str, Any] = field(default_factory=dict)


def checkpoint_bytes(model: FlowModel, loss_weights: Optional[LossWeights] = None, seed: Optional[int] = None,
                     extra: Optional[Dict[str, Any]] = None) -> bytes:
    """
    Serialize a model and its training metadata.

    Args:
        model (FlowModel): Model to store
        loss_weights (LossWeights): Loss weights used for training
        seed (int): Run seed
        extra (Dict[str, Any]): Additional JSON-serializable fields, e.g. the config hash

    Returns:
        bytes: Checkpoint contents
    """
    header = {
        "manifold": model.manifold.to_dict(),
        "encoder": model.encoder.spec.to_dict(),
        "decoder": model.decoder.spec.to_dict(),
        "latent": model.latent.to_dict(),
        "loss_weights": (loss_weights or LossWeights()).to_dict(),
        "seed": seed,
        "extra": extra or {},
    }
    encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = (model.encoder.flat.astype("<f8").tobytes()
               + model.decoder.flat.astype("<f8").tobytes())
    return _PREFIX.pack(MAGIC, FORMAT_VERSION, len(encoded)) + encoded + payload


def parse_checkpoint(raw: bytes) -> Checkpoint:
    """Inverse of `checkpoint_bytes`."""
    if len(raw) < _PREFIX.size:
        raise CheckpointError("Checkpoint is truncated")
    magic, version, header_len = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"Not a flow checkpoint (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {version}")
    start = _PREFIX.size
    try:
        header = json.loads(raw[start:start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"Corrupt checkpoint header: {str(e)}") from e
    manifold = ManifoldDescriptor.from_dict(header["manifold"])
    encoder_spec = NetworkSpec.from_dict(header["encoder"])
    decoder_spec = NetworkSpec.from_dict(header["decoder"])
    values = np.frombuffer(raw, dtype="<f8", offset=start + header_len)
    expected = encoder_spec.parameter_count + decoder_spec.parameter_count
    if values.size != expected:
        raise CheckpointError(f"Checkpoint holds {values.size} parameters, expected {expected}")
    encoder = NetworkParams(encoder_spec, values[:encoder_spec.parameter_count].astype(np.float64))
    decoder = NetworkParams(decoder_spec, values[encoder_spec.parameter_count:].astype(np.float64))
    model = FlowModel(manifold, encoder, decoder, LatentSpec.from_dict(header["latent"]))
    return Checkpoint(model, LossWeights.from_dict(header["loss_weights"]), header.get("seed"),
                      header.get("extra", {}))


def save_checkpoint(path: str, model: FlowModel, loss_weights: Optional[LossWeights] = None,
                    seed: Optional[int] = None, extra: Optional[Dict[str, Any]] = None) -> None:
    atomic_write_bytes(path, checkpoint_bytes(model, loss_weights, seed, extra))
    logger.info(f"Saved checkpoint to {path}")


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as handle:
        raw = handle.read()
    logger.info(f"Loaded checkpoint from {path}")
    return parse_checkpoint(raw)

"""
`trainer.py`:

This module contains the optimization loop for manifold flows: Adam with
decoupled weight decay and global-norm gradient clipping, exponential and
one-cycle learning-rate schedules, data-noise augmentation with
reprojection, validation tracking and best-checkpoint retention.
"""

import math
import time
import traceback
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src import checkpoint, evalsuite, flow, geometry
from src.exceptions import NonFiniteGradient, NonFiniteLoss
from src.flow import FlowModel, LossReport, LossWeights
from src.geometry import ManifoldDescriptor
from src.log_config import logger
from src.utils import log_memory_usage

# (batch_size, rng) -> batch for generator-backed datasets
DataStream = Callable[[int, np.random.Generator], np.ndarray]

METRIC_COLUMNS = ["step", "lr"] + list(LossReport().as_dict()) + ["val_nll", "val_recon"]


class ScheduleKind(Enum):
    EXPONENTIAL = "exponential"
    ONE_CYCLE = "one_cycle"


@dataclass(frozen=True)
class Schedule:
    """
    Learning-rate schedule.

    One-cycle rises linearly from the base rate to `peak_multiplier`·base over
    the first `peak_fraction` of training, then follows a cosine down to
    base/`final_divisor` at the last step.
    """
    kind: ScheduleKind = ScheduleKind.EXPONENTIAL
    gamma: float = 1.0
    peak_fraction: float = 0.3
    peak_multiplier: float = 10.0
    final_divisor: float = 25.0

    def __post_init__(self):
        if not isinstance(self.kind, ScheduleKind):
            object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not 0.0 < self.peak_fraction < 1.0:
            raise ValueError(f"peak_fraction must lie in (0, 1), got {self.peak_fraction}")
        if self.peak_multiplier < 1.0 or self.final_divisor <= 0.0:
            raise ValueError("peak_multiplier must be at least 1 and final_divisor positive")

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    step_count: int = 1000
    learning_rate: float = 1e-3
    schedule: Schedule = field(default_factory=Schedule)
    grad_clip_norm: float = 0.0
    weight_decay: float = 0.0
    data_noise_sigma: float = 0.0
    seed: int = 0
    validation_every: int = 500
    loss_weights: LossWeights = field(default_factory=LossWeights)
    uniform_count: Optional[int] = None

    def __post_init__(self):
        if self.batch_size < 1 or self.validation_every < 1:
            raise ValueError("batch_size and validation_every must be positive")
        if self.step_count < 0:
            raise ValueError(f"step_count must be nonnegative, got {self.step_count}")
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0.0):
            raise ValueError(f"learning_rate must be finite and positive, got {self.learning_rate}")
        for name in ("grad_clip_norm", "weight_decay", "data_noise_sigma"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0.0:
                raise ValueError(f"{name} must be finite and nonnegative, got {value}")
        if self.uniform_count is not None and self.uniform_count < 1:
            raise ValueError(f"uniform_count must be positive, got {self.uniform_count}")


@dataclass
class AdamState:
    """First and second moment estimates, one vector per parameter group."""
    first: List[np.ndarray]
    second: List[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, sizes: Sequence[int]) -> "AdamState":
        return cls([np.zeros(size) for size in sizes], [np.zeros(size) for size in sizes])


def clip_gradients(grads: Sequence[np.ndarray], clip_norm: float) -> Tuple[List[np.ndarray], float]:
    """
    Rescale gradients so their joint L2 norm is at most `clip_norm` (0 disables).

    Returns:
        Tuple of (clipped gradients, norm before clipping)
    """
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if clip_norm > 0.0 and norm > clip_norm:
        return [g * (clip_norm / norm) for g in grads], norm
    return [np.array(g, dtype=np.float64) for g in grads], norm


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray], lr: float,
              weight_decay: float = 0.0, clip_norm: float = 0.0) -> Tuple[List[np.ndarray], AdamState]:
    """
    One Adam update with decoupled weight decay.

    Args:
        state (AdamState): Moment estimates aligned with params
        params (Sequence[np.ndarray]): Flat parameter vectors
        grads (Sequence[np.ndarray]): Gradients aligned with params
        lr (float): Learning rate
        weight_decay (float): Decoupled decay coefficient
        clip_norm (float): Global gradient norm limit, 0 disables clipping

    Returns:
        Tuple of (updated parameter vectors, updated state)
    """
    if len(params) != len(grads) or len(params) != len(state.first):
        raise ValueError("params, grads and optimizer state must have the same number of groups")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"Gradient has {int(np.sum(~np.isfinite(g)))} non-finite entries")
    clipped, _ = clip_gradients(grads, clip_norm)
    t = state.step + 1
    first, second, updated = [], [], []
    for p, g, m, v in zip(params, clipped, state.first, state.second):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        updated.append(p - lr * weight_decay * p - lr * m_hat / (np.sqrt(v_hat) + state.eps))
        first.append(m)
        second.append(v)
    return updated, AdamState(first, second, t, state.beta1, state.beta2, state.eps)


def lr_at(schedule: Schedule, step: int, total_steps: int, base_lr: float) -> float:
    """
    Learning rate at a step.

    Args:
        schedule (Schedule): Schedule definition
        step (int): Current step, 0 ≤ step < total_steps
        total_steps (int): Number of training steps
        base_lr (float): Base learning rate

    Returns:
        float: Learning rate
    """
    if schedule.kind is ScheduleKind.EXPONENTIAL:
        return base_lr * schedule.gamma ** step
    peak = schedule.peak_multiplier * base_lr
    final = base_lr / schedule.final_divisor
    warmup = schedule.peak_fraction * total_steps
    if step <= warmup:
        return base_lr + (peak - base_lr) * step / warmup
    progress = min((step - warmup) / max(total_steps - 1 - warmup, 1e-12), 1.0)
    return final + (peak - final) * 0.5 * (1.0 + math.cos(math.pi * progress))


def augment_batch(man: ManifoldDescriptor, batch: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add N(0, σ²I) ambient noise and project back onto the manifold."""
    if sigma < 0.0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0.0:
        return batch
    return geometry.project(man, batch + sigma * rng.standard_normal(batch.shape))


class Trainer:
    def __init__(self, model: FlowModel, dataset: Union[np.ndarray, DataStream], config: TrainConfig,
                 validation: Optional[np.ndarray] = None, checkpoint_path: Optional[str] = None,
                 checkpoint_header: Optional[Dict[str, Any]] = None):
        """
        Initialize the Trainer.

        Args:
            model (FlowModel): Model to train; the caller's copy is left untouched
            dataset: On-manifold training points (N, m) or a DataStream
            config (TrainConfig): Optimization settings
            validation (np.ndarray): Optional validation points
            checkpoint_path (str): Where to keep the best checkpoint
            checkpoint_header (Dict[str, Any]): Extra fields stored with the checkpoint
        """
        self.model = model.copy()
        self.config = config
        self.validation = validation
        self.checkpoint_path = checkpoint_path
        self.checkpoint_header = checkpoint_header or {}
        self.rng = np.random.default_rng(config.seed)
        man = model.manifold
        if callable(dataset):
            self.stream: Optional[DataStream] = dataset
            self.data = None
        else:
            self.stream = None
            self.data = geometry.check_on_manifold(man, np.atleast_2d(dataset))
            if len(self.data) == 0:
                raise ValueError("Training dataset is empty")
        self._order = np.empty(0, dtype=int)
        self._cursor = 0
        sizes = [len(self.model.encoder)]
        if config.loss_weights.trains_decoder:
            sizes.append(len(self.model.decoder))
        self.state = AdamState.zeros(sizes)
        self.best_model = self.model.copy()
        self.best_nll = math.inf

    def next_batch(self) -> np.ndarray:
        size = self.config.batch_size
        if self.stream is not None:
            return np.asarray(self.stream(size, self.rng), dtype=np.float64)
        if len(self.data) <= size:
            return self.data[self.rng.permutation(len(self.data))]
        if self._cursor + size > len(self._order):
            self._order = self.rng.permutation(len(self.data))
            self._cursor = 0
        picked = self._order[self._cursor:self._cursor + size]
        self._cursor += size
        return self.data[picked]

    def step(self, step: int) -> Tuple[LossReport, float]:
        config = self.config
        batch = augment_batch(self.model.manifold, self.next_batch(), config.data_noise_sigma, self.rng)
        lr = lr_at(config.schedule, step, config.step_count, config.learning_rate)
        report, grads = flow.total_loss_and_grads(self.model, batch, config.loss_weights, self.rng,
                                                  config.uniform_count)
        if not math.isfinite(report.total):
            raise NonFiniteLoss(f"Loss became {report.total} at step {step}", step=step)
        params = [self.model.encoder.flat]
        group_grads = [grads.encoder]
        if config.loss_weights.trains_decoder:
            params.append(self.model.decoder.flat)
            group_grads.append(grads.decoder)
        updated, self.state = adam_step(self.state, params, group_grads, lr, config.weight_decay,
                                        config.grad_clip_norm)
        self.model.encoder.assign(updated[0])
        if config.loss_weights.trains_decoder:
            self.model.decoder.assign(updated[1])
        return report, lr

    def validate(self, step: int) -> Tuple[float, float]:
        if self.validation is None:
            return math.nan, math.nan
        result = evalsuite.test_nll(self.model, self.validation)
        val_recon, _ = flow.reconstruction_losses(self.model, self.validation)
        logger.info(f"Validation at step {step}: nll {result.mean_nll:.5f}, recon {val_recon:.3e}"
                    + (f", {result.excluded} point(s) excluded" if result.excluded else ""))
        if result.mean_nll < self.best_nll:
            self.best_nll = result.mean_nll
            self.best_model = self.model.copy()
            self.save_best()
        return result.mean_nll, val_recon

    def _params_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.model.encoder.flat)) and np.all(np.isfinite(self.model.decoder.flat)))

    def save_best(self):
        if self.checkpoint_path:
            checkpoint.save_checkpoint(self.checkpoint_path, self.best_model, self.config.loss_weights,
                                       seed=self.config.seed, extra=self.checkpoint_header)

    def run(self) -> Tuple[FlowModel, pd.DataFrame]:
        """
        Run all configured steps.

        Returns:
            Tuple of (best model by validation NLL, or the final model without
            validation data; metrics frame with one row per validation interval)
        """
        config = self.config
        logger.info(f"Starting training: {config.step_count} steps, batch {config.batch_size}, "
                    f"lr {config.learning_rate}, schedule {config.schedule.kind.value}")
        log_memory_usage()
        start_time = time.time()
        rows: List[Dict[str, float]] = []
        window: List[Dict[str, float]] = []
        for step in range(config.step_count):
            try:
                report, lr = self.step(step)
            except (NonFiniteLoss, NonFiniteGradient) as e:
                logger.error(f"Training aborted at step {step}: {str(e)}")
                logger.error(traceback.format_exc())
                # The failing step raises before assigning, so the live model is the last finite one.
                if self.validation is None and self._params_finite():
                    self.best_model = self.model.copy()
                self.save_best()
                raise
            window.append(report.as_dict())
            last = step == config.step_count - 1
            if (step + 1) % config.validation_every == 0 or last:
                row: Dict[str, float] = {"step": step + 1, "lr": lr}
                row.update(pd.DataFrame(window).mean().to_dict())
                row["val_nll"], row["val_recon"] = self.validate(step + 1)
                logger.debug(f"Step {step + 1}: total {row['total']:.5f}, nll {row['nll_surrogate']:.5f}")
                rows.append(row)
                window = []
        if self.validation is None:
            self.best_model = self.model.copy()
            self.save_best()
        elif config.step_count == 0:
            self.save_best()
        logger.info(f"Training finished in {time.time() - start_time:.2f} seconds")
        log_memory_usage()
        return self.best_model, pd.DataFrame(rows, columns=METRIC_COLUMNS)


def train(model: FlowModel, dataset: Union[np.ndarray, DataStream], config: TrainConfig,
          validation: Optional[np.ndarray] = None, checkpoint_path: Optional[str] = None,
          checkpoint_header: Optional[Dict[str, Any]] = None) -> Tuple[FlowModel, pd.DataFrame]:
    """
    Train a flow and return the retained model with its metrics log.

    Args:
        model (FlowModel): Initial model
        dataset: On-manifold training points (N, m) or a DataStream
        config (TrainConfig): Optimization settings
        validation (np.ndarray): Optional validation points for NLL tracking
        checkpoint_path (str): Optional path of the best checkpoint
        checkpoint_header (Dict[str, Any]): Extra fields stored with the checkpoint

    Returns:
        Tuple[FlowModel, pd.DataFrame]: Trained model and metrics
    """
    return Trainer(model, dataset, config, validation, checkpoint_path, checkpoint_header).run()

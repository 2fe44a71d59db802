"""Adam and the mini-batch training loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ConfigError, ShapeError, Tensor
from .losses import hybrid_loss
from .model import ModelConfig, Params, forward

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 10
    batch_size: int = 32
    alpha: float = 0.35
    seed: int = 0
    shuffle: bool = True
    max_steps: int | None = None  # stop after this many optimizer steps; epochs then acts as an upper bound

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError(f"max_steps must be >= 1, got {self.max_steps}")


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Bias-corrected Adam update, in place on ``params`` and ``state``."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for k, p in params.items():
        g = grads[k]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {k} has shape {g.shape}, parameter has {p.shape}")
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m, v = state.m[k], state.v[k]
        if m.shape != p.shape:
            raise ShapeError(f"moment buffer for {k} has shape {m.shape}, parameter has {p.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def loss_and_grads(
    params: Params, config: ModelConfig, inputs: np.ndarray, targets: np.ndarray, alpha: float
) -> tuple[float, dict[str, np.ndarray]]:
    for p in params.values():
        p.zero_grad()
    with ad.Tape() as tape:
        loss = hybrid_loss(forward(inputs, config, params), targets, alpha)
    ad.backward(tape, loss)
    grads = {k: (p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in params.items()}
    return loss.item(), grads


def evaluate_loss(
    params: Params, config: ModelConfig, inputs: np.ndarray, targets: np.ndarray, alpha: float, batch_size: int = 256
) -> float:
    """Sample-weighted mean hybrid loss without recording a tape."""
    total, n = 0.0, len(inputs)
    for start in range(0, n, batch_size):
        xb, yb = inputs[start : start + batch_size], targets[start : start + batch_size]
        total += hybrid_loss(forward(xb, config, params), yb, alpha).item() * len(xb)
    return total / n


def predict(params: Params, config: ModelConfig, inputs: np.ndarray, batch_size: int = 256) -> np.ndarray:
    outs = [forward(inputs[s : s + batch_size], config, params).data for s in range(0, len(inputs), batch_size)]
    return np.concatenate(outs, axis=0)


@dataclass
class TrainResult:
    log: list[dict]
    best_params: Params
    best_epoch: int
    steps: int

    def write_log(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["epoch", "train_loss", "val_loss"])
            w.writeheader()
            for row in self.log:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def _stack(samples: Sequence[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([s[0] for s in samples]), np.stack([s[1] for s in samples])


def train(
    config: ModelConfig,
    params: Params,
    train_samples: Sequence[tuple[np.ndarray, np.ndarray]],
    train_config: TrainConfig,
    val_samples: Sequence[tuple[np.ndarray, np.ndarray]] | None = None,
) -> TrainResult:
    """Mini-batch Adam on the hybrid loss.

    ``params`` is updated in place. The returned ``best_params`` is a copy
    taken at the epoch with the lowest validation loss (training loss when
    no validation set is given). Epoch train loss is the sample-weighted
    mean of the batch losses seen during that epoch.
    """
    if len(train_samples) == 0:
        raise ConfigError("training set is empty")
    xs, ys = _stack(train_samples)
    val = _stack(val_samples) if val_samples else None
    rng = np.random.default_rng(train_config.seed)
    state = AdamState()
    arrays = {k: p.data for k, p in params.items()}
    tc = train_config
    log: list[dict] = []
    best = (np.inf, -1, None)
    steps = 0
    for epoch in range(tc.epochs):
        order = rng.permutation(len(xs)) if tc.shuffle else np.arange(len(xs))
        running = 0.0
        seen = 0
        for start in range(0, len(xs), tc.batch_size):
            if tc.max_steps is not None and steps >= tc.max_steps:
                break
            idx = order[start : start + tc.batch_size]
            loss, grads = loss_and_grads(params, config, xs[idx], ys[idx], tc.alpha)
            adam_step(arrays, grads, state, tc.learning_rate, tc.adam_beta1, tc.adam_beta2, tc.adam_eps)
            running += loss * len(idx)
            seen += len(idx)
            steps += 1
        if seen == 0:
            break
        train_loss = running / seen
        val_loss = evaluate_loss(params, config, *val, tc.alpha) if val is not None else float("nan")
        log.append({"epoch": epoch + 1, "train_loss": train_loss, "val_loss": val_loss})
        score = val_loss if val is not None else train_loss
        if score < best[0]:
            best = (score, epoch + 1, {k: v.copy() for k, v in arrays.items()})
        logger.debug("epoch %d train %.6g val %.6g", epoch + 1, train_loss, val_loss)
    best_params = {k: Tensor(v, requires_grad=True, name=k) for k, v in best[2].items()}
    return TrainResult(log=log, best_params=best_params, best_epoch=best[1], steps=steps)

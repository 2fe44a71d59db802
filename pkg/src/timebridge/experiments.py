"""Small end-to-end experiments shared by the scripts and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .data import SplitSpec, chronological_split, stack_windows, standardize, windows
from .losses import hybrid_loss
from .metrics import forecast_metrics
from .model import ModelConfig, forward, init_params
from .synthetic import gen_cointegrated_channels, gen_trend_sinusoid
from .training import AdamState, TrainConfig, adam_step, loss_and_grads, predict, train


@dataclass
class AblationSetup:
    T: int = 1200
    channels: int = 8
    noise_sigma: float = 1.0
    ar: float = 0.8
    data_seed: int = 7
    split: SplitSpec = field(default_factory=lambda: SplitSpec(0.7, 0.15, 0.15))
    model: ModelConfig = field(
        default_factory=lambda: ModelConfig(
            input_len=48,
            output_len=12,
            channels=8,
            patch_len=8,
            downsampled_patches=3,
            hidden_dim=16,
            ff_dim=32,
            n_integrated_layers=1,
            n_cointegrated_layers=1,
            n_heads=2,
        )
    )
    train: TrainConfig = field(
        default_factory=lambda: TrainConfig(learning_rate=1e-3, batch_size=32, epochs=10_000, max_steps=2000)
    )


def ablation_data(setup: AblationSetup):
    frame = gen_cointegrated_channels(setup.T, setup.channels, setup.data_seed, setup.noise_sigma, setup.ar)
    (tr, va, _), _ = standardize(*chronological_split(frame, setup.split))
    I, O = setup.model.input_len, setup.model.output_len
    return windows(tr, I, O), windows(va, I, O)


def ablation_run(setup: AblationSetup, integrated_norm: bool, cointegrated_norm: bool, seed: int, data=None) -> float:
    """Validation MSE (standardized units) of the final weights after ``max_steps`` Adam steps."""
    train_w, val_w = data if data is not None else ablation_data(setup)
    cfg = replace(setup.model, integrated_norm_enabled=integrated_norm, cointegrated_norm_enabled=cointegrated_norm)
    params = init_params(cfg, seed)
    train(cfg, params, train_w, replace(setup.train, seed=seed))
    xv, yv = stack_windows(val_w)
    return forecast_metrics(predict(params, cfg, xv), yv).mse


def ablation_table(setup: AblationSetup, seeds=(0, 1, 2)) -> dict:
    data = ablation_data(setup)
    default = [ablation_run(setup, True, False, s, data) for s in seeds]
    inverted = [ablation_run(setup, False, True, s, data) for s in seeds]
    return {
        "seeds": list(seeds),
        "default_val_mse": default,
        "inverted_val_mse": inverted,
        "default_mean": float(np.mean(default)),
        "inverted_mean": float(np.mean(inverted)),
    }


def overfit_fixture(n_samples: int = 8, seed: int = 0):
    """Eight trend-plus-sinusoid windows on a two-channel toy model."""
    cfg = ModelConfig(
        input_len=24,
        output_len=8,
        channels=2,
        patch_len=6,
        downsampled_patches=2,
        hidden_dim=16,
        ff_dim=32,
        n_integrated_layers=1,
        n_cointegrated_layers=1,
        n_heads=2,
    )
    frame = gen_trend_sinusoid(cfg.input_len + cfg.output_len + n_samples - 1, cfg.channels, seed)
    (scaled,), _ = standardize(frame)
    xs, ys = stack_windows(windows(scaled, cfg.input_len, cfg.output_len))
    return cfg, xs[:n_samples], ys[:n_samples]


def overfit_run(steps: int = 2000, lr: float = 1e-3, alpha: float = 0.35, seed: int = 0) -> dict:
    """Full-batch Adam on the overfit fixture; returns the loss trace endpoints."""
    cfg, xs, ys = overfit_fixture(seed=seed)
    params = init_params(cfg, seed)
    arrays = {k: p.data for k, p in params.items()}
    initial = hybrid_loss(forward(xs, cfg, params), ys, alpha).item()
    state = AdamState()
    losses = []
    for _ in range(steps):
        loss, grads = loss_and_grads(params, cfg, xs, ys, alpha)
        losses.append(loss)
        adam_step(arrays, grads, state, lr)
    final = hybrid_loss(forward(xs, cfg, params), ys, alpha).item()
    return {"initial": initial, "final": final, "ratio": final / initial, "trace": losses}

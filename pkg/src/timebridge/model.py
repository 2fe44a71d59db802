"""TimeBridge forward pass on the tape engine.

Tokens are carried as ``[B, C, n_tokens, D]`` tensors throughout; a single
unbatched series ``[C, I]`` is promoted to ``B = 1`` and squeezed on return.

Pipeline (default order)::

    patchify -> embed (raw and detrended patches, shared weights)
    -> Integrated blocks  (Q/K from detrended tokens, V from raw tokens)
    -> patch downsample   (N -> M via a patch-axis map, then attention)
    -> Cointegrated blocks (attention across channels per patch position)
    -> flatten [M*D] per channel -> linear head -> [C, O]
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Literal

import numpy as np

from . import autodiff as ad
from .autodiff import ConfigError, ShapeError, Tensor

ChannelMode = Literal["CI", "CD"]
BlockOrder = Literal["integrated_first", "cointegrated_first"]


def default_kernel(patch_len: int) -> int:
    """25 when the patch allows it, otherwise the largest odd value <= patch_len."""
    if patch_len >= 25:
        return 25
    return patch_len if patch_len % 2 == 1 else patch_len - 1


@dataclass
class ModelConfig:
    input_len: int = 96
    output_len: int = 24
    channels: int = 1
    patch_len: int = 8
    downsampled_patches: int = 4
    hidden_dim: int = 64
    ff_dim: int = 128
    n_integrated_layers: int = 1
    n_cointegrated_layers: int = 1
    n_heads: int = 8
    detrend_kernel: int | None = None
    integrated_norm_enabled: bool = True
    cointegrated_norm_enabled: bool = False
    integrated_mode: ChannelMode = "CI"
    cointegrated_mode: ChannelMode = "CD"
    block_order: BlockOrder = "integrated_first"
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.detrend_kernel is None:
            self.detrend_kernel = default_kernel(self.patch_len)
        self.validate()

    @property
    def num_patches(self) -> int:
        return self.input_len // self.patch_len

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.n_heads

    @property
    def coarse_patches(self) -> int:
        """Token count seen by the output head."""
        return self.downsampled_patches if self.block_order == "integrated_first" else self.num_patches

    def validate(self) -> None:
        for name in ("input_len", "output_len", "channels", "patch_len", "hidden_dim", "ff_dim", "n_heads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.input_len < self.patch_len:
            raise ConfigError(f"input_len {self.input_len} is shorter than patch_len {self.patch_len}")
        n = self.num_patches
        if not 1 <= self.downsampled_patches <= n:
            raise ConfigError(f"downsampled_patches must lie in [1, {n}], got {self.downsampled_patches}")
        if self.hidden_dim % self.n_heads:
            raise ConfigError(f"hidden_dim {self.hidden_dim} is not divisible by n_heads {self.n_heads}")
        k = self.detrend_kernel
        if k < 1 or k % 2 == 0 or k > self.patch_len:
            raise ConfigError(f"detrend_kernel must be odd and <= patch_len {self.patch_len}, got {k}")
        if self.n_integrated_layers < 0 or self.n_cointegrated_layers < 0:
            raise ConfigError("layer counts must be non-negative")
        if self.n_integrated_layers == 0 and self.n_cointegrated_layers == 0:
            raise ConfigError("at least one Integrated or Cointegrated layer is required")
        for name in ("integrated_mode", "cointegrated_mode"):
            if getattr(self, name) not in ("CI", "CD"):
                raise ConfigError(f"{name} must be 'CI' or 'CD', got {getattr(self, name)!r}")
        if self.block_order not in ("integrated_first", "cointegrated_first"):
            raise ConfigError(f"unknown block_order {self.block_order!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


# ----------------------------------------------------------------------------
# parameters
# ----------------------------------------------------------------------------


Params = dict[str, Tensor]


def _uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _linear(params: Params, prefix: str, rng, d_in: int, d_out: int, bias: bool = True) -> None:
    params[f"{prefix}.weight"] = Tensor(_uniform(rng, d_in, (d_in, d_out)), requires_grad=True)
    if bias:
        params[f"{prefix}.bias"] = Tensor(_uniform(rng, d_in, (d_out,)), requires_grad=True)


def _layer_norm_params(params: Params, prefix: str, d: int) -> None:
    params[f"{prefix}.gain"] = Tensor(np.ones(d), requires_grad=True)
    params[f"{prefix}.bias"] = Tensor(np.zeros(d), requires_grad=True)


def _attention_params(params: Params, prefix: str, rng, d: int) -> None:
    # no key bias: it shifts every logit in a row equally and never receives gradient
    _linear(params, f"{prefix}.q", rng, d, d)
    _linear(params, f"{prefix}.k", rng, d, d, bias=False)
    _linear(params, f"{prefix}.v", rng, d, d)
    _linear(params, f"{prefix}.o", rng, d, d)


def _block_params(params: Params, prefix: str, rng, d: int, ff: int) -> None:
    _attention_params(params, f"{prefix}.attn", rng, d)
    _layer_norm_params(params, f"{prefix}.ln1", d)
    _linear(params, f"{prefix}.ff1", rng, d, ff)
    _linear(params, f"{prefix}.ff2", rng, ff, d)
    _layer_norm_params(params, f"{prefix}.ln2", d)


def init_params(config: ModelConfig, seed: int = 0) -> Params:
    """Seeded parameter initialisation (uniform +-1/sqrt(fan_in), unit LayerNorm)."""
    rng = np.random.default_rng(seed)
    d, n, m = config.hidden_dim, config.num_patches, config.downsampled_patches
    p: Params = {}
    _linear(p, "embed", rng, config.patch_len, d)
    for i in range(config.n_integrated_layers):
        _block_params(p, f"integrated.{i}", rng, d, config.ff_dim)
    n_in, n_out = (n, m) if config.block_order == "integrated_first" else (n, n)
    _linear(p, "resample.map", rng, n_in, n_out)
    _attention_params(p, "resample.attn", rng, d)
    for i in range(config.n_cointegrated_layers):
        _block_params(p, f"cointegrated.{i}", rng, d, config.ff_dim)
    _linear(p, "head", rng, config.coarse_patches * d, config.output_len)
    for name, t in p.items():
        t.name = name
    return p


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    return {k: v.shape for k, v in init_params(config, 0).items()}


# ----------------------------------------------------------------------------
# building blocks
# ----------------------------------------------------------------------------


def patchify(series, patch_len: int) -> Tensor:
    """Split the last axis into ``floor(I / S)`` non-overlapping patches.

    ``[..., I] -> [..., N, S]``; the trailing ``I mod S`` points are dropped.
    """
    x = series if isinstance(series, Tensor) else Tensor(series)
    length = x.shape[-1]
    if length < patch_len:
        raise ConfigError(f"series length {length} is shorter than patch_len {patch_len}")
    n = length // patch_len
    arr = x.data[..., : n * patch_len].reshape(*x.shape[:-1], n, patch_len)
    if not x.requires_grad:
        return Tensor(arr)
    # differentiable view: slice via a selection matrix
    sel = np.eye(length)[:, : n * patch_len]
    cut = ad.matmul(x, Tensor(sel))
    return ad.reshape(cut, (*x.shape[:-1], n, patch_len))


def detrend_patch(raw_patch, kernel: int) -> Tensor:
    """``p - moving_average(p)`` over the last axis."""
    p = raw_patch if isinstance(raw_patch, Tensor) else Tensor(raw_patch)
    return ad.sub(p, ad.avg_pool_1d(p, kernel))


def linear(x: Tensor, params: Params, prefix: str) -> Tensor:
    y = ad.matmul(x, params[f"{prefix}.weight"])
    b = params.get(f"{prefix}.bias")
    return ad.add(y, b) if b is not None else y


def embed(raw_patches, params: Params) -> Tensor:
    """Shared linear map S -> D applied to every patch."""
    x = raw_patches if isinstance(raw_patches, Tensor) else Tensor(raw_patches)
    return linear(x, params, "embed")


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    g, length, d = x.shape
    return ad.transpose(ad.reshape(x, (g, length, n_heads, d // n_heads)), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    g, h, length, dh = x.shape
    return ad.reshape(ad.transpose(x, (0, 2, 1, 3)), (g, length, h * dh))


def multi_head_attention(
    query_in: Tensor,
    key_in: Tensor,
    value_in: Tensor,
    params: Params,
    prefix: str,
    n_heads: int,
    attn_log: list | None = None,
) -> Tensor:
    """Scaled dot-product attention over groups ``[G, L, D]``.

    Queries, keys and values are projected separately; the scale is
    ``1/sqrt(D / n_heads)``. ``attn_log`` collects the ``[G, H, Lq, Lk]``
    weight arrays.
    """
    q = _split_heads(linear(query_in, params, f"{prefix}.q"), n_heads)
    k = _split_heads(linear(key_in, params, f"{prefix}.k"), n_heads)
    v = _split_heads(linear(value_in, params, f"{prefix}.v"), n_heads)
    dh = q.shape[-1]
    logits = ad.scale(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
    weights = ad.softmax(logits, axis=-1)
    if attn_log is not None:
        attn_log.append(weights.data)
    return linear(_merge_heads(ad.matmul(weights, v)), params, f"{prefix}.o")


def _mlp(x: Tensor, params: Params, prefix: str) -> Tensor:
    return linear(ad.gelu(linear(x, params, f"{prefix}.ff1")), params, f"{prefix}.ff2")


def _ln(x: Tensor, params: Params, prefix: str, eps: float) -> Tensor:
    return ad.layer_norm(x, params[f"{prefix}.gain"], params[f"{prefix}.bias"], eps)


def attention_block(
    tokens: Tensor,
    qk_tokens: Tensor,
    params: Params,
    prefix: str,
    n_heads: int,
    ln_eps: float = 1e-5,
    attn_log: list | None = None,
) -> Tensor:
    """Post-norm transformer block on ``[G, L, D]`` with a separate Q/K input.

    ``out = LN(h + MLP(h))`` where ``h = LN(tokens + Attn(Q=qk, K=qk, V=tokens))``.
    """
    a = multi_head_attention(qk_tokens, qk_tokens, tokens, params, f"{prefix}.attn", n_heads, attn_log)
    h = _ln(ad.add(tokens, a), params, f"{prefix}.ln1", ln_eps)
    return _ln(ad.add(h, _mlp(h, params, prefix)), params, f"{prefix}.ln2", ln_eps)


def _group(x: Tensor, mode: ChannelMode, axis: str) -> tuple[Tensor, tuple]:
    """Fold ``[B, C, L, D]`` into attention groups ``[G, L', D]``.

    ``axis='time'`` attends over the token axis (per channel in CI mode,
    over all C*L tokens in CD mode). ``axis='channel'`` attends across
    channels per token position in CD mode, and degenerates to per-channel
    time attention in CI mode.
    """
    b, c, length, d = x.shape
    if axis == "time" and mode == "CI" or axis == "channel" and mode == "CI":
        return ad.reshape(x, (b * c, length, d)), ("flat", b, c, length, d)
    if axis == "time":
        return ad.reshape(x, (b, c * length, d)), ("flat", b, c, length, d)
    t = ad.transpose(x, (0, 2, 1, 3))
    return ad.reshape(t, (b * length, c, d)), ("swap", b, c, length, d)


def _ungroup(x: Tensor, how: tuple) -> Tensor:
    kind, b, c, length, d = how
    if kind == "flat":
        return ad.reshape(x, (b, c, length, d))
    return ad.transpose(ad.reshape(x, (b, length, c, d)), (0, 2, 1, 3))


def integrated_attention_block(
    tokens: Tensor,
    detrended_tokens: Tensor,
    params: Params,
    layer: int,
    config: ModelConfig,
    attn_log: list | None = None,
) -> Tensor:
    """One Integrated layer on ``[B, C, N, D]`` (Q/K from ``detrended_tokens``)."""
    g, how = _group(tokens, config.integrated_mode, "time")
    gq, _ = _group(detrended_tokens, config.integrated_mode, "time")
    out = attention_block(g, gq, params, f"integrated.{layer}", config.n_heads, config.ln_eps, attn_log)
    return _ungroup(out, how)


def _patch_axis_detrend(tokens: Tensor, kernel: int) -> Tensor:
    # moving average along the patch axis, per channel and hidden unit
    b, c, length, d = tokens.shape
    k = min(kernel, length if length % 2 else length - 1)
    t = ad.transpose(tokens, (0, 1, 3, 2))
    return ad.transpose(detrend_patch(t, k), (0, 1, 3, 2))


def cointegrated_attention_block(
    tokens: Tensor,
    params: Params,
    layer: int,
    config: ModelConfig,
    attn_log: list | None = None,
) -> Tensor:
    """One Cointegrated layer on ``[B, C, M, D]``; Q = K = V = tokens unless norm is on."""
    qk = _patch_axis_detrend(tokens, config.detrend_kernel) if config.cointegrated_norm_enabled else tokens
    g, how = _group(tokens, config.cointegrated_mode, "channel")
    gq, _ = _group(qk, config.cointegrated_mode, "channel")
    out = attention_block(g, gq, params, f"cointegrated.{layer}", config.n_heads, config.ln_eps, attn_log)
    return _ungroup(out, how)


def patch_downsample(tokens: Tensor, params: Params, config: ModelConfig, attn_log: list | None = None) -> Tensor:
    """Resample the patch axis ``[B, C, N, D] -> [B, C, M, D]``.

    Queries come from a linear map over the patch axis (shared across hidden
    units); keys and values are the incoming tokens. Attention only, no
    residual or MLP.
    """
    b, c, n, d = tokens.shape
    flat = ad.reshape(tokens, (b * c, n, d))
    along_patches = ad.transpose(flat, (0, 2, 1))  # [G, D, N]
    q = ad.transpose(linear(along_patches, params, "resample.map"), (0, 2, 1))  # [G, M, D]
    out = multi_head_attention(q, flat, flat, params, "resample.attn", config.n_heads, attn_log)
    return ad.reshape(out, (b, c, out.shape[1], d))


def project_output(tokens: Tensor, params: Params) -> Tensor:
    """Flatten ``[B, C, M, D]`` per channel and map to ``[B, C, O]``."""
    b, c, m, d = tokens.shape
    return linear(ad.reshape(tokens, (b, c, m * d)), params, "head")


def _embedded_trend(raw: Tensor, params: Params, kernel: int) -> Tensor:
    # W @ moving_average(p): the part removed from the Q/K branch (bias cancels)
    return ad.matmul(ad.avg_pool_1d(raw, kernel), params["embed.weight"])


def forward(
    series,
    config: ModelConfig,
    params: Params,
    attn_log: list | None = None,
) -> Tensor:
    """Forecast ``[C, O]`` from ``[C, I]`` (or ``[B, C, O]`` from ``[B, C, I]``)."""
    x = series if isinstance(series, Tensor) else Tensor(series)
    squeeze = x.ndim == 2
    if squeeze:
        x = ad.reshape(x, (1, *x.shape))
    if x.ndim != 3 or x.shape[1] != config.channels or x.shape[2] != config.input_len:
        raise ShapeError(
            f"forward expects [C={config.channels}, I={config.input_len}] or a batch of those, got {x.shape}"
        )
    if not np.all(np.isfinite(x.data)):
        raise ValueError("input series contains non-finite values")

    raw = patchify(x, config.patch_len)  # [B, C, N, S]
    tokens = embed(raw, params)
    trend = _embedded_trend(raw, params, config.detrend_kernel) if config.integrated_norm_enabled else None

    def integrated_stack(t: Tensor) -> Tensor:
        for i in range(config.n_integrated_layers):
            qk = ad.sub(t, trend) if trend is not None else t
            t = integrated_attention_block(t, qk, params, i, config, attn_log)
        return t

    def cointegrated_stack(t: Tensor) -> Tensor:
        for i in range(config.n_cointegrated_layers):
            t = cointegrated_attention_block(t, params, i, config, attn_log)
        return t

    if config.block_order == "integrated_first":
        tokens = cointegrated_stack(patch_downsample(integrated_stack(tokens), params, config, attn_log))
    else:
        tokens = integrated_stack(patch_downsample(cointegrated_stack(tokens), params, config, attn_log))
    out = project_output(tokens, params)
    return ad.reshape(out, out.shape[1:]) if squeeze else out


# ----------------------------------------------------------------------------
# checkpoints
# ----------------------------------------------------------------------------

CHECKPOINT_MAGIC = "timebridge-checkpoint 1"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def save_checkpoint(path, config: ModelConfig, params: Params) -> None:
    """Write a plain-text checkpoint.

    Layout::

        timebridge-checkpoint 1
        config <key> = <value>          (one line per ModelConfig field)
        param <name> <d1>x<d2>...       (shape header)
        <row-major values, %.17g, space separated>
    """
    lines = [CHECKPOINT_MAGIC]
    for k, v in config.to_dict().items():
        lines.append(f"config {k} = {_fmt(v)}")
    for name in sorted(params):
        arr = params[name].data
        lines.append(f"param {name} {'x'.join(str(s) for s in arr.shape)}")
        lines.append(" ".join("%.17g" % v for v in arr.reshape(-1)))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_value(raw: str):
    if raw == "None":
        return None
    if raw in ("true", "false"):
        return raw == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def load_checkpoint(path) -> tuple[ModelConfig, Params]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a TimeBridge checkpoint")
    cfg: dict = {}
    params: Params = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        if line.startswith("config "):
            key, _, val = line[len("config "):].partition(" = ")
            cfg[key] = _parse_value(val)
            i += 1
        elif line.startswith("param "):
            _, name, shape_s = line.split()
            shape = tuple(int(s) for s in shape_s.split("x"))
            values = np.array([float(v) for v in lines[i + 1].split()], dtype=np.float64)
            if values.size != int(np.prod(shape)):
                raise ValueError(f"{path}: parameter {name} has {values.size} values for shape {shape}")
            params[name] = Tensor(values.reshape(shape), requires_grad=True, name=name)
            i += 2
        elif not line.strip():
            i += 1
        else:
            raise ValueError(f"{path}:{i + 1}: unrecognised line")
    config = ModelConfig.from_dict(cfg)
    expected = param_shapes(config)
    if set(expected) != set(params):
        raise ValueError(f"{path}: parameter names do not match the config")
    for k, shp in expected.items():
        if params[k].shape != shp:
            raise ValueError(f"{path}: {k} has shape {params[k].shape}, expected {shp}")
    return config, params

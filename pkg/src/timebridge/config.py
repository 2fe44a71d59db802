"""Flat ``key = value`` run configuration.

One setting per line, ``#`` starts a comment. Every key is checked against
:data:`SCHEMA`; unknown keys and unparseable values raise
:class:`RunConfigError` naming the key. Command-line overrides
(``--key value``) go through the same parser.
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

from .model import ModelConfig
from .training import TrainConfig


class RunConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_int(s: str) -> int | None:
    return None if s.strip().lower() in ("", "none", "auto") else int(s)


def _opt_str(s: str) -> str | None:
    s = s.strip()
    return None if s.lower() in ("", "none") else s


def _choice(*options):
    def parse(s: str) -> str:
        s = s.strip()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return parse


# key -> (parser, default)
SCHEMA: dict[str, tuple] = {
    # model
    "input_len": (int, 96),
    "output_len": (int, 24),
    "channels": (_opt_int, None),
    "patch_len": (int, 8),
    "downsampled_patches": (int, 4),
    "hidden_dim": (int, 64),
    "ff_dim": (int, 64),
    "n_integrated_layers": (int, 1),
    "n_cointegrated_layers": (int, 1),
    "n_heads": (int, 8),
    "detrend_kernel": (_opt_int, None),
    "integrated_norm_enabled": (_bool, True),
    "cointegrated_norm_enabled": (_bool, False),
    "integrated_mode": (_choice("CI", "CD"), "CI"),
    "cointegrated_mode": (_choice("CI", "CD"), "CD"),
    "block_order": (_choice("integrated_first", "cointegrated_first"), "integrated_first"),
    # training
    "learning_rate": (float, 1e-3),
    "adam_beta1": (float, 0.9),
    "adam_beta2": (float, 0.999),
    "adam_eps": (float, 1e-8),
    "epochs": (int, 10),
    "batch_size": (int, 32),
    "alpha": (float, 0.35),
    "seed": (int, 0),
    "max_steps": (_opt_int, None),
    # data
    "data_path": (_opt_str, None),
    "split_train": (float, 0.7),
    "split_val": (float, 0.1),
    "split_test": (float, 0.2),
    "stride": (int, 1),
    "output_dir": (str, "runs/latest"),
    # gradcheck
    "gradcheck_eps": (float, 1e-5),
    "gradcheck_tol": (float, 1e-4),
}

_MODEL_KEYS = {f.name for f in fields(ModelConfig)}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)}


def parse_value(key: str, raw: str):
    if key not in SCHEMA:
        raise RunConfigError(f"unknown config key {key!r}")
    parser, _ = SCHEMA[key]
    try:
        return parser(raw)
    except ValueError as exc:
        raise RunConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None


def parse_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise RunConfigError(f"{source}:{n}: expected 'key = value'")
        key, _, raw = line.partition("=")
        key = key.strip()
        out[key] = parse_value(key, raw.strip())
    return out


def parse_overrides(tokens: list[str]) -> dict:
    """``['--lr-key', '0.1', '--other', 'x']`` -> parsed dict (dashes become underscores)."""
    out, i = {}, 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--"):
            raise RunConfigError(f"unexpected argument {tok!r}")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, _, raw = key.partition("=")
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise RunConfigError(f"missing value for --{key}")
            raw = tokens[i + 1]
            i += 2
        out[key] = parse_value(key, raw)
    return out


class RunConfig(dict):
    """Merged settings: schema defaults < config file < overrides."""

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        cfg = cls({k: d for k, (_, d) in SCHEMA.items()})
        if path is not None:
            p = Path(path)
            if not p.exists():
                raise RunConfigError(f"config file {str(p)!r} not found")
            cfg.update(parse_text(p.read_text(), str(p)))
        cfg.update(overrides or {})
        return cfg

    def require(self, key: str):
        if self.get(key) in (None, ""):
            raise RunConfigError(f"required key {key!r} is not set")
        return self[key]

    def model_config(self, channels: int | None = None) -> ModelConfig:
        d = {k: self[k] for k in _MODEL_KEYS if k in self}
        if channels is not None:
            if d.get("channels") not in (None, channels):
                raise RunConfigError(f"channels = {d['channels']} but the data has {channels} channels")
            d["channels"] = channels
        if d.get("channels") is None:
            raise RunConfigError("required key 'channels' is not set")
        try:
            return ModelConfig(**d)
        except ValueError as exc:
            raise RunConfigError(str(exc)) from None

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig(**{k: self[k] for k in _TRAIN_KEYS if k in self})
        except ValueError as exc:
            raise RunConfigError(str(exc)) from None

    def to_text(self) -> str:
        lines = []
        for k in SCHEMA:
            v = self.get(k)
            if v is None:
                v = "none"
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

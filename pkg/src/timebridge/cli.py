"""``timebridge`` command line: train, eval, adf, eg, synth, prop1, gradcheck, backtest.

Machine output is one JSON document (stdout, or the ``--out`` file for
commands whose primary output is JSON). Validation failures exit with
status 2 and print nothing to stdout; other failures exit with 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .autodiff import gradient_errors
from .config import RunConfig, RunConfigError, parse_overrides
from .data import (
    CsvFormatError,
    SplitSpec,
    TimeSeriesFrame,
    chronological_split,
    load_csv,
    save_csv,
    stack_windows,
    standardize,
    windows,
)
from .losses import hybrid_loss
from .metrics import buy_hold_sell_backtest, forecast_metrics
from .model import forward, init_params, load_checkpoint, save_checkpoint
from .stats import adf_test, eg_pair_count, eg_test
from .synthetic import adf_calibration, generate, prop1_report
from .training import predict, train

log = logging.getLogger("timebridge")


class UsageError(ValueError):
    pass


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _finite(o):
    # JSON has no NaN/Inf: map them to null
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    return o


def emit(doc: dict, out: str | None) -> None:
    text = json.dumps(_finite(doc), indent=2, default=_json_default)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


# ----------------------------------------------------------------------------
# data plumbing shared by train / eval
# ----------------------------------------------------------------------------


def _split_spec(cfg: RunConfig) -> SplitSpec:
    parts = [cfg["split_train"], cfg["split_val"], cfg["split_test"]]
    if all(p > 1 for p in parts):
        parts = [int(p) for p in parts]
    return SplitSpec(*parts)


def _prepare(cfg: RunConfig):
    path = cfg.require("data_path")
    if not Path(path).exists():
        raise RunConfigError(f"data_path {path!r} does not exist")
    frame = load_csv(path)
    splits = chronological_split(frame, _split_spec(cfg))
    scaled, scaler = standardize(*splits)
    return frame, scaled, scaler


def _windows_or_fail(frame: TimeSeriesFrame, cfg: RunConfig, name: str, stride: int):
    try:
        return windows(frame, cfg["input_len"], cfg["output_len"], stride)
    except ValueError as exc:
        raise RunConfigError(f"{name} split: {exc}") from None


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------


def cmd_train(args, extra) -> dict:
    cfg = RunConfig.load(args.config, parse_overrides(extra))
    if args.seed is not None:
        cfg["seed"] = args.seed
    frame, (tr, va, _), scaler = _prepare(cfg)
    model_cfg = cfg.model_config(frame.C)
    train_cfg = cfg.train_config()
    train_w = _windows_or_fail(tr, cfg, "train", cfg["stride"])
    val_w = _windows_or_fail(va, cfg, "val", 1)
    params = init_params(model_cfg, cfg["seed"])
    result = train(model_cfg, params, train_w, train_cfg, val_w)

    out_dir = Path(args.out or cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out_dir / "checkpoint.txt", model_cfg, result.best_params)
    result.write_log(out_dir / "train_log.csv")
    snap = RunConfig(cfg)
    snap["channels"] = frame.C
    snap["output_dir"] = str(out_dir)
    (out_dir / "config_snapshot.cfg").write_text(snap.to_text())
    (out_dir / "scaler.json").write_text(scaler.to_json())
    return {
        "output_dir": str(out_dir),
        "epochs": len(result.log),
        "steps": result.steps,
        "best_epoch": result.best_epoch,
        "final_train_loss": result.log[-1]["train_loss"],
        "best_val_loss": result.log[result.best_epoch - 1]["val_loss"],
    }


def cmd_eval(args, extra) -> dict:
    cfg = RunConfig.load(args.config, parse_overrides(extra))
    if not args.checkpoint:
        raise RunConfigError("required flag '--checkpoint' is not set")
    model_cfg, params = load_checkpoint(args.checkpoint)
    frame, scaled, scaler = _prepare(cfg)
    if frame.C != model_cfg.channels:
        raise RunConfigError(f"checkpoint expects {model_cfg.channels} channels, data has {frame.C}")
    idx = {"train": 0, "val": 1, "test": 2}[args.split]
    w = windows(scaled[idx], model_cfg.input_len, model_cfg.output_len, 1)  # every window, no drop-last
    xs, ys = stack_windows(w)
    pred = predict(params, model_cfg, xs)
    raw_pred = scaler.inverse_channel_major(pred)
    raw_true = scaler.inverse_channel_major(ys)
    return {
        "split": args.split,
        "standardized": forecast_metrics(pred, ys).to_dict(),
        "raw": forecast_metrics(raw_pred, raw_true).to_dict(),
    }


def _adf_lags(s: str):
    return "auto" if s == "auto" else int(s)


def cmd_adf(args, extra) -> dict:
    if args.csv:
        frame = load_csv(args.csv)
        cols = [args.column] if args.column else frame.channel_names
        out = {}
        for c in cols:
            if c not in frame.channel_names:
                raise UsageError(f"column {c!r} not in {args.csv}")
            r = adf_test(frame.values[:, frame.channel_names.index(c)], args.regression, _adf_lags(args.lags))
            crit = r.critical_values["5%"]
            out[c] = {**r.to_dict(), "lags": r.lag_used, "verdict": "stationary" if r.statistic < crit else "unit_root"}
        stats = [v["statistic"] for v in out.values()]
        return {"source": args.csv, "mean_statistic": float(np.mean(stats)), "channels": out}
    if not args.kind:
        raise UsageError("adf needs --csv or --kind")
    seed = args.seed if args.seed is not None else 0
    return adf_calibration(args.kind, args.T, args.reps, seed, _adf_lags(args.lags), args.regression)


def cmd_eg(args, extra) -> dict:
    frame = load_csv(args.csv)
    lags = _adf_lags(args.lags)
    if args.pairs:
        return {
            "source": args.csv,
            "channels": frame.C,
            "ordered_pairs": frame.C * (frame.C - 1),
            "cointegrated_pairs": eg_pair_count(frame.values, args.significance, lags),
            "significance": args.significance,
        }
    for c in (args.x, args.y):
        if c not in frame.channel_names:
            raise UsageError(f"column {c!r} not in {args.csv}")
    x = frame.values[:, frame.channel_names.index(args.x)]
    y = frame.values[:, frame.channel_names.index(args.y)]
    r = eg_test(x, y, args.significance, lags)
    d = r.to_dict()
    d.update(lags=r.residual_adf.lag_used, verdict="cointegrated" if r.cointegrated else "not_cointegrated")
    return d


def cmd_synth(args, extra) -> dict:
    if not args.out:
        raise UsageError("synth needs --out <file.csv>")
    seed = args.seed if args.seed is not None else 0
    frame = generate(args.kind, args.T, args.C, args.sigma, args.beta, seed)
    save_csv(frame, args.out)
    return {"kind": args.kind, "T": frame.T, "C": frame.C, "seed": seed, "path": args.out}


def cmd_prop1(args, extra) -> dict:
    seed = args.seed if args.seed is not None else 0
    return prop1_report(args.S, args.t, args.i, args.j, args.sigma, args.trials, seed)


def cmd_gradcheck(args, extra) -> dict:
    cfg = RunConfig.load(args.config, parse_overrides(extra))
    if args.seed is not None:
        cfg["seed"] = args.seed
    model_cfg = cfg.model_config()
    params = init_params(model_cfg, cfg["seed"])
    rng = np.random.default_rng(cfg["seed"] + 1)
    x = np.cumsum(rng.standard_normal((model_cfg.channels, model_cfg.input_len)), axis=1)
    y = rng.standard_normal((model_cfg.channels, model_cfg.output_len))
    alpha = cfg["alpha"]
    errs = gradient_errors(lambda: hybrid_loss(forward(x, model_cfg, params), y, alpha), params,
                           cfg["gradcheck_eps"], args.stencil)
    worst = max(errs.values())
    return {
        "max_rel_err": worst,
        "tolerance": cfg["gradcheck_tol"],
        "eps": cfg["gradcheck_eps"],
        "stencil": args.stencil,
        "passed": worst < cfg["gradcheck_tol"],
        "n_params": int(sum(p.size for p in params.values())),
        "per_parameter": errs,
    }


def _read_matrix(path: str) -> np.ndarray:
    return load_csv(path).values


def cmd_backtest(args, extra) -> dict:
    pred = _read_matrix(args.pred)
    real = _read_matrix(args.real)
    bench = _read_matrix(args.bench)[:, 0] if args.bench else None
    top_k = args.top_k if args.top_k is not None else min(50, pred.shape[1])
    rep = buy_hold_sell_backtest(pred, real, top_k, bench, args.periods_per_year)
    doc = {**rep.metrics(), "top_k": top_k, "days": int(pred.shape[0]), "stocks": int(pred.shape[1])}
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "equity_curve.csv").open("w") as fh:
            fh.write("day,daily_return,equity\n")
            for d, (r, e) in enumerate(zip(rep.daily_returns, rep.equity_curve)):
                fh.write(f"{d},{r!r},{e!r}\n")
        (out_dir / "report.json").write_text(json.dumps(_finite(doc), indent=2) + "\n")
    return doc


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value run configuration")
    common.add_argument("--seed", type=int, help="top-level seed")
    common.add_argument("--out", help="output file or directory")

    p = argparse.ArgumentParser(prog="timebridge", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("train", parents=[common], help="train a model; extra --key value pairs override the config")

    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint on one split")
    e.add_argument("--checkpoint")
    e.add_argument("--split", choices=["train", "val", "test"], default="test")

    a = sub.add_parser("adf", parents=[common], help="ADF test on CSV columns or a seeded calibration run")
    a.add_argument("--csv")
    a.add_argument("--column")
    a.add_argument("--kind", choices=["random_walk", "white_noise"])
    a.add_argument("--T", type=int, default=10_000)
    a.add_argument("--reps", type=int, default=100)
    a.add_argument("--regression", default="constant", choices=["none", "constant", "constant_and_trend"])
    a.add_argument("--lags", default="0")

    g = sub.add_parser("eg", parents=[common], help="Engle-Granger test on two CSV columns or all pairs")
    g.add_argument("--csv", required=True)
    g.add_argument("--x")
    g.add_argument("--y")
    g.add_argument("--pairs", action="store_true")
    g.add_argument("--significance", type=float, default=0.05, choices=[0.01, 0.05, 0.10])
    g.add_argument("--lags", default="auto")

    s = sub.add_parser("synth", parents=[common], help="write a synthetic frame to CSV")
    s.add_argument("--kind", required=True,
                   choices=["random_walk", "white_noise", "cointegrated_pair", "trend_sinusoid", "cointegrated_channels"])
    s.add_argument("--T", type=int, default=1000)
    s.add_argument("--C", type=int, default=1)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--beta", type=float, default=2.0)

    r = sub.add_parser("prop1", parents=[common], help="Monte-Carlo check of the random-walk patch score")
    r.add_argument("--S", type=int, default=8)
    r.add_argument("--t", type=int, default=100)
    r.add_argument("--i", type=int, default=0)
    r.add_argument("--j", type=int, default=16)
    r.add_argument("--sigma", type=float, default=1.0)
    r.add_argument("--trials", type=int, default=50_000)

    c = sub.add_parser("gradcheck", parents=[common], help="tape gradients vs central differences")
    c.add_argument("--stencil", type=int, choices=[2, 4], default=4)

    b = sub.add_parser("backtest", parents=[common], help="top-k buy-hold-sell backtest")
    b.add_argument("--pred", required=True)
    b.add_argument("--real", required=True)
    b.add_argument("--bench")
    b.add_argument("--top-k", type=int)
    b.add_argument("--periods-per-year", type=int, default=252)
    return p


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "adf": cmd_adf,
    "eg": cmd_eg,
    "synth": cmd_synth,
    "prop1": cmd_prop1,
    "gradcheck": cmd_gradcheck,
    "backtest": cmd_backtest,
}

# commands whose JSON goes to --out (the others use --out for artefacts)
_JSON_TO_OUT = {"adf", "eg", "prop1", "gradcheck", "eval"}
_ACCEPTS_OVERRIDES = {"train", "eval", "gradcheck"}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if extra and args.command not in _ACCEPTS_OVERRIDES:
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    try:
        doc = COMMANDS[args.command](args, extra)
    except (RunConfigError, UsageError, CsvFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    emit(doc, args.out if args.command in _JSON_TO_OUT else None)
    if args.command == "gradcheck" and not doc["passed"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

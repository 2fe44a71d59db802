"""Forecast error metrics and a top-k buy-hold-sell backtest."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

logger = logging.getLogger(__name__)

TRADING_DAYS = 252


@dataclass
class ForecastReport:
    mse: float
    mae: float
    mape: float
    rmse: float
    n_samples: int

    def to_dict(self) -> dict:
        return asdict(self)


def forecast_metrics(pred, target, n_samples: int | None = None) -> ForecastReport:
    """MSE, MAE, RMSE and MAPE (percent) averaged over every element.

    Elements with a zero target are left out of MAPE only; the number left
    out is logged. ``n_samples`` defaults to the leading dimension.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"prediction {pred.shape} and target {target.shape} differ")
    err = pred - target
    mse = float(np.mean(err**2))
    nz = target != 0
    if not nz.any():
        raise ValueError("MAPE is undefined: every target is zero")
    if not nz.all():
        logger.warning("MAPE excludes %d zero-valued targets", int((~nz).sum()))
    mape = float(np.mean(np.abs(err[nz] / target[nz])) * 100.0)
    return ForecastReport(
        mse=mse,
        mae=float(np.mean(np.abs(err))),
        mape=mape,
        rmse=math.sqrt(mse),
        n_samples=int(n_samples if n_samples is not None else (pred.shape[0] if pred.ndim else 1)),
    )


@dataclass
class BacktestReport:
    arr: float
    avol: float
    mdd: float
    asr: float | None
    cr: float | None
    ir: float | None
    equity_curve: np.ndarray
    daily_returns: np.ndarray
    holdings: np.ndarray  # [days, top_k] stock indices

    def metrics(self) -> dict:
        return {k: getattr(self, k) for k in ("arr", "avol", "mdd", "asr", "cr", "ir")}


def equity_curve(daily_returns) -> np.ndarray:
    return np.cumprod(1.0 + np.asarray(daily_returns, dtype=np.float64))


def max_drawdown(daily_returns) -> float:
    """``-max((peak - trough) / peak)`` over the curve, starting from 1.0."""
    curve = np.concatenate([[1.0], equity_curve(daily_returns)])
    peaks = np.maximum.accumulate(curve)
    return -float(np.max((peaks - curve) / peaks))


def financial_metrics(
    daily_returns, benchmark_returns=None, periods_per_year: int = TRADING_DAYS
) -> dict[str, float | None]:
    """ARR, AVol, MDD, ASR, CR and IR of a daily return series.

    Ratios whose denominator is zero come back as ``None``. Standard
    deviations use ``ddof=1``.
    """
    r = np.asarray(daily_returns, dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise ValueError("need at least two daily returns")
    total = float(np.prod(1.0 + r)) - 1.0
    years = r.size / periods_per_year
    arr = (1.0 + total) ** (1.0 / years) - 1.0
    sd = float(np.std(r, ddof=1))
    avol = math.sqrt(periods_per_year) * sd
    mdd = max_drawdown(r)
    ir = None
    if benchmark_returns is not None:
        b = np.asarray(benchmark_returns, dtype=np.float64)
        if b.shape != r.shape:
            raise ValueError(f"benchmark has shape {b.shape}, returns have {r.shape}")
        ex = r - b
        ex_sd = float(np.std(ex, ddof=1))
        ir = float(np.mean(ex) / ex_sd * math.sqrt(periods_per_year)) if ex_sd > 0 else None
    return {
        "arr": arr,
        "avol": avol,
        "mdd": mdd,
        "asr": arr / avol if avol > 0 else None,
        "cr": arr / abs(mdd) if mdd != 0 else None,
        "ir": ir,
    }


def select_top_k(predicted: np.ndarray, top_k: int) -> np.ndarray:
    """Indices of the ``top_k`` largest predictions per row; ties go to the lower index."""
    predicted = np.asarray(predicted, dtype=np.float64)
    days, stocks = predicted.shape
    idx = np.broadcast_to(np.arange(stocks), predicted.shape)
    # lexsort sorts by the last key first: descending prediction, then ascending index
    order = np.lexsort((idx, -predicted), axis=1)
    return order[:, :top_k]


def buy_hold_sell_backtest(
    predicted_returns,
    realized_returns,
    top_k: int = 50,
    benchmark_returns=None,
    periods_per_year: int = TRADING_DAYS,
) -> BacktestReport:
    """Hold an equal-weighted portfolio of the day's ``top_k`` predicted names.

    Row ``d`` of ``predicted_returns`` ranks stocks for day ``d``; the day's
    portfolio return is the mean realized return of the names held.
    """
    pred = np.asarray(predicted_returns, dtype=np.float64)
    real = np.asarray(realized_returns, dtype=np.float64)
    if pred.shape != real.shape or pred.ndim != 2:
        raise ValueError(f"predicted {pred.shape} and realized {real.shape} must be equal [days, stocks]")
    if not 1 <= top_k <= pred.shape[1]:
        raise ValueError(f"top_k must lie in [1, {pred.shape[1]}], got {top_k}")
    held = select_top_k(pred, top_k)
    daily = np.take_along_axis(real, held, axis=1).mean(axis=1)
    m = financial_metrics(daily, benchmark_returns, periods_per_year)
    return BacktestReport(equity_curve=equity_curve(daily), daily_returns=daily, holdings=held, **m)

"""OLS, the augmented Dickey-Fuller test and the Engle-Granger cointegration test.

Critical values use the response-surface approximations of MacKinnon
(2010, "Critical Values for Cointegration Tests", Queen's Economics
Department Working Paper 1227): ``cv(T) = b0 + b1/T + b2/T**2 + b3/T**3``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from itertools import permutations
from typing import Literal

import numpy as np

RegressionKind = Literal["none", "constant", "constant_and_trend"]

_KIND_ALIASES = {"n": "none", "nc": "none", "c": "constant", "ct": "constant_and_trend"}


class DegenerateRegressionError(ValueError):
    """The design matrix is rank deficient or the series carries no variation."""


class SeriesTooShortError(ValueError):
    pass


# (b0, b1, b2, b3) per significance level
_ADF_SURFACE = {
    "none": {
        0.01: (-2.56574, -2.2358, -3.627, 0.0),
        0.05: (-1.94100, -0.2686, -3.365, 31.223),
        0.10: (-1.61682, 0.2656, -2.714, 25.364),
    },
    "constant": {
        0.01: (-3.43035, -6.5393, -16.786, -79.433),
        0.05: (-2.86154, -2.8903, -4.234, -40.040),
        0.10: (-2.56677, -1.5384, -2.809, 0.0),
    },
    "constant_and_trend": {
        0.01: (-3.95877, -9.0531, -28.428, -134.155),
        0.05: (-3.41049, -4.3904, -9.036, -45.374),
        0.10: (-3.12705, -2.5856, -3.925, -22.380),
    },
}

# residual-based test, two variables, cointegrating regression with a constant
_EG2_SURFACE = {
    0.01: (-3.89644, -10.9519, -33.527, 0.0),
    0.05: (-3.33613, -6.1101, -6.823, 0.0),
    0.10: (-3.04445, -4.2412, -2.720, 0.0),
}


def _surface(coefs, nobs: int) -> float:
    b0, b1, b2, b3 = coefs
    return b0 + b1 / nobs + b2 / nobs**2 + b3 / nobs**3


def adf_critical_value(kind: RegressionKind, significance: float, nobs: int) -> float:
    kind = _normalise_kind(kind)
    try:
        return _surface(_ADF_SURFACE[kind][significance], nobs)
    except KeyError:
        raise ValueError(f"no ADF critical value for significance {significance}") from None


def eg_critical_value(significance: float, nobs: int) -> float:
    try:
        return _surface(_EG2_SURFACE[significance], nobs)
    except KeyError:
        raise ValueError(f"no Engle-Granger critical value for significance {significance}") from None


def _normalise_kind(kind: str) -> RegressionKind:
    kind = _KIND_ALIASES.get(kind, kind)
    if kind not in _ADF_SURFACE:
        raise ValueError(f"unknown regression kind {kind!r}")
    return kind  # type: ignore[return-value]


# ----------------------------------------------------------------------------
# OLS
# ----------------------------------------------------------------------------


@dataclass
class OlsResult:
    coefficients: np.ndarray
    residuals: np.ndarray
    standard_errors: np.ndarray
    rss: float
    nobs: int


def ols(X: np.ndarray, y: np.ndarray, rank_tol: float = 1e-10) -> OlsResult:
    """Least squares via QR, rejecting designs whose R has a vanishing diagonal.

    Standard errors come from ``sigma^2 (X'X)^-1`` with
    ``sigma^2 = RSS / (n - k)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if y.shape != (n,):
        raise ValueError(f"design has {n} rows but response has shape {y.shape}")
    if n <= k:
        raise SeriesTooShortError(f"need more observations ({n}) than regressors ({k})")
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    col_norms = np.linalg.norm(X, axis=0)
    if np.any(diag <= rank_tol * np.maximum(col_norms, 1e-300)) or np.any(col_norms == 0):
        raise DegenerateRegressionError("design matrix is rank deficient")
    coef = np.linalg.solve(r, q.T @ y)
    resid = y - X @ coef
    rss = float(resid @ resid)
    sigma2 = rss / (n - k)
    rinv = np.linalg.solve(r, np.eye(k))
    cov = sigma2 * (rinv @ rinv.T)
    return OlsResult(coef, resid, np.sqrt(np.diag(cov)), rss, n)


# ----------------------------------------------------------------------------
# ADF
# ----------------------------------------------------------------------------


@dataclass
class AdfResult:
    statistic: float
    gamma_estimate: float
    lag_used: int
    regression_kind: str
    n_obs: int
    critical_values: dict[str, float]

    def to_dict(self) -> dict:
        return asdict(self)


def _n_deterministic(kind: RegressionKind) -> int:
    return {"none": 0, "constant": 1, "constant_and_trend": 2}[kind]


def _adf_design(x: np.ndarray, lags: int, kind: RegressionKind, start: int) -> tuple[np.ndarray, np.ndarray]:
    # rows t = start+1 .. T-1 (0-based) so that all lag sets share a sample when start = maxlag
    dx = np.diff(x)
    t_idx = np.arange(start, len(dx))
    cols = [x[t_idx]]  # level X_{t-1}, aligned with dx[t] = X_{t+1} - X_t
    for i in range(1, lags + 1):
        cols.append(dx[t_idx - i])
    if kind in ("constant", "constant_and_trend"):
        cols.append(np.ones(len(t_idx)))
    if kind == "constant_and_trend":
        cols.append(t_idx + 1.0)
    return np.column_stack(cols), dx[t_idx]


def max_lag(n: int) -> int:
    """Schwert's rule ``floor(12 * (n/100)**0.25)``."""
    return int(np.floor(12.0 * (n / 100.0) ** 0.25))


def adf_test(
    series,
    regression_kind: RegressionKind = "constant",
    lags: int | Literal["auto"] = 0,
) -> AdfResult:
    """Augmented Dickey-Fuller t-test on the coefficient of the lagged level.

    ``lags='auto'`` fits every lag in ``0..max_lag(n)`` on a common sample
    and keeps the AIC minimiser, then refits it on the full sample.
    """
    x = np.asarray(series, dtype=np.float64).reshape(-1)
    kind = _normalise_kind(regression_kind)
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    if np.ptp(x) == 0:
        raise DegenerateRegressionError("series is constant")
    n_det = _n_deterministic(kind)
    if lags == "auto":
        top = min(max_lag(len(x)), (len(x) - 3 - n_det) // 2)
        if top < 0:
            raise SeriesTooShortError(f"series of length {len(x)} is too short for the ADF regression")
        best_aic, chosen = np.inf, 0
        for p in range(top + 1):
            X, y = _adf_design(x, p, kind, top)
            res = ols(X, y)
            nobs = len(y)
            aic = nobs * np.log(res.rss / nobs) + 2 * X.shape[1]
            if aic < best_aic:
                best_aic, chosen = aic, p
        lags = chosen
    lags = int(lags)
    if lags < 0:
        raise ValueError("lags must be non-negative")
    if len(x) <= lags + 3 + n_det:
        raise SeriesTooShortError(f"series of length {len(x)} is too short for {lags} lags")
    X, y = _adf_design(x, lags, kind, lags)
    res = ols(X, y)
    gamma, se = res.coefficients[0], res.standard_errors[0]
    if not se > 0:
        raise DegenerateRegressionError("zero standard error on the lagged level (exact fit)")
    nobs = len(y)
    crit = {f"{int(s * 100)}%": adf_critical_value(kind, s, nobs) for s in (0.01, 0.05, 0.10)}
    return AdfResult(float(gamma / se), float(gamma), lags, kind, nobs, crit)


# ----------------------------------------------------------------------------
# Engle-Granger
# ----------------------------------------------------------------------------


@dataclass
class EgResult:
    beta: float
    intercept: float
    residual_adf: AdfResult
    cointegrated: bool
    significance_level: float
    critical_value: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["statistic"] = self.residual_adf.statistic
        return d


def eg_test(x, y, significance: float = 0.05, lags: int | Literal["auto"] = "auto") -> EgResult:
    """Two-step Engle-Granger test of ``x`` on ``y``.

    Step one regresses ``x_t = a + b y_t + e_t``; step two runs an ADF
    regression without deterministic terms on the residuals and compares
    the t-statistic with the two-variable residual-based critical value.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ValueError(f"series lengths differ: {x.size} vs {y.size}")
    if x.size <= 20:
        raise SeriesTooShortError("Engle-Granger test needs more than 20 observations")
    design = np.column_stack([np.ones_like(y), y])
    step1 = ols(design, x)
    resid = step1.residuals
    if np.max(np.abs(resid)) <= 1e-10 * max(np.max(np.abs(x)), 1.0):
        raise DegenerateRegressionError("cointegrating regression fits exactly; residuals are zero")
    adf = adf_test(resid, "none", lags)
    cv = eg_critical_value(significance, adf.n_obs)
    return EgResult(
        beta=float(step1.coefficients[1]),
        intercept=float(step1.coefficients[0]),
        residual_adf=adf,
        cointegrated=bool(adf.statistic < cv),
        significance_level=significance,
        critical_value=cv,
    )


def eg_pair_count(values, significance: float = 0.05, lags: int | Literal["auto"] = "auto") -> int:
    """Count cointegrated verdicts over all ordered channel pairs of ``values[T, C]``.

    Accepts a plain array or anything with a ``values`` array (a ``TimeSeriesFrame``).
    """
    values = np.asarray(getattr(values, "values", values), dtype=np.float64)
    if values.ndim != 2 or values.shape[1] < 2:
        raise ValueError("need a [T, C] array with at least two channels")
    count = 0
    for i, j in permutations(range(values.shape[1]), 2):
        count += eg_test(values[:, i], values[:, j], significance, lags).cointegrated
    return count

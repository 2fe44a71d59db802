"""Seeded generators and the Brownian patch-score oracle.

Randomness comes from numpy's PCG64 bit generator (``np.random.default_rng``);
Gaussian draws use its ziggurat ``standard_normal``. Monte-Carlo drivers
split one seed into a fixed number of chunks with ``SeedSequence.spawn``,
so results do not depend on how many worker threads run the chunks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import TimeSeriesFrame
from .stats import adf_test

MC_CHUNKS = 16


def thread_cap() -> int:
    """Worker threads for Monte-Carlo drivers (``TIMEBRIDGE_THREADS``, default 1)."""
    try:
        return max(1, int(os.environ.get("TIMEBRIDGE_THREADS", "1")))
    except ValueError:
        return 1


def gen_random_walk(T: int, sigma: float = 1.0, seed: int = 0) -> np.ndarray:
    """``X_0 = 0, X_t = X_{t-1} + u_t`` with ``u_t ~ N(0, sigma^2)``; returns ``X_1..X_T``."""
    if T < 2:
        raise ValueError("T must be >= 2")
    rng = np.random.default_rng(seed)
    return np.cumsum(sigma * rng.standard_normal(T))


def gen_white_noise(T: int, sigma: float = 1.0, seed: int = 0) -> np.ndarray:
    if T < 2:
        raise ValueError("T must be >= 2")
    return sigma * np.random.default_rng(seed).standard_normal(T)


def gen_cointegrated_pair(
    T: int, beta: float = 2.0, noise_sigma: float = 0.5, seed: int = 0
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``y`` a unit-variance random walk, ``x = beta*y + eta``; returns ``(x, y, eta)``."""
    if T < 2:
        raise ValueError("T must be >= 2")
    rng = np.random.default_rng(seed)
    y = np.cumsum(rng.standard_normal(T))
    eta = noise_sigma * rng.standard_normal(T)
    return beta * y + eta, y, eta


@dataclass
class TrendSinusoid:
    """Stored parameters of a trend-plus-two-sinusoids frame."""

    T: int
    slopes: np.ndarray
    intercepts: np.ndarray
    amplitudes: np.ndarray  # [C, 2]
    periods: np.ndarray  # [C, 2]
    phases: np.ndarray  # [C, 2]
    noise_sigma: float
    noise: np.ndarray = field(repr=False)

    def clean(self) -> np.ndarray:
        t = np.arange(self.T, dtype=np.float64)[:, None]
        out = self.intercepts + self.slopes * t
        for k in range(2):
            out = out + self.amplitudes[:, k] * np.sin(2 * np.pi * t / self.periods[:, k] + self.phases[:, k])
        return out

    def values(self) -> np.ndarray:
        return self.clean() + self.noise


def trend_sinusoid_params(T: int, C: int, seed: int = 0, noise_sigma: float = 0.05) -> TrendSinusoid:
    if T < 2 or C < 1:
        raise ValueError("need T >= 2 and C >= 1")
    rng = np.random.default_rng(seed)
    return TrendSinusoid(
        T=T,
        slopes=rng.uniform(-0.02, 0.02, C),
        intercepts=rng.uniform(-1.0, 1.0, C),
        amplitudes=rng.uniform(0.5, 1.5, (C, 2)),
        periods=np.column_stack([rng.uniform(8.0, 16.0, C), rng.uniform(20.0, 40.0, C)]),
        phases=rng.uniform(0.0, 2 * np.pi, (C, 2)),
        noise_sigma=noise_sigma,
        noise=noise_sigma * rng.standard_normal((T, C)),
    )


def gen_trend_sinusoid(T: int, C: int, seed: int = 0, noise_sigma: float = 0.05) -> TimeSeriesFrame:
    """Per channel: linear trend + two seeded sinusoids + Gaussian noise, ``[T, C]``."""
    p = trend_sinusoid_params(T, C, seed, noise_sigma)
    return TimeSeriesFrame([f"ch{c}" for c in range(C)], p.values())


def gen_cointegrated_channels(
    T: int, C: int, seed: int = 0, noise_sigma: float = 0.3, ar: float = 0.5
) -> TimeSeriesFrame:
    """``C`` channels sharing one random-walk trend with per-channel loadings.

    ``x_c = load_c * w + offset_c + e_c``, where ``e_c`` is a stationary AR(1)
    with coefficient ``ar`` and innovation scale ``noise_sigma``. Every pair
    is cointegrated; the short-term noise is channel specific.
    """
    rng = np.random.default_rng(seed)
    w = np.cumsum(rng.standard_normal(T))
    load = rng.uniform(0.5, 2.0, C)
    offset = rng.uniform(-2.0, 2.0, C)
    innov = noise_sigma * rng.standard_normal((T, C))
    e = np.empty_like(innov)
    e[0] = innov[0]
    for t in range(1, T):
        e[t] = ar * e[t - 1] + innov[t]
    return TimeSeriesFrame([f"ch{c}" for c in range(C)], w[:, None] * load + offset + e)


def generate(kind: str, T: int, C: int = 1, sigma: float = 1.0, beta: float = 2.0, seed: int = 0) -> TimeSeriesFrame:
    """Dispatch used by the ``synth`` command; multi-channel kinds spawn one seed per channel."""
    if kind == "random_walk":
        seeds = np.random.SeedSequence(seed).spawn(C)
        vals = np.column_stack([gen_random_walk(T, sigma, np.random.default_rng(s)) for s in seeds])
    elif kind == "white_noise":
        seeds = np.random.SeedSequence(seed).spawn(C)
        vals = np.column_stack([gen_white_noise(T, sigma, np.random.default_rng(s)) for s in seeds])
    elif kind == "cointegrated_pair":
        x, y, _ = gen_cointegrated_pair(T, beta, sigma, seed)
        return TimeSeriesFrame(["x", "y"], np.column_stack([x, y]))
    elif kind == "trend_sinusoid":
        return gen_trend_sinusoid(T, C, seed)
    elif kind == "cointegrated_channels":
        return gen_cointegrated_channels(T, C, seed, noise_sigma=sigma)
    else:
        raise ValueError(f"unknown generator kind {kind!r}")
    return TimeSeriesFrame([f"ch{c}" for c in range(C)], vals)


# ----------------------------------------------------------------------------
# patch-score oracle
# ----------------------------------------------------------------------------


def spurious_score_expectation(S: int, t: int, i: int, j: int, sigma: float = 1.0) -> float:
    """Closed form of ``E[<p_i, p_j>]`` for raw random-walk patches.

    ``sigma^2 * (S*min(i, j) + (S^2 + 2*S*t + S) / 2)``, with
    ``p_i = [X_{t+i+1}, ..., X_{t+i+S}]`` and ``X_0 = 0``.
    """
    if S < 1 or min(t, i, j) < 0:
        raise ValueError("need S >= 1 and t, i, j >= 0")
    return sigma**2 * (S * min(i, j) + (S * S + 2 * S * t + S) / 2)


def direct_score_sum(S: int, t: int, i: int, j: int, sigma: float = 1.0) -> float:
    """The same expectation as an explicit sum of covariances ``min(a, b) sigma^2``."""
    return math.fsum(sigma**2 * min(t + i + s, t + j + s) for s in range(1, S + 1))


def _score_chunk(seed_seq, n: int, S: int, t: int, i: int, j: int, sigma: float, detrended: bool) -> tuple[float, int]:
    rng = np.random.default_rng(seed_seq)
    length = t + max(i, j) + S
    u = sigma * rng.standard_normal((n, length))
    if detrended:
        # first differences of X inside each patch are exactly the increments u
        a = u[:, t + i : t + i + S]
        b = u[:, t + j : t + j + S]
    else:
        x = np.cumsum(u, axis=1)  # column k holds X_{k+1}
        a = x[:, t + i : t + i + S]
        b = x[:, t + j : t + j + S]
    return math.fsum(np.einsum("ns,ns->n", a, b)), n


def monte_carlo_patch_score(
    S: int,
    t: int,
    i: int,
    j: int,
    sigma: float = 1.0,
    detrended: bool = False,
    trials: int = 50_000,
    seed: int = 0,
) -> float:
    """Empirical mean of the patch dot product over fresh random-walk paths.

    Raw mode uses the level patches; detrended mode uses the first
    differences ``[dX_{t+i+1}, ..., dX_{t+i+S}]``.
    """
    if trials < 1000:
        raise ValueError("trials must be >= 1000")
    sizes = [trials // MC_CHUNKS + (k < trials % MC_CHUNKS) for k in range(MC_CHUNKS)]
    seeds = np.random.SeedSequence(seed).spawn(MC_CHUNKS)
    args = [(s, n, S, t, i, j, sigma, detrended) for s, n in zip(seeds, sizes) if n > 0]
    with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
        parts = list(pool.map(lambda a: _score_chunk(*a), args))
    return math.fsum(p[0] for p in parts) / trials


def prop1_report(S: int, t: int, i: int, j: int, sigma: float = 1.0, trials: int = 50_000, seed: int = 0) -> dict:
    closed = spurious_score_expectation(S, t, i, j, sigma)
    raw = monte_carlo_patch_score(S, t, i, j, sigma, False, trials, seed)
    ss = np.random.SeedSequence(seed).spawn(3)
    det_cross = monte_carlo_patch_score(S, t, i, j, sigma, True, trials, int(ss[1].generate_state(1)[0]))
    det_same = monte_carlo_patch_score(S, t, i, i, sigma, True, trials, int(ss[2].generate_state(1)[0]))
    return {
        "S": S,
        "t": t,
        "i": i,
        "j": j,
        "sigma": sigma,
        "trials": trials,
        "seed": seed,
        "closed_form": closed,
        "monte_carlo": raw,
        "rel_err": abs(raw - closed) / abs(closed),
        "detrended_cross_mean": det_cross,
        "detrended_same_mean": det_same,
        "detrended_same_expected": S * sigma**2,
    }


# ----------------------------------------------------------------------------
# ADF calibration
# ----------------------------------------------------------------------------


def adf_calibration(kind: str, T: int = 10_000, reps: int = 100, seed: int = 0, lags=0,
                    regression_kind: str = "constant") -> dict:
    """Mean ADF statistic over ``reps`` seeded random-walk or white-noise series."""
    if kind not in ("random_walk", "white_noise"):
        raise ValueError(f"calibration kind must be random_walk or white_noise, got {kind!r}")
    gen = gen_random_walk if kind == "random_walk" else gen_white_noise
    seeds = np.random.SeedSequence(seed).spawn(reps)

    def one(s):
        return adf_test(gen(T, 1.0, np.random.default_rng(s)), regression_kind, lags).statistic

    with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
        stats = list(pool.map(one, seeds))
    return {
        "kind": kind,
        "T": T,
        "reps": reps,
        "seed": seed,
        "regression_kind": regression_kind,
        "lags": lags,
        "mean_statistic": math.fsum(stats) / reps,
        "std_statistic": float(np.std(stats, ddof=1)) if reps > 1 else 0.0,
        "statistics": stats,
    }

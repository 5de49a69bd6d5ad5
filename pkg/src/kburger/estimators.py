"""Monte Carlo estimators and statistical tests confronting simulation
with the closed-form predictions.

Trials are embarrassingly parallel: each trial owns an rng stream derived
from (master seed, trial index) and aggregation is ordered by trial
index, so results are independent of worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.stats import norm

from . import engine
from .engine import ModelParams
from .rng import derive_seed

Pair = tuple[int, int]


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    trials: int
    truncated_mass: float = 0.0

    def __post_init__(self) -> None:
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")
        if not (0.0 <= self.truncated_mass <= 1.0):
            raise ValueError("truncated_mass must lie in [0, 1]")


@dataclass(frozen=True)
class ExperimentConfig:
    k: int
    p: float
    n: int = 10_000
    trials: int = 400
    seed: int = 0  # mandatory: no entropy defaults anywhere
    past_mode: str = "exact"
    j_cap: int = 1_000_000
    step_cap: int = 500_000_000
    resolve_cap: int = 10_000_000
    threads: int = 1

    def __post_init__(self) -> None:
        if self.n < 1 or self.trials < 1 or self.threads < 1:
            raise ValueError("n, trials and threads must be positive")
        if self.seed is None:
            raise ValueError("a seed is mandatory")

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.k, self.p)


# -- parallel trial plumbing ----------------------------------------


def _final_stats_worker(args: tuple) -> tuple:
    k, p, n, past_mode, seed = args
    ci, maxabs, xlen = engine.final_counts(ModelParams(k, p), n, seed, past_mode)
    return ci, maxabs, xlen


def _map_trials(worker: Callable, argslist: list[tuple], threads: int) -> list:
    if threads <= 1:
        return [worker(a) for a in argslist]
    chunk = max(1, len(argslist) // (threads * 4))
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(worker, argslist, chunksize=chunk))


@dataclass(frozen=True)
class TrialStats:
    """Final-step statistics across independent trials."""

    config: ExperimentConfig
    ctilde: np.ndarray  # (trials, k) final C^i_n
    max_abs_c: np.ndarray  # (trials,) max_l |C_l|
    x_len: np.ndarray  # (trials,) |X(1,n)|

    def c_final(self) -> np.ndarray:
        return self.ctilde.sum(axis=1)

    def d_final(self, i: int, j: int) -> np.ndarray:
        return self.ctilde[:, i - 1] - self.ctilde[:, j - 1]


def collect_trial_stats(config: ExperimentConfig) -> TrialStats:
    argslist = [
        (
            config.k,
            config.p,
            config.n,
            config.past_mode,
            derive_seed(config.seed, "trial", t),
        )
        for t in range(config.trials)
    ]
    out = _map_trials(_final_stats_worker, argslist, config.threads)
    ctilde = np.array([r[0] for r in out], dtype=np.int64)
    maxabs = np.array([r[1] for r in out], dtype=np.int64)
    xlen = np.array([r[2] for r in out], dtype=np.int64)
    return TrialStats(config, ctilde, maxabs, xlen)


def _batched_stderr(values: np.ndarray, batches: int = 20) -> float:
    """Standard error of the mean of `values` from sequential trial batches."""
    nb = min(batches, len(values))
    if nb < 2:
        return 0.0
    parts = np.array_split(values, nb)
    means = np.array([p.mean() for p in parts])
    return float(means.std(ddof=1) / math.sqrt(nb))


# -- covariance growth ----------------------------------------------


def estimate_cov_D(
    config: ExperimentConfig,
    pairs: Sequence[tuple[Pair, Pair]],
    stats: Optional[TrialStats] = None,
) -> dict[tuple[Pair, Pair], Estimate]:
    """Sample covariance of (D^{ij}_n, D^{lm}_n) across trials, divided by n."""
    if stats is None:
        stats = collect_trial_stats(config)
    n = config.n
    out: dict[tuple[Pair, Pair], Estimate] = {}
    for pa, pb in pairs:
        da = stats.d_final(*pa).astype(np.float64)
        db = stats.d_final(*pb).astype(np.float64)
        # covariance of mean-zero limits; center empirically all the same
        prod = (da - da.mean()) * (db - db.mean())
        value = float(prod.sum() / (len(da) - 1)) / n
        stderr = _batched_stderr(prod / n)
        out[(pa, pb)] = Estimate(value, stderr, config.trials)
    return out


# -- chi ------------------------------------------------------------


def _chi_worker(args: tuple) -> tuple[int, int, bool]:
    k, p, seed, j_cap = args
    s = engine.sample_J(ModelParams(k, p), seed, j_cap)
    return s.J, s.length, s.truncated


def estimate_chi(config: ExperimentConfig, samples: int) -> Estimate:
    """Mean of |X(-J,-1)| over non-truncated backward samples."""
    argslist = [
        (config.k, config.p, derive_seed(config.seed, "chi", i), config.j_cap)
        for i in range(samples)
    ]
    out = _map_trials(_chi_worker, argslist, config.threads)
    lengths = np.array([ln for _, ln, tr in out if not tr], dtype=np.float64)
    truncated = sum(1 for _, _, tr in out if tr)
    if len(lengths) == 0:
        return Estimate(math.nan, 0.0, samples, 1.0)
    stderr = float(lengths.std(ddof=1) / math.sqrt(len(lengths))) if len(lengths) > 1 else 0.0
    return Estimate(float(lengths.mean()), stderr, samples, truncated / samples)


# -- E[D^{ij}(0) D^{lm}(-J,-1)] --------------------------------------


def _edd_worker(args: tuple) -> tuple:
    k, p, seed, j_cap, resolve_cap = args
    s = engine.sample_backward_Y(ModelParams(k, p), seed, j_cap, resolve_cap)
    return s.top_type, s.y_counts, s.truncated


def estimate_EDD(
    config: ExperimentConfig, pair_a: Pair, pair_b: Pair, samples: int
) -> Estimate:
    """Monte Carlo estimate of E[D^{ij}(0) D^{lm}(-J,-1)].

    The forward symbol X(0) is averaged out exactly: conditioned on the
    backward sample, every non-F value of X(0) contributes zero by
    symmetry, and X(0) = F (probability p/2) resolves to the typed order
    of the single burger in X(-J,-1).
    """
    i, j = pair_a
    l, m = pair_b
    if i == j or l == m:
        raise ValueError("pairs must have distinct indices")
    argslist = [
        (
            config.k,
            config.p,
            derive_seed(config.seed, "edd", t),
            config.j_cap,
            config.resolve_cap,
        )
        for t in range(samples)
    ]
    out = _map_trials(_edd_worker, argslist, config.threads)
    vals = []
    truncated = 0
    half_p = config.p / 2.0
    for top, ycounts, trunc in out:
        if trunc:
            truncated += 1
            continue
        s_ij = (1 if top == i else 0) - (1 if top == j else 0)
        d_lm = ycounts[l - 1] - ycounts[m - 1]
        vals.append(half_p * (-s_ij) * d_lm)
    arr = np.asarray(vals, dtype=np.float64)
    if len(arr) == 0:
        return Estimate(math.nan, 0.0, samples, 1.0)
    stderr = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return Estimate(float(arr.mean()), stderr, samples, truncated / samples)


# -- fractions -------------------------------------------------------


def flex_fraction(
    config: ExperimentConfig, prefix_sizes: Sequence[int]
) -> dict[int, Estimate]:
    """Fraction of F among the leftmost n elements of reduced X(1,m).

    m is chosen adaptively as the first time the order segment reaches
    the largest requested prefix (so m >> n for every reported n).
    """
    target = max(prefix_sizes)
    pend, steps, reached = engine.forward_pending_scan(
        config.params, derive_seed(config.seed, "ffrac"), target, config.step_cap
    )
    fcode = 2 * config.k
    out: dict[int, Estimate] = {}
    for nsz in prefix_sizes:
        got = min(nsz, len(pend))
        if got == 0:
            out[nsz] = Estimate(0.0, 0.0, 0, 0.0 if reached else 1.0)
            continue
        frac = sum(1 for c in pend[:got] if c == fcode) / got
        stderr = math.sqrt(max(frac * (1 - frac), 1e-12) / got)
        out[nsz] = Estimate(frac, stderr, got, 0.0 if got >= nsz else 1.0)
    return out


def past_type_fractions(config: ExperimentConfig, top_n: int) -> list[Estimate]:
    """Per-type fraction among the top `top_n` burgers of the exact past stack."""
    types = engine.reveal_past_types(
        config.params, derive_seed(config.seed, "pfrac"), top_n
    )
    out = []
    for t in range(1, config.k + 1):
        frac = sum(1 for x in types if x == t) / top_n
        out.append(Estimate(frac, math.sqrt(frac * (1 - frac) / top_n), top_n))
    return out


# -- normality and independence --------------------------------------


def ks_normality(samples: Sequence[float]) -> float:
    """Sup distance between the empirical CDF of the (already
    standardized) samples and the standard normal CDF."""
    arr = np.sort(np.asarray(samples, dtype=np.float64))
    n = len(arr)
    if n < 100:
        raise ValueError("need at least 100 samples")
    cdf = norm.cdf(arr)
    hi = np.arange(1, n + 1) / n - cdf
    lo = cdf - np.arange(0, n) / n
    return float(max(hi.max(), lo.max()))


def correlation(x: Sequence[float], y: Sequence[float]) -> Estimate:
    """Pearson correlation across trials."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if len(xa) != len(ya) or len(xa) < 3:
        raise ValueError("need matched samples, at least 3")
    r = float(np.corrcoef(xa, ya)[0, 1])
    return Estimate(r, 1.0 / math.sqrt(len(xa)), len(xa))


# -- tails -----------------------------------------------------------


def tail_curve(
    config: ExperimentConfig,
    a_grid: Sequence[float],
    stats: Optional[TrialStats] = None,
) -> dict[float, tuple[float, float]]:
    """Empirical P(max_l |C_l| > a sqrt(n)) and P(|X(1,n)| > a sqrt(n))."""
    if any(a < 0 for a in a_grid):
        raise ValueError("a-grid must be nonnegative")
    if stats is None:
        stats = collect_trial_stats(config)
    sqn = math.sqrt(config.n)
    out: dict[float, tuple[float, float]] = {}
    for a in a_grid:
        thr = a * sqn
        pc = float((stats.max_abs_c > thr).mean())
        px = float((stats.x_len > thr).mean())
        out[a] = (pc, px)
    return out


# -- CSV rows --------------------------------------------------------

CSV_HEADER = "quantity,k,p,n,value,stderr,trials,truncated_mass"


def estimate_row(quantity: str, config: ExperimentConfig, est: Estimate, n=None) -> str:
    n = config.n if n is None else n
    return (
        f"{quantity},{config.k},{config.p!r},{n},"
        f"{est.value!r},{est.stderr!r},{est.trials},{est.truncated_mass!r}"
    )

"""Statistical model checking by Monte-Carlo simulation.

A *sampler* is any callable ``sampler(seed, indices) -> array`` returning one
observation per run index. Run ``i`` must depend only on ``(seed, i)``; the
helpers here then produce identical estimates whether runs are evaluated one
by one, in chunks, or in parallel, because results are merged with
order-independent sums.

Probability queries run exactly ``required_samples(eps, alpha)`` runs
(Chernoff-Hoeffding sizing). Mean queries stop on relative standard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .rng import Stream, child_key, seed_key

Sampler = Callable[[int, np.ndarray], np.ndarray]

MEAN_BATCH = 5


class SMCError(RuntimeError):
    pass


@dataclass(frozen=True)
class Estimate:
    point: float
    lo: float
    hi: float
    runs: int
    ticks: int = 0
    partial: bool = False  # stopped before the query's run count / criterion
    met: bool = True  # mean queries: RSEM target reached

    def __post_init__(self):
        if not math.isnan(self.point) and not (self.lo <= self.point <= self.hi):
            raise ValueError(f"interval [{self.lo}, {self.hi}] does not contain {self.point}")

    @property
    def half_width(self) -> float:
        return (self.hi - self.lo) / 2


def required_samples(epsilon: float, alpha: float) -> int:
    """Runs needed so that P(|p_hat - p| > eps) <= alpha: ceil(ln(2/alpha) / (2 eps^2))."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    # tiny tolerance so that e.g. 738.0000000001 from rounding noise stays 738
    x = math.log(2 / alpha) / (2 * epsilon * epsilon)
    return max(1, math.ceil(x - 1e-9))


def run_stream(seed: int, index: int) -> Stream:
    """The random stream of run ``index`` of a query with ``seed``."""
    return Stream(child_key(seed_key(seed), index))


def _call(sampler: Sampler, seed: int, lo: int, hi: int):
    out = sampler(seed, np.arange(lo, hi, dtype=np.int64))
    ticks = 0
    if isinstance(out, tuple):
        out, ticks = out
    out = np.asarray(out, dtype=np.float64)
    if out.shape != (hi - lo,):
        raise SMCError(f"sampler returned shape {out.shape}, expected {(hi - lo,)}")
    if not np.all(np.isfinite(out)):
        raise SMCError("sampler returned a non-finite value")
    return out, int(ticks)


def probability_estimate(successes: int, runs: int, epsilon: float, ticks: int = 0, partial: bool = False) -> Estimate:
    if runs == 0:
        return Estimate(float("nan"), 0.0, 1.0, 0, ticks, True)
    p = successes / runs
    return Estimate(p, max(0.0, p - epsilon), min(1.0, p + epsilon), runs, ticks, partial)


def estimate_probability(
    sampler: Sampler,
    epsilon: float,
    alpha: float,
    seed: int,
    *,
    limit: Optional[int] = None,
    stop: Optional[Callable[[], bool]] = None,
    chunk: int = 2048,
) -> Estimate:
    """Fraction of successful runs among exactly N = required_samples runs.

    ``limit`` caps the number of runs (a run budget); ``stop`` is polled
    between chunks. Either one ending the query early yields a partial
    estimate over the runs completed so far.
    """
    n = required_samples(epsilon, alpha)
    target = n if limit is None else min(n, max(0, limit))
    done = 0
    successes = 0
    ticks = 0
    while done < target:
        if stop is not None and stop():
            break
        hi = min(target, done + chunk)
        vals, t = _call(sampler, seed, done, hi)
        successes += int(np.count_nonzero(vals))
        ticks += t
        done = hi
    return probability_estimate(successes, done, epsilon, ticks, partial=done < n)


def mean_estimate(values: Sequence[float], ticks: int = 0, partial: bool = False, met: bool = True) -> Estimate:
    n = len(values)
    if n == 0:
        return Estimate(float("nan"), -math.inf, math.inf, 0, ticks, True, False)
    mean = math.fsum(values) / n
    if n > 1:
        s = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    else:
        s = 0.0
    se = s / math.sqrt(n)
    return Estimate(mean, mean - se, mean + se, n, ticks, partial, met)


def rsem(values: Sequence[float]) -> float:
    """(s / sqrt(n)) / |mean|; infinite for a zero mean."""
    n = len(values)
    mean = math.fsum(values) / n
    if mean == 0:
        return math.inf
    s = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
    return s / math.sqrt(n) / abs(mean)


def _rsem_prefix(values: np.ndarray) -> float:
    n = len(values)
    mean = float(values.mean())
    if mean == 0 or n < 2:
        return math.inf if mean == 0 else 0.0
    s = math.sqrt(float(((values - mean) ** 2).sum()) / (n - 1))
    return s / math.sqrt(n) / abs(mean)


def estimate_mean(
    sampler: Sampler,
    rsem_target: float,
    seed: int,
    *,
    min_runs: int = 20,
    max_runs: int = 1000,
    limit: Optional[int] = None,
    stop: Optional[Callable[[], bool]] = None,
    batch: int = MEAN_BATCH,
) -> Estimate:
    """Mean of a per-run reward, stopping once RSEM <= ``rsem_target``.

    The criterion is checked at every multiple of ``batch`` runs that is at
    least ``min_runs``; otherwise the query ends at ``max_runs`` with
    ``met=False``. A zero mean never meets the criterion.
    """
    if not 0 < rsem_target < 1:
        raise ValueError("rsem target must lie in (0, 1)")
    if min_runs < 2 or max_runs < min_runs:
        raise ValueError("need 2 <= min_runs <= max_runs")
    cap = max_runs if limit is None else min(max_runs, max(0, limit))
    values = np.empty(0)
    ticks = 0
    fetched = 0
    prefetch = max(batch, min_runs, 20)
    n = 0
    while True:
        nxt = min(cap, n + batch) if n >= min_runs else min(cap, max(min_runs, n + batch))
        if nxt <= n:
            break
        if stop is not None and stop():
            break
        if nxt > fetched:
            hi = min(cap, max(nxt, fetched + prefetch))
            vals, t = _call(sampler, seed, fetched, hi)
            values = np.concatenate([values, vals])
            ticks += t
            fetched = hi
            prefetch = min(prefetch * 4, 1024)
        n = nxt
        if n >= min_runs and _rsem_prefix(values[:n]) <= rsem_target:
            return mean_estimate(values[:n].tolist(), ticks, partial=False, met=True)
    reached_max = n >= max_runs
    return mean_estimate(values[:n].tolist(), ticks, partial=not reached_max, met=False)


def simulate_series(sampler: Sampler, n: int, seed: int) -> list[float]:
    """Per-run observations of runs 0..n-1, in run order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    vals, _ = _call(sampler, seed, 0, n)
    return vals.tolist()


def merge_counts(parts: Sequence[tuple[int, int]]) -> tuple[int, int]:
    """Combine (successes, runs) pairs from independent workers."""
    return sum(p[0] for p in parts), sum(p[1] for p in parts)


def scalar_sampler(run: Callable[[Stream], float]) -> Sampler:
    """Lift ``run(stream) -> value`` into a sampler using per-run streams."""

    def sample(seed: int, indices: np.ndarray) -> np.ndarray:
        root = seed_key(seed)
        return np.array([run(Stream(child_key(root, int(i)))) for i in indices], dtype=np.float64)

    return sample


def engine_sampler(net, horizon: int, stop, observable) -> Sampler:
    """Sampler over an automaton network: ``observable(final_state)`` per run.

    ``stop`` and ``observable`` may be predicate text; a boolean observable
    turns the sampler into a success indicator for probability queries.
    """
    from .engine.runtime import compile_predicate, compile_value, simulate

    if stop is not None and not callable(stop):
        stop = compile_predicate(net, stop)
    if not callable(observable):
        observable = compile_value(net, observable)

    def sample(seed: int, indices: np.ndarray):
        root = seed_key(seed)
        out = np.empty(len(indices), dtype=np.float64)
        ticks = 0
        for k, i in enumerate(indices):
            tr = simulate(net, horizon, stop, Stream(child_key(root, int(i))), record=False)
            out[k] = float(observable(tr.final))
            ticks += tr.steps
        return out, ticks

    return sample

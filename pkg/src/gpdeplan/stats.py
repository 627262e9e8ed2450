"""Interval estimates: percentile bootstrap over configs, Wilson score, paired lift."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Mapping

import numpy as np
from scipy import stats as st

from .rng import make_rng

__all__ = ["StatsSummary", "LiftSummary", "PairingError", "wilson_interval", "bootstrap_ci", "summarize", "paired_lift"]

STATS_SEED = 20250
RESAMPLES = 10_000


class PairingError(KeyError):
    """Paired comparison over key sets that do not coincide."""


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for ``k`` successes out of ``n`` trials."""
    if n <= 0 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n and n > 0, got k={k}, n={n}")
    z = st.norm.ppf(0.5 + level / 2)
    phat = k / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    # guard rounding so the interval always contains the point estimate
    return float(min(lo, phat)), float(max(hi, phat))


def bootstrap_ci(values, level: float = 0.95, resamples: int = RESAMPLES, seed: int = STATS_SEED, key=()) -> tuple[float, float]:
    """Percentile bootstrap CI of the mean, clamped to contain the sample mean."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("bootstrap of an empty sample")
    m = float(x.mean())
    if x.size == 1 or np.all(x == x[0]):
        return m, m
    res = st.bootstrap(
        (x,), np.mean, confidence_level=level, n_resamples=resamples, method="percentile", rng=make_rng(seed, "bootstrap", *key)
    )
    lo, hi = float(res.confidence_interval.low), float(res.confidence_interval.high)
    return min(lo, m), max(hi, m)


@dataclass(frozen=True)
class StatsSummary:
    n: int
    mean: float
    sd: float
    level: float
    boot_low: float
    boot_high: float
    resamples: int
    wilson_low: float = math.nan
    wilson_high: float = math.nan


def summarize(
    values,
    successes: int | None = None,
    trials: int | None = None,
    level: float = 0.95,
    resamples: int = RESAMPLES,
    seed: int = STATS_SEED,
    key=(),
) -> StatsSummary:
    """Mean, sd and bootstrap CI over config-level ``values``; Wilson CI over pair counts."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValueError("summary of an empty sample")
    lo, hi = bootstrap_ci(x, level, resamples, seed, key)
    sd = float(x.std(ddof=1)) if x.size > 1 else 0.0
    wl = wh = math.nan
    if successes is not None and trials is not None:
        wl, wh = wilson_interval(successes, trials, level)
    return StatsSummary(int(x.size), float(x.mean()), sd, level, lo, hi, resamples, wl, wh)


@dataclass(frozen=True)
class LiftSummary:
    mean: float
    boot_low: float
    boot_high: float
    pairs: int
    groups: int

    @property
    def excludes_zero(self) -> bool:
        return self.boot_low > 0 or self.boot_high < 0


def paired_lift(
    treated: Mapping[Hashable, float],
    control: Mapping[Hashable, float],
    group: Callable[[Hashable], Hashable] = lambda k: k[0],
    level: float = 0.95,
    resamples: int = RESAMPLES,
    seed: int = STATS_SEED,
) -> LiftSummary:
    """Mean of ``treated - control`` over identical keys, bootstrapped over groups.

    Keys are typically ``(config key, start)``; the default grouping resamples
    whole configurations. Any key present on one side only is an error.
    """
    if set(treated) != set(control):
        missing = set(treated) ^ set(control)
        raise PairingError(f"{len(missing)} unmatched pair keys, e.g. {next(iter(missing))!r}")
    if not treated:
        raise ValueError("no pairs to compare")
    keys = sorted(treated, key=repr)
    diffs: dict[Hashable, list[float]] = {}
    for k in keys:
        diffs.setdefault(group(k), []).append(float(treated[k]) - float(control[k]))
    per_group = [float(np.mean(v)) for _, v in sorted(diffs.items(), key=lambda kv: repr(kv[0]))]
    mean = float(np.mean([treated[k] - control[k] for k in keys]))
    lo, hi = bootstrap_ci(per_group, level, resamples, seed, ("lift",))
    return LiftSummary(mean, min(lo, mean), max(hi, mean), len(keys), len(per_group))

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpdeplan.stats import PairingError, bootstrap_ci, paired_lift, summarize, wilson_interval


def wilson_closed_form(k, n, z=1.959963984540054):
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return centre - half, centre + half


@given(st.integers(1, 10**6), st.data())
@settings(max_examples=100, deadline=None)
def test_wilson_matches_closed_form(n, data):
    k = data.draw(st.integers(0, n))
    lo, hi = wilson_interval(k, n)
    elo, ehi = wilson_closed_form(k, n)
    assert lo == pytest.approx(max(0.0, elo), abs=1e-12)
    assert hi == pytest.approx(min(1.0, ehi), abs=1e-12)
    assert 0 <= lo <= k / n <= hi <= 1


def test_wilson_all_successes_and_errors():
    assert wilson_interval(50, 50)[1] == 1.0
    for k, n in ((1, 0), (-1, 5), (6, 5)):
        with pytest.raises(ValueError):
            wilson_interval(k, n)


def test_bootstrap_constant_and_empty():
    assert bootstrap_ci([0.7] * 10) == (0.7, 0.7)
    with pytest.raises(ValueError):
        bootstrap_ci([])


@given(st.lists(st.floats(0, 1), min_size=2, max_size=30))
@settings(max_examples=30, deadline=None)
def test_bootstrap_contains_mean_and_is_deterministic(xs):
    lo, hi = bootstrap_ci(xs, resamples=500)
    m = float(np.mean(xs))
    assert lo <= m <= hi
    assert bootstrap_ci(xs, resamples=500) == (lo, hi)


def test_summarize_fields():
    s = summarize([0.5, 0.7, 0.9], successes=21, trials=30, resamples=999)
    assert s.n == 3 and s.mean == pytest.approx(0.7) and s.sd == pytest.approx(0.2)
    assert s.boot_low <= s.mean <= s.boot_high
    assert s.wilson_low < 0.7 < s.wilson_high
    assert math.isnan(summarize([1.0]).wilson_low)
    with pytest.raises(ValueError):
        summarize([])


def test_paired_lift_requires_identical_keys():
    t = {("a", 0): 1.0, ("a", 1): 1.0, ("b", 0): 1.0}
    c = {("a", 0): 0.0, ("a", 1): 1.0, ("b", 0): 0.0}
    lift = paired_lift(t, c, resamples=999)
    assert lift.mean == pytest.approx(2 / 3)
    assert lift.pairs == 3 and lift.groups == 2
    assert lift.boot_low <= lift.mean <= lift.boot_high
    with pytest.raises(PairingError):
        paired_lift(t, {k: v for k, v in list(c.items())[:2]})
    with pytest.raises(ValueError):
        paired_lift({}, {})


def test_paired_lift_excludes_zero_when_uniformly_positive():
    t = {(g, i): 1.0 for g in range(6) for i in range(4)}
    c = {(g, i): float(i == 0) for g in range(6) for i in range(4)}
    lift = paired_lift(t, c, resamples=999)
    assert lift.excludes_zero and lift.mean == pytest.approx(0.75)

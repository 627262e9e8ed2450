import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpdeplan import Outcome, basin_partition, build_graph, builtin_g7, greedy_step, rollout, solve
from gpdeplan.planner import (
    RolloutResult,
    classify_failures,
    format_rollout_record,
    parse_rollout_record,
    successor_map,
)
from tests.util import connected_graphs

values_st = st.lists(st.floats(-10, 10, allow_nan=False), min_size=1)


def brute_rollout(graph, values, goal, start):
    """Reference walk: argmin by (value, id), stop at goal or first revisit."""
    path, seen, x = [start], {start}, start
    while x != goal:
        nbrs = [int(y) for y in graph.neighbours(x)]
        x = min(nbrs, key=lambda y: (values[y], y))
        path.append(x)
        if x in seen:
            return "loop", path
        seen.add(x)
    return "reached", path


@given(connected_graphs(min_n=2, max_n=14), st.data())
@settings(max_examples=80, deadline=None)
def test_rollout_matches_reference(g, data):
    n = g.vertex_count
    values = np.array(data.draw(st.lists(st.integers(0, 4), min_size=n, max_size=n)), dtype=float)
    goal = data.draw(st.integers(0, n - 1))
    bp = basin_partition(g, values, goal)
    for s in range(n):
        tag, path = brute_rollout(g, values, goal, s)
        r = rollout(g, values, goal, s)
        assert r.outcome.value == tag and list(r.visited) == path
        assert bp.rollout(s) == r
        assert bp.reaches[s] == (tag == "reached")
        if r.outcome is Outcome.LOOP:
            i = r.visited.index(r.visited[-1])
            assert r.cycle == r.visited[i:-1]
            assert set(r.cycle) == set(bp.cycles[bp.fate[s]])


def test_greedy_tie_breaks_to_smallest_id():
    g = build_graph(4, [(0, 3), (0, 1), (0, 2)])
    assert greedy_step(g, np.array([9.0, 1.0, 1.0, 1.0]), 3, 0) == 1
    assert greedy_step(g, np.zeros(4), 3, 3) == 3


@given(connected_graphs(min_n=2, max_n=14), st.data())
@settings(max_examples=60, deadline=None)
def test_tie_tolerance_absorbs_round_off(g, data):
    n = g.vertex_count
    exact = np.array(data.draw(st.lists(st.integers(0, 4), min_size=n, max_size=n)), dtype=float)
    noise = np.array(data.draw(st.lists(st.floats(-4e-7, 4e-7), min_size=n, max_size=n)))
    goal = data.draw(st.integers(0, n - 1))
    ref = successor_map(g, exact, goal)
    assert np.array_equal(successor_map(g, exact + noise, goal, tie_tol=1e-6), ref)
    for x in range(n):
        assert greedy_step(g, exact + noise, goal, x, tie_tol=1e-6) == ref[x]
        assert rollout(g, exact + noise, goal, x, tie_tol=1e-6) == rollout(g, exact, goal, x)


def test_weighted_step_adds_costs():
    g = build_graph(3, [(0, 1), (0, 2)], [5.0, 1.0])
    # Q(1) = 5 + 0, Q(2) = 1 + 3
    assert greedy_step(g, np.array([0.0, 0.0, 3.0]), 1, 0) == 2


def test_g7_rollouts():
    g, bc, _ = builtin_g7()
    lab = bc.labelled.tolist()
    h = solve(g, bc, "harmonic")
    a = solve(g, bc, "amle")
    name = g.label_of
    r_a = rollout(g, a, bc.goal, g.index_of(4), lab)
    assert [name(v) for v in r_a.visited] == [4, 3, 0] and r_a.reached and r_a.steps == 2
    r_h = rollout(g, h, bc.goal, g.index_of(4), lab)
    assert r_h.visited[1] == g.index_of(1)


def test_boundary_touching_cycle_is_flagged():
    # 1 - 2 - 3 cycle-ish path with labelled 2 holding a low label so 1 and 3 bounce on it
    g = build_graph(5, [(0, 4), (4, 1), (1, 2), (2, 3), (3, 4)])
    values = np.array([0.0, 2.0, 0.5, 2.0, 3.0])
    r = rollout(g, values, 0, 1, labelled=[0, 2])
    assert r.outcome is Outcome.LOOP
    assert set(r.cycle) == {1, 2} and r.boundary_touching
    counts = classify_failures([r], labelled=[0, 2], goal=0)
    assert (counts.interior, counts.boundary_touching) == (0, 1)
    r2 = rollout(g, values, 0, 1, labelled=[0])
    assert classify_failures([r2]).interior == 1


def test_classify_rejects_inconsistent_flags_and_overrun():
    bad = RolloutResult(1, Outcome.LOOP, (1, 2, 1), (1, 2), False)
    with pytest.raises(ValueError):
        classify_failures([bad], labelled=[0, 2], goal=0)
    with pytest.raises(RuntimeError):
        classify_failures([RolloutResult(1, Outcome.OVERRUN, (1,))])


@given(connected_graphs(min_n=2, max_n=12), st.data())
@settings(max_examples=60, deadline=None)
def test_basin_partition_conservation(g, data):
    n = g.vertex_count
    values = np.array(data.draw(st.lists(st.floats(0, 5, allow_nan=False), min_size=n, max_size=n)))
    goal = data.draw(st.integers(0, n - 1))
    lab = data.draw(st.lists(st.integers(0, n - 1), unique=True))
    bp = basin_partition(g, values, goal, lab)
    results = [bp.rollout(s) for s in range(n) if s != goal]
    fails = classify_failures(results, labelled=lab, goal=goal)
    assert fails.total == sum(not r.reached for r in results)
    assert bp.failure_rate == pytest.approx(fails.total / max(1, n - 1))
    succ = successor_map(g, values, goal)
    for c, cyc in enumerate(bp.cycles):
        assert cyc[0] == min(cyc)
        for i, v in enumerate(cyc):
            assert succ[v] == cyc[(i + 1) % len(cyc)]


@given(connected_graphs(min_n=2, max_n=10), st.data())
@settings(max_examples=50, deadline=None)
def test_rollout_record_round_trip(g, data):
    n = g.vertex_count
    values = np.array(data.draw(st.lists(st.integers(0, 3), min_size=n, max_size=n)), dtype=float)
    goal = data.draw(st.integers(0, n - 1))
    lab = data.draw(st.lists(st.integers(0, n - 1), unique=True))
    for s in range(n):
        r = rollout(g, values, goal, s, lab)
        assert parse_rollout_record(format_rollout_record(r)) == r


def test_rollout_record_rejects_bad_step_count():
    with pytest.raises(ValueError):
        parse_rollout_record("1\treached\t5\t-\t0\t1,0")

"""Deterministic argmin-Q greedy planner, rollouts, basins and failure classes."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numba
import numpy as np

from .graph import Graph

__all__ = [
    "Outcome",
    "RolloutResult",
    "BasinPartition",
    "FailureCounts",
    "greedy_step",
    "successor_map",
    "rollout",
    "basin_partition",
    "classify_failures",
    "format_rollout_record",
    "parse_rollout_record",
    "ROLLOUT_HEADER",
]


class Outcome(str, enum.Enum):
    REACHED = "reached"
    LOOP = "loop"
    OVERRUN = "overrun"


@dataclass(frozen=True)
class RolloutResult:
    """One greedy rollout.

    ``visited`` starts at ``start``; for a loop it ends with the first
    repeated vertex, so ``cycle`` is ``visited[i:-1]`` where ``i`` is the first
    occurrence of that vertex.
    """

    start: int
    outcome: Outcome
    visited: tuple[int, ...]
    cycle: tuple[int, ...] = ()
    boundary_touching: bool = False

    @property
    def reached(self) -> bool:
        return self.outcome is Outcome.REACHED

    @property
    def steps(self) -> int:
        return len(self.visited) - 1

    @property
    def decisions(self) -> tuple[int, ...]:
        """Distinct non-goal states at which the planner chose an action."""
        return self.visited[:-1]


def _values(field_or_values) -> np.ndarray:
    vals = getattr(field_or_values, "values", field_or_values)
    return np.asarray(vals, dtype=float)


def greedy_step(graph: Graph, values, goal: int, state: int, tie_tol: float = 0.0) -> int:
    """Argmin over neighbours of ``w(state, y) + value(y)``; smallest id wins ties.

    Q-values within ``tie_tol`` of the minimum count as tied.
    """
    if state == goal:
        return goal
    nbrs = graph.neighbours(state)
    if len(nbrs) == 0:
        raise ValueError(f"state {state} has no neighbours")
    vals = _values(values)[nbrs]
    if graph.costs is not None:
        vals = vals + graph.neighbour_costs(state)
    return int(nbrs[int(np.argmax(vals <= vals.min() + tie_tol))])


@numba.njit(cache=True)
def _successors(indptr, indices, costs, weighted, values, goal, tie_tol):
    n = indptr.shape[0] - 1
    out = np.empty(n, dtype=np.int64)
    for x in range(n):
        if x == goal or indptr[x] == indptr[x + 1]:
            out[x] = x if x == goal else -1
            continue
        bq = np.inf
        for k in range(indptr[x], indptr[x + 1]):
            q = values[indices[k]] + (costs[k] if weighted else 0.0)
            if q < bq:
                bq = q
        # neighbours are sorted, so the first one within tolerance has the smallest id
        for k in range(indptr[x], indptr[x + 1]):
            if values[indices[k]] + (costs[k] if weighted else 0.0) <= bq + tie_tol:
                out[x] = indices[k]
                break
    return out


def successor_map(graph: Graph, values, goal: int, tie_tol: float = 0.0) -> np.ndarray:
    """Greedy successor of every vertex (``-1`` marks isolated non-goal vertices)."""
    vals = _values(values)
    if len(vals) != graph.vertex_count:
        raise ValueError("value field does not match the graph")
    weighted = graph.costs is not None
    costs = graph.costs if weighted else np.zeros(0)
    return _successors(graph.indptr, graph.indices, costs, weighted, vals, int(goal), float(tie_tol))


def _walk(succ: np.ndarray, goal: int, start: int, labelled: frozenset[int]) -> RolloutResult:
    n = len(succ)
    seen: dict[int, int] = {}
    path = [start]
    x = start
    while x != goal:
        seen[x] = len(path) - 1
        if len(path) > n + 1:
            return RolloutResult(start, Outcome.OVERRUN, tuple(path))
        y = int(succ[x])
        if y < 0:
            raise ValueError(f"state {x} has no neighbours")
        path.append(y)
        if y in seen:
            cycle = tuple(path[seen[y] : -1])
            touching = any(v in labelled and v != goal for v in cycle)
            return RolloutResult(start, Outcome.LOOP, tuple(path), cycle, touching)
        x = y
    return RolloutResult(start, Outcome.REACHED, tuple(path))


def rollout(graph: Graph, values, goal: int, start: int, labelled=(), tie_tol: float = 0.0) -> RolloutResult:
    """Iterate the greedy rule from ``start`` until the goal or a first revisit.

    ``labelled`` is the labelled set used to flag boundary-touching cycles.
    """
    vals = _values(values)
    n = graph.vertex_count
    labelled = frozenset(int(v) for v in labelled)
    seen: dict[int, int] = {}
    path = [int(start)]
    x = int(start)
    while x != goal:
        seen[x] = len(path) - 1
        if len(path) > n + 1:
            return RolloutResult(int(start), Outcome.OVERRUN, tuple(path))
        y = greedy_step(graph, vals, goal, x, tie_tol)
        path.append(y)
        if y in seen:
            cycle = tuple(path[seen[y] : -1])
            touching = any(v in labelled and v != goal for v in cycle)
            return RolloutResult(int(start), Outcome.LOOP, tuple(path), cycle, touching)
        x = y
    return RolloutResult(int(start), Outcome.REACHED, tuple(path))


@dataclass(frozen=True, eq=False)
class BasinPartition:
    """Fate of every vertex under the greedy map.

    ``fate[v]`` is ``-1`` if the orbit of ``v`` reaches the goal, else the id
    of the limit cycle it enters. ``cycles[c]`` lists that cycle's vertices in
    orbit order starting from its smallest vertex.
    """

    goal: int
    successors: np.ndarray
    fate: np.ndarray
    cycles: tuple[tuple[int, ...], ...]
    cycle_touching: tuple[bool, ...]
    labelled: frozenset[int] = field(default_factory=frozenset)

    @property
    def reaches(self) -> np.ndarray:
        return self.fate < 0

    @property
    def failure_rate(self) -> float:
        """Share of non-goal starts whose orbit never reaches the goal."""
        n = len(self.fate)
        if n <= 1:
            return 0.0
        return float(np.count_nonzero(self.fate >= 0)) / (n - 1)

    def rollout(self, start: int) -> RolloutResult:
        return _walk(self.successors, self.goal, int(start), self.labelled)


def basin_partition(graph: Graph, values, goal: int, labelled=(), tie_tol: float = 0.0) -> BasinPartition:
    """Run the greedy map from every vertex with memoised fates."""
    succ = successor_map(graph, values, goal, tie_tol)
    if np.any(succ < 0):
        raise ValueError(f"state {int(np.flatnonzero(succ < 0)[0])} has no neighbours")
    n = graph.vertex_count
    labelled = frozenset(int(v) for v in labelled)
    fate = np.full(n, -2, dtype=np.int64)
    fate[goal] = -1
    cycles: list[tuple[int, ...]] = []
    touching: list[bool] = []
    on_path = np.full(n, -1, dtype=np.int64)
    for s in range(n):
        if fate[s] != -2:
            continue
        path = []
        x = s
        while fate[x] == -2 and on_path[x] < 0:
            on_path[x] = len(path)
            path.append(x)
            x = int(succ[x])
        if fate[x] == -2:
            cyc = path[on_path[x] :]
            i = int(np.argmin(cyc))
            cyc = tuple(cyc[i:] + cyc[:i])
            cid = len(cycles)
            cycles.append(cyc)
            touching.append(any(v in labelled and v != goal for v in cyc))
            result = cid
        else:
            result = int(fate[x])
        for v in path:
            fate[v] = result
            on_path[v] = -1
    fate.setflags(write=False)
    return BasinPartition(int(goal), succ, fate, tuple(cycles), tuple(touching), labelled)


@dataclass(frozen=True)
class FailureCounts:
    interior: int = 0
    boundary_touching: int = 0

    @property
    def total(self) -> int:
        return self.interior + self.boundary_touching

    @property
    def boundary_share(self) -> float:
        return self.boundary_touching / self.total if self.total else 0.0


def classify_failures(results, labelled=None, goal: int | None = None) -> FailureCounts:
    """Split loop outcomes into interior and boundary-touching cycles.

    When ``labelled`` is given the flag is recomputed from the cycle, which
    must agree with the flag stored on each result.
    """
    interior = touching = 0
    lab = None if labelled is None else frozenset(int(v) for v in labelled)
    for r in results:
        if r.outcome is Outcome.OVERRUN:
            raise RuntimeError(f"rollout from {r.start} overran without revisit")
        if r.outcome is not Outcome.LOOP:
            continue
        flag = r.boundary_touching
        if lab is not None:
            flag = any(v in lab and v != goal for v in r.cycle)
            if flag != r.boundary_touching:
                raise ValueError(f"inconsistent boundary-touching flag for start {r.start}")
        if flag:
            touching += 1
        else:
            interior += 1
    return FailureCounts(interior, touching)


ROLLOUT_HEADER = "start\toutcome\tsteps\tcycle\tboundary_touching\tvisited"


def _ints(seq) -> str:
    return ",".join(str(v) for v in seq) if len(seq) else "-"


def _parse_ints(text: str) -> tuple[int, ...]:
    return () if text == "-" else tuple(int(v) for v in text.split(","))


def format_rollout_record(r: RolloutResult) -> str:
    return "\t".join(
        [str(r.start), r.outcome.value, str(r.steps), _ints(r.cycle), str(int(r.boundary_touching)), _ints(r.visited)]
    )


def parse_rollout_record(line: str) -> RolloutResult:
    start, tag, steps, cycle, touching, visited = line.rstrip("\n").split("\t")
    r = RolloutResult(int(start), Outcome(tag), _parse_ints(visited), _parse_ints(cycle), touching == "1")
    if r.steps != int(steps):
        raise ValueError(f"step count {steps} disagrees with the visited path")
    return r

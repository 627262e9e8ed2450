"""Problem instances: maze layouts, refinement, sparse labels, G7, lattice candidates."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from .graph import DisconnectedGraphError, DistanceField, Graph, build_graph, shortest_path_distances
from .rng import make_rng

__all__ = [
    "MazeLayout",
    "BoundaryCondition",
    "ExperimentConfig",
    "G7Expected",
    "parse_layout",
    "load_layout",
    "refine_to_graph",
    "sample_boundary",
    "boundary_from_mapping",
    "read_boundary_file",
    "builtin_g7",
    "random_lattice_candidate",
    "LAYOUT_NAMES",
]

LAYOUT_NAMES = ("medium", "large")


@dataclass(frozen=True, eq=False)
class MazeLayout:
    free_mask: np.ndarray
    name: str = ""

    @property
    def rows(self) -> int:
        return self.free_mask.shape[0]

    @property
    def cols(self) -> int:
        return self.free_mask.shape[1]

    @property
    def open_count(self) -> int:
        return int(self.free_mask.sum())


def parse_layout(text: str, name: str = "") -> MazeLayout:
    """Parse an ASCII grid where ``#`` is a wall and ``.`` is open."""
    lines = [ln.rstrip("\r") for ln in text.strip("\n").split("\n")]
    if not lines or not lines[0]:
        raise ValueError("empty layout")
    width = len(lines[0])
    for i, ln in enumerate(lines):
        if len(ln) != width:
            raise ValueError(f"ragged layout: row {i} has {len(ln)} cells, expected {width}")
        bad = set(ln) - {"#", "."}
        if bad:
            raise ValueError(f"illegal layout character(s) {sorted(bad)} in row {i}")
    mask = np.array([[c == "." for c in ln] for ln in lines], dtype=bool)
    if not mask.any():
        raise ValueError("layout has no open cells")
    mask.setflags(write=False)
    return MazeLayout(mask, name)


def load_layout(name_or_path: str) -> MazeLayout:
    """Load a shipped layout by name (``medium``, ``large``) or any layout file."""
    if name_or_path in LAYOUT_NAMES:
        text = resources.files("gpdeplan").joinpath("layouts", f"{name_or_path}.txt").read_text()
        return parse_layout(text, name_or_path)
    path = Path(name_or_path)
    return parse_layout(path.read_text(), path.stem)


def refine_to_graph(layout: MazeLayout, r: int) -> tuple[Graph, np.ndarray]:
    """Expand every open cell into an ``r x r`` block of 4-connected vertices.

    Vertices are numbered in row-major order of their fine-grid coordinates;
    the returned ``coords`` array holds those ``(row, col)`` coordinates.
    """
    if r < 1:
        raise ValueError("refinement r must be >= 1")
    fine = np.kron(layout.free_mask.astype(np.int8), np.ones((r, r), dtype=np.int8)).astype(bool)
    ids = -np.ones(fine.shape, dtype=np.int64)
    coords = np.argwhere(fine)
    ids[coords[:, 0], coords[:, 1]] = np.arange(len(coords))
    edges = []
    right = fine[:, :-1] & fine[:, 1:]
    for i, j in np.argwhere(right):
        edges.append((ids[i, j], ids[i, j + 1]))
    down = fine[:-1, :] & fine[1:, :]
    for i, j in np.argwhere(down):
        edges.append((ids[i, j], ids[i + 1, j]))
    graph = build_graph(len(coords), edges)
    if not shortest_path_distances(graph, 0).all_reachable:
        raise DisconnectedGraphError(f"layout {layout.name!r} has a disconnected open region")
    coords.setflags(write=False)
    return graph, coords


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    """Goal, labelled set (sorted, contains the goal) and the labels on it."""

    goal: int
    labelled: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.labelled) != len(self.values):
            raise ValueError("labelled vertices and values differ in length")
        if len(self.labelled) == 0:
            raise ValueError("labelled set must be non-empty")
        if np.any(np.diff(self.labelled) <= 0):
            raise ValueError("labelled vertices must be strictly increasing")
        if self.goal not in set(self.labelled.tolist()):
            raise ValueError("the goal must be labelled")

    @property
    def labels(self) -> dict[int, float]:
        return {int(v): float(y) for v, y in zip(self.labelled, self.values)}

    @property
    def labelled_set(self) -> frozenset[int]:
        return frozenset(int(v) for v in self.labelled)

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[self.labelled] = True
        return m

    def scaled(self, factor: float) -> "BoundaryCondition":
        return BoundaryCondition(self.goal, self.labelled, self.values * factor)

    def with_values(self, values) -> "BoundaryCondition":
        return BoundaryCondition(self.goal, self.labelled, np.asarray(values, dtype=float))


def boundary_from_mapping(goal: int, labels: Mapping[int, float]) -> BoundaryCondition:
    items = sorted((int(v), float(y)) for v, y in labels.items())
    labelled = np.array([v for v, _ in items], dtype=np.int64)
    values = np.array([y for _, y in items], dtype=float)
    return BoundaryCondition(int(goal), labelled, values)


def read_boundary_file(path: str | Path, goal: int) -> BoundaryCondition:
    """Read ``vertex value`` lines into a boundary condition for ``goal``.

    The goal is labelled 0 when the file does not list it.
    """
    labels = {}
    for ln in Path(path).read_text().splitlines():
        ln = ln.strip()
        if not ln or ln.startswith("#"):
            continue
        v, y = ln.split()[:2]
        labels[int(v)] = float(y)
    labels.setdefault(int(goal), 0.0)
    return boundary_from_mapping(goal, labels)


def sample_boundary(
    graph: Graph,
    dist: DistanceField,
    lf: float,
    seed: int | np.random.Generator,
    noise_bound: float = 0.0,
    override: Mapping[int, float] | None = None,
) -> BoundaryCondition:
    """Goal plus ``ceil(lf * (|V| - 1))`` uniformly sampled non-goal vertices.

    Labels are the true distances plus independent uniform noise in
    ``[-noise_bound, noise_bound]``; the goal label is always exactly 0.
    An ``override`` mapping bypasses sampling entirely.
    """
    if override is not None:
        return boundary_from_mapping(dist.goal, override)
    if not 0 < lf <= 1:
        raise ValueError(f"label fraction must lie in (0, 1], got {lf}")
    if noise_bound < 0:
        raise ValueError("noise_bound must be non-negative")
    dist.require_reachable()
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    n = graph.vertex_count
    goal = dist.goal
    others = np.array([v for v in range(n) if v != goal], dtype=np.int64)
    count = min(len(others), math.ceil(lf * (n - 1) - 1e-9))
    picked = rng.choice(others, size=count, replace=False) if count else np.array([], dtype=np.int64)
    labelled = np.sort(np.append(picked, goal)).astype(np.int64)
    values = dist.dist[labelled].astype(float)
    if noise_bound > 0:
        values = values + rng.uniform(-noise_bound, noise_bound, size=len(values))
    values[labelled == goal] = 0.0
    return BoundaryCondition(goal, labelled, values)


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of the experiment grid (plus method and solver budget)."""

    layout: str = "medium"
    refine: int = 4
    label_fraction: float = 0.02
    seed: int = 54
    method: str = "amle"
    sweeps: int = 20000
    tol: float = 1e-8
    relax: float = 0.05
    pairs: int = 128

    def __post_init__(self):
        if self.refine < 1:
            raise ValueError("refine must be >= 1")
        if not 0 < self.label_fraction <= 1:
            raise ValueError("label_fraction must lie in (0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        if self.pairs < 1:
            raise ValueError("pairs must be >= 1")

    @property
    def key(self) -> tuple:
        return (self.layout, self.refine, self.label_fraction, self.seed)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        types = {f.name: f.type for f in fields(cls)}
        casts = {"str": str, "int": int, "float": float}
        kwargs = {}
        for ln in text.splitlines():
            ln = ln.split("#", 1)[0].strip()
            if not ln:
                continue
            if "=" not in ln:
                raise ValueError(f"config line without '=': {ln!r}")
            k, v = (s.strip() for s in ln.split("=", 1))
            if k not in types:
                raise ValueError(f"unknown config key {k!r}")
            kwargs[k] = casts[types[k]](v)
        return cls(**kwargs)


@dataclass(frozen=True)
class G7Expected:
    harmonic_1: Fraction = Fraction(36, 29)
    harmonic_3: Fraction = Fraction(39, 29)
    amle_1: Fraction = Fraction(4, 3)
    amle_3: Fraction = Fraction(1)
    omega_1_7: Fraction = Fraction(12, 29)
    omega_3_7: Fraction = Fraction(13, 29)
    action_gap_4: Fraction = Fraction(1)
    local_error_amle_4: Fraction = Fraction(2, 3)
    local_error_harmonic_4: Fraction = Fraction(22, 29)


G7_LABELS = (0, 1, 3, 4, 5, 6, 7)
G7_EDGES = ((0, 3), (0, 5), (5, 1), (1, 4), (3, 4), (3, 6), (6, 7), (4, 7))


def builtin_g7() -> tuple[Graph, BoundaryCondition, G7Expected]:
    """The seven-vertex mechanism witness with goal 0 and labels {0: 0, 7: 3}.

    Vertices are relabelled densely in sorted order; ``graph.index_of`` maps
    the original names (0, 1, 3, 4, 5, 6, 7) to identifiers.
    """
    idx = {lab: i for i, lab in enumerate(G7_LABELS)}
    graph = build_graph(len(G7_LABELS), [(idx[u], idx[v]) for u, v in G7_EDGES], labels=G7_LABELS)
    boundary = boundary_from_mapping(idx[0], {idx[0]: 0.0, idx[7]: 3.0})
    return graph, boundary, G7Expected()


def random_lattice_candidate(rows: int, cols: int, seed: int | np.random.Generator) -> tuple[Graph, BoundaryCondition]:
    """Random connected induced subgraph of the ``rows x cols`` lattice.

    The boundary is the goal plus 1-4 further vertices labelled with their
    exact distance to the goal. ``graph.labels`` holds lattice cell indices.
    """
    if rows < 2 or cols < 2:
        raise ValueError("lattice must be at least 2 x 2")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    cells = rows * cols
    while True:
        keep_prob = rng.uniform(0.55, 0.95)
        keep = np.flatnonzero(rng.random(cells) < keep_prob)
        if len(keep) < 3:
            continue
        pos = {int(c): i for i, c in enumerate(keep)}
        edges = []
        for c in keep:
            r_, c_ = divmod(int(c), cols)
            if c_ + 1 < cols and int(c) + 1 in pos:
                edges.append((pos[int(c)], pos[int(c) + 1]))
            if r_ + 1 < rows and int(c) + cols in pos:
                edges.append((pos[int(c)], pos[int(c) + cols]))
        graph = build_graph(len(keep), edges, labels=tuple(int(c) for c in keep))
        if shortest_path_distances(graph, 0).all_reachable:
            break
    n = graph.vertex_count
    goal = int(rng.integers(n))
    dist = shortest_path_distances(graph, goal)
    extra = min(int(rng.integers(1, 5)), n - 1)
    others = np.array([v for v in range(n) if v != goal])
    picked = rng.choice(others, size=extra, replace=False)
    labels = {goal: 0.0}
    labels.update({int(v): float(dist.dist[v]) for v in picked})
    return graph, boundary_from_mapping(goal, labels)

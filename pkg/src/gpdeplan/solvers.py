"""Boundary-pinned Dirichlet extensions on graphs: harmonic, finite-p, AMLE.

All iterative solvers start from the constant field equal to the mean label
and sweep the interior in ascending vertex order with in-place updates.
Residuals are the method's local defect at interior vertices:

* harmonic: neighbour mean minus value,
* finite p: the exact one-vertex p-Laplacian update minus value,
* AMLE: neighbour midrange minus value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numba
import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as splinalg

from .graph import DisconnectedGraphError, DistanceField, Graph, _bfs
from .instances import BoundaryCondition

__all__ = [
    "ValueField",
    "HarmonicMeasure",
    "HarmonicMeasureSet",
    "parse_method",
    "solve",
    "solve_harmonic",
    "solve_harmonic_exact",
    "solve_p_picard",
    "solve_amle",
    "residual_field",
    "harmonic_measure",
    "nearest_label_field",
    "oracle_field",
    "write_value_field",
    "read_value_field",
    "AMLE_TOL",
    "HARMONIC_TOL",
    "PICARD_TOL",
    "PICARD_RELAX",
    "PICARD_SWEEPS",
]

HARMONIC_TOL = 1e-8
AMLE_TOL = 1e-8
PICARD_TOL = 1e-6
PICARD_RELAX = 0.05
PICARD_SWEEPS = 5000


@dataclass(frozen=True, eq=False)
class ValueField:
    values: np.ndarray
    method: str
    p: float
    sweeps_used: int = 0
    terminal_residual_inf: float = 0.0
    boundary_pinned: bool = True

    def __getitem__(self, v):
        return self.values[v]


def parse_method(method: str) -> tuple[str, float]:
    """Normalise a method descriptor to ``(kind, p)``.

    Accepts ``harmonic``, ``amle``, ``p=<v>`` (``p=inf`` is AMLE), ``nearest``
    and ``oracle``.
    """
    m = method.strip().lower()
    if m in ("harmonic", "amle", "nearest", "oracle"):
        return m, {"harmonic": 2.0, "amle": math.inf}.get(m, math.nan)
    if m.startswith("p="):
        p = float(m[2:])
        if math.isinf(p):
            return "amle", math.inf
        if not p >= 2:
            raise ValueError(f"p must be >= 2, got {p}")
        return "picard", p
    raise ValueError(f"unknown method {method!r}")


# --- kernels ---------------------------------------------------------------


@numba.njit(cache=True)
def _midrange(indptr, indices, u, x):
    lo = u[indices[indptr[x]]]
    hi = lo
    for k in range(indptr[x] + 1, indptr[x + 1]):
        v = u[indices[k]]
        if v < lo:
            lo = v
        elif v > hi:
            hi = v
    return 0.5 * (lo + hi)


@numba.njit(cache=True)
def _mean(indptr, indices, u, x):
    s = 0.0
    for k in range(indptr[x], indptr[x + 1]):
        s += u[indices[k]]
    return s / (indptr[x + 1] - indptr[x])


@numba.njit(cache=True)
def _p_local(indptr, indices, u, x, p):
    """Root of t -> sum_y |u_y - t|^(p-2) (u_y - t) by safeguarded Newton/bisection.

    Differences are normalised by the neighbour range so large ``p`` does not
    underflow; Newton starts from the current value and falls back to
    bisection whenever it leaves the bracket.
    """
    start, stop = indptr[x], indptr[x + 1]
    lo = u[indices[start]]
    hi = lo
    total = 0.0
    for k in range(start, stop):
        v = u[indices[k]]
        total += v
        if v < lo:
            lo = v
        if v > hi:
            hi = v
    scale = hi - lo
    if scale <= 0.0:
        return lo
    e = p - 2.0
    ie = int(e)
    integral = ie == e
    a = lo
    b = hi
    t = u[x]
    if not lo < t < hi:
        t = total / (stop - start)
    for _ in range(200):
        f = 0.0
        df = 0.0
        for k in range(start, stop):
            d = (u[indices[k]] - t) / scale
            w = abs(d) ** ie if integral else abs(d) ** e
            f += w * d
            df += w
        if f > 0.0:
            a = t
        elif f < 0.0:
            b = t
        else:
            return t
        tn = 0.5 * (a + b)
        if df > 0.0:
            cand = t + f * scale / ((p - 1.0) * df)
            if a < cand < b:
                tn = cand
        if abs(tn - t) <= 1e-15 * (scale + abs(t)) or b - a <= 1e-15 * (scale + abs(t)):
            return tn
        t = tn
    return t


@numba.njit(cache=True)
def _amle_sweeps(indptr, indices, u, interior, max_sweeps, tol):
    sweeps = 0
    while sweeps < max_sweeps:
        delta = 0.0
        for x in interior:
            new = _midrange(indptr, indices, u, x)
            d = abs(new - u[x])
            if d > delta:
                delta = d
            u[x] = new
        sweeps += 1
        if delta < tol:
            break
    return sweeps


@numba.njit(cache=True)
def _picard_sweeps(indptr, indices, u, interior, p, omega, max_sweeps, tol):
    sweeps = 0
    while sweeps < max_sweeps:
        delta = 0.0
        for x in interior:
            step = omega * (_p_local(indptr, indices, u, x, p) - u[x])
            if abs(step) > delta:
                delta = abs(step)
            u[x] += step
        sweeps += 1
        if delta < tol:
            break
    return sweeps


@numba.njit(cache=True)
def _residuals(indptr, indices, u, interior, kind, p):
    out = np.zeros(u.shape[0])
    for x in interior:
        if kind == 0:
            out[x] = _mean(indptr, indices, u, x) - u[x]
        elif kind == 1:
            out[x] = _p_local(indptr, indices, u, x, p) - u[x]
        else:
            out[x] = _midrange(indptr, indices, u, x) - u[x]
    return out


# --- helpers ---------------------------------------------------------------


def _check_problem(graph: Graph, boundary: BoundaryCondition) -> np.ndarray:
    if not graph.is_unit:
        raise ValueError("the Dirichlet solvers are defined on unit-cost graphs")
    if len(boundary.labelled) == 0:
        raise ValueError("labelled set must be non-empty")
    if boundary.labelled[-1] >= graph.vertex_count:
        raise ValueError("labelled vertex out of range")
    if np.any(_bfs(graph, boundary.labelled.tolist()) < 0):
        raise DisconnectedGraphError("an unlabelled component has no boundary contact")
    return np.flatnonzero(~boundary.mask(graph.vertex_count)).astype(np.int64)


def _initial(graph: Graph, boundary: BoundaryCondition) -> np.ndarray:
    u = np.full(graph.vertex_count, float(np.mean(boundary.values)))
    u[boundary.labelled] = boundary.values
    return u


_KIND = {"harmonic": 0, "picard": 1, "amle": 2}


def _sup(res: np.ndarray) -> float:
    return float(np.max(np.abs(res))) if res.size else 0.0


def residual_field(graph: Graph, boundary: BoundaryCondition, field: ValueField) -> np.ndarray:
    """Per-vertex local defect matched to ``field.method`` (zero on the boundary)."""
    if len(field.values) != graph.vertex_count:
        raise ValueError("value field does not match the graph")
    kind, p = parse_method(field.method)
    if kind not in _KIND:
        raise ValueError(f"no residual defined for method {field.method!r}")
    interior = np.flatnonzero(~boundary.mask(graph.vertex_count)).astype(np.int64)
    return _residuals(graph.indptr, graph.indices, np.asarray(field.values, dtype=float), interior, _KIND[kind], p)


# --- solvers ---------------------------------------------------------------


def _laplacian(graph: Graph) -> sparse.csr_matrix:
    n = graph.vertex_count
    adj = sparse.csr_matrix((np.ones(len(graph.indices)), graph.indices, graph.indptr), shape=(n, n))
    return (sparse.diags(graph.degrees.astype(float)) - adj).tocsr()


def solve_harmonic(graph: Graph, boundary: BoundaryCondition, tolerance: float = HARMONIC_TOL) -> ValueField:
    """Harmonic extension via a sparse direct solve of the interior Laplace system."""
    interior = _check_problem(graph, boundary)
    u = _initial(graph, boundary)
    if len(interior):
        lap = _laplacian(graph)
        l_ii = lap[interior][:, interior].tocsc()
        rhs = -(lap[interior][:, boundary.labelled] @ boundary.values)
        u[interior] = splinalg.spsolve(l_ii, rhs)
    u.setflags(write=False)
    res = _residuals(graph.indptr, graph.indices, u, interior, 0, 2.0)
    field = ValueField(u, "harmonic", 2.0, 0, _sup(res))
    if field.terminal_residual_inf > tolerance:
        raise ArithmeticError(f"harmonic residual {field.terminal_residual_inf:.3g} exceeds {tolerance:.3g}")
    return field


def solve_harmonic_exact(graph: Graph, labels: dict[int, Fraction | int]) -> dict[int, Fraction]:
    """Harmonic extension in exact rational arithmetic (small graphs only)."""
    n = graph.vertex_count
    labels = {int(v): Fraction(y) for v, y in labels.items()}
    interior = [v for v in range(n) if v not in labels]
    pos = {v: i for i, v in enumerate(interior)}
    m = len(interior)
    rows = []
    for x in interior:
        row = [Fraction(0)] * (m + 1)
        row[pos[x]] = Fraction(graph.degree(x))
        for y in graph.neighbours(x):
            y = int(y)
            if y in labels:
                row[m] += labels[y]
            else:
                row[pos[y]] -= 1
        rows.append(row)
    for c in range(m):
        piv = next(r for r in range(c, m) if rows[r][c] != 0)
        rows[c], rows[piv] = rows[piv], rows[c]
        for r in range(m):
            if r != c and rows[r][c] != 0:
                f = rows[r][c] / rows[c][c]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[c])]
    out = dict(labels)
    for x in interior:
        i = pos[x]
        out[x] = rows[i][m] / rows[i][i]
    return out


def solve_p_picard(
    graph: Graph,
    boundary: BoundaryCondition,
    p: float,
    max_sweeps: int = PICARD_SWEEPS,
    relaxation: float = PICARD_RELAX,
    tolerance: float = PICARD_TOL,
) -> ValueField:
    """Relaxed Picard sweeps of the local p-Laplacian update.

    Stops when the largest relaxed update of a sweep falls below
    ``tolerance`` or after ``max_sweeps`` sweeps.
    """
    if not p >= 2 or math.isinf(p):
        raise ValueError(f"finite p >= 2 required, got {p}")
    if not 0 < relaxation <= 1:
        raise ValueError(f"relaxation must lie in (0, 1], got {relaxation}")
    interior = _check_problem(graph, boundary)
    u = _initial(graph, boundary)
    sweeps = 0
    if len(interior):
        sweeps = _picard_sweeps(graph.indptr, graph.indices, u, interior, float(p), float(relaxation), int(max_sweeps), float(tolerance))
    res = _residuals(graph.indptr, graph.indices, u, interior, 1, float(p))
    u.setflags(write=False)
    return ValueField(u, f"p={p:g}", float(p), int(sweeps), _sup(res))


def solve_amle(
    graph: Graph,
    boundary: BoundaryCondition,
    max_sweeps: int = 100000,
    tolerance: float = AMLE_TOL,
) -> ValueField:
    """Gauss-Seidel midrange iteration towards the graph AMLE.

    Stops once a sweep moves no vertex by ``tolerance`` or more; the
    reported residual is recomputed from the final field.
    """
    interior = _check_problem(graph, boundary)
    u = _initial(graph, boundary)
    sweeps = 0
    if len(interior):
        sweeps = _amle_sweeps(graph.indptr, graph.indices, u, interior, int(max_sweeps), float(tolerance))
    res = _residuals(graph.indptr, graph.indices, u, interior, 2, math.inf)
    u.setflags(write=False)
    return ValueField(u, "amle", math.inf, int(sweeps), _sup(res))


def nearest_label_field(graph: Graph, boundary: BoundaryCondition) -> ValueField:
    """Label of the hop-nearest labelled vertex (ties: smaller label, then smaller id)."""
    n = graph.vertex_count
    hops = np.full(n, -1, dtype=np.int64)
    key: list[tuple[float, int] | None] = [None] * n
    frontier = []
    for v, y in zip(boundary.labelled.tolist(), boundary.values.tolist()):
        hops[v] = 0
        key[v] = (y, v)
        frontier.append(v)
    depth = 0
    while frontier:
        depth += 1
        nxt = {}
        for x in frontier:
            for y in graph.neighbours(x):
                y = int(y)
                if hops[y] < 0 or hops[y] == depth:
                    hops[y] = depth
                    if y not in nxt or key[x] < nxt[y]:
                        nxt[y] = key[x]
        for y, k in nxt.items():
            key[y] = k
        frontier = sorted(nxt)
    if any(k is None for k in key):
        raise DisconnectedGraphError("some vertex cannot reach a labelled vertex")
    vals = np.array([k[0] for k in key], dtype=float)
    vals.setflags(write=False)
    return ValueField(vals, "nearest", math.nan)


def oracle_field(dist: DistanceField) -> ValueField:
    dist.require_reachable()
    vals = np.array(dist.dist, dtype=float)
    vals.setflags(write=False)
    return ValueField(vals, "oracle", math.nan)


def solve(
    graph: Graph,
    boundary: BoundaryCondition,
    method: str,
    *,
    sweeps: int | None = None,
    tol: float | None = None,
    relax: float | None = None,
    dist: DistanceField | None = None,
) -> ValueField:
    """Dispatch on a method descriptor with optional budget overrides."""
    kind, p = parse_method(method)
    if kind == "harmonic":
        return solve_harmonic(graph, boundary, tol if tol is not None else HARMONIC_TOL)
    if kind == "amle":
        return solve_amle(graph, boundary, sweeps if sweeps is not None else 100000, tol if tol is not None else AMLE_TOL)
    if kind == "picard":
        return solve_p_picard(
            graph,
            boundary,
            p,
            sweeps if sweeps is not None else PICARD_SWEEPS,
            relax if relax is not None else PICARD_RELAX,
            tol if tol is not None else PICARD_TOL,
        )
    if kind == "nearest":
        return nearest_label_field(graph, boundary)
    if dist is None:
        raise ValueError("the oracle surrogate needs the true distance field")
    return oracle_field(dist)


# --- harmonic measure ------------------------------------------------------


@dataclass(frozen=True)
class HarmonicMeasure:
    source: int
    weights: dict[int, float]


@dataclass(frozen=True, eq=False)
class HarmonicMeasureSet:
    """``omega[v, j]``: probability that a walk from ``v`` first hits ``labelled[j]``."""

    labelled: np.ndarray
    omega: np.ndarray

    def __getitem__(self, v: int) -> HarmonicMeasure:
        return HarmonicMeasure(int(v), {int(z): float(w) for z, w in zip(self.labelled, self.omega[v])})

    def weight(self, v: int, z: int) -> float:
        j = int(np.searchsorted(self.labelled, z))
        if j >= len(self.labelled) or self.labelled[j] != z:
            raise KeyError(f"{z} is not a labelled vertex")
        return float(self.omega[v, j])

    def reconstruct(self, values: np.ndarray) -> np.ndarray:
        """``sum_z omega_v(z) * values(z)`` for every vertex ``v``."""
        return self.omega @ np.asarray(values, dtype=float)


def harmonic_measure(graph: Graph, labelled) -> HarmonicMeasureSet:
    """Hitting distribution on ``labelled`` for the simple random walk from every vertex."""
    labelled = np.unique(np.asarray(list(labelled), dtype=np.int64))
    if len(labelled) == 0:
        raise ValueError("labelled set must be non-empty")
    n = graph.vertex_count
    if np.any(_bfs(graph, labelled.tolist()) < 0):
        raise DisconnectedGraphError("an unlabelled component has no boundary contact")
    mask = np.zeros(n, dtype=bool)
    mask[labelled] = True
    interior = np.flatnonzero(~mask)
    omega = np.zeros((n, len(labelled)))
    omega[labelled, np.arange(len(labelled))] = 1.0
    if len(interior):
        lap = _laplacian(graph)
        lu = splinalg.splu(lap[interior][:, interior].tocsc())
        rhs = -(lap[interior][:, labelled]).toarray()
        omega[interior] = lu.solve(rhs)
    omega.setflags(write=False)
    return HarmonicMeasureSet(labelled, omega)


# --- export ----------------------------------------------------------------


def write_value_field(field: ValueField, path: str | Path) -> None:
    header = f"# method={field.method} sweeps={field.sweeps_used} residual={field.terminal_residual_inf!r}\n"
    body = "".join(f"{v} {x!r}\n" for v, x in enumerate(field.values.tolist()))
    Path(path).write_text(header + body)


def read_value_field(path: str | Path) -> ValueField:
    lines = Path(path).read_text().splitlines()
    meta = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split())
    pairs = [ln.split() for ln in lines[1:] if ln.strip()]
    values = np.zeros(len(pairs))
    for v, x in pairs:
        values[int(v)] = float(x)
    kind, p = parse_method(meta["method"])
    return ValueField(values, meta["method"], p, int(meta["sweeps"]), float(meta["residual"]))

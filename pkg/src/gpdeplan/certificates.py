"""Local admissibility certificates and per-decision audit records.

Everything here compares a surrogate ``ValueField`` against the exact
``DistanceField``. On unit-cost graphs the surrogate Q-values are compared
as raw neighbour values (the common unit edge cost cancels), which is exactly
what the greedy planner does.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .graph import DistanceField, GeometryClass, Graph, fill_distance, geometry_classify, subdivide
from .instances import BoundaryCondition
from .planner import RolloutResult, greedy_step, rollout
from .solvers import HarmonicMeasureSet, ValueField, solve_amle, solve_harmonic

__all__ = [
    "DecisionRecord",
    "CertifiedRollout",
    "FillCertificate",
    "AntiAdmissibility",
    "KendallResult",
    "Separation",
    "ExtremaScan",
    "BadTail",
    "SubdivisionRow",
    "true_q",
    "surrogate_q",
    "action_gap",
    "local_error",
    "half_gap_test",
    "surrogate_argmin",
    "operator_defects",
    "certify_rollout",
    "amle_fill_certificate",
    "harmonic_anti_admissibility",
    "neighbour_kendall_tau",
    "local_separation",
    "strict_extrema_scan",
    "bad_tail_diagnostic",
    "subdivision_margin_check",
    "decision_record",
    "write_decision_records",
    "read_decision_records",
]


def _vals(field) -> np.ndarray:
    return np.asarray(getattr(field, "values", field), dtype=float)


def _require_non_goal(dist: DistanceField, state: int) -> None:
    if state == dist.goal:
        raise ValueError("the goal is absorbing and has no decision")


def true_q(graph: Graph, dist: DistanceField, state: int) -> np.ndarray:
    """``w(s, y) + d_g(y)`` for ``y`` in ``N(s)`` (neighbour-id order)."""
    nbrs = graph.neighbours(state)
    dist.require_reachable(nbrs.tolist())
    return graph.neighbour_costs(state) + dist.dist[nbrs]


def surrogate_q(graph: Graph, field, state: int) -> np.ndarray:
    """Surrogate Q-values as compared by the planner (raw values on unit graphs)."""
    q = _vals(field)[graph.neighbours(state)]
    return q if graph.is_unit else q + graph.neighbour_costs(state)


def action_gap(graph: Graph, dist: DistanceField, state: int) -> tuple[tuple[int, ...], float]:
    """True-best neighbour set ``A*`` and the action gap (``inf`` if all are optimal)."""
    _require_non_goal(dist, state)
    nbrs = graph.neighbours(state)
    if len(nbrs) == 0:
        raise ValueError(f"state {state} has no neighbours")
    q = true_q(graph, dist, state)
    best = q.min()
    opt = q == best
    a_star = tuple(int(y) for y in nbrs[opt])
    gap = float(q[~opt].min() - best) if (~opt).any() else math.inf
    return a_star, gap


def local_error(graph: Graph, dist: DistanceField, field, state: int) -> float:
    _require_non_goal(dist, state)
    nbrs = graph.neighbours(state)
    dist.require_reachable(nbrs.tolist())
    return float(np.max(np.abs(_vals(field)[nbrs] - dist.dist[nbrs])))


def half_gap_test(eps: float, gap: float) -> bool:
    """Strict half-gap condition ``eps < gap / 2``."""
    if math.isinf(gap):
        return True
    return bool(eps < gap / 2)


def surrogate_argmin(graph: Graph, field, state: int) -> tuple[int, ...]:
    q = surrogate_q(graph, field, state)
    return tuple(int(y) for y in graph.neighbours(state)[q == q.min()])


def operator_defects(graph: Graph, dist: DistanceField, x: int) -> tuple[Fraction, Fraction]:
    """Exact midrange and averaging defects of ``d_g`` at a non-goal vertex.

    Returns ``(mid - d(x), mean - d(x))`` where ``mid`` is the neighbour
    midrange and ``mean`` the neighbour average, both over hop distances.
    """
    _require_non_goal(dist, x)
    if not graph.is_unit:
        raise ValueError("operator defects are defined on unit-cost graphs")
    nd = [dist.hops(int(y)) for y in graph.neighbours(x)]
    dx = dist.hops(x)
    return Fraction(min(nd) + max(nd), 2) - dx, Fraction(sum(nd), len(nd)) - dx


# --- rollout certificates --------------------------------------------------


@dataclass(frozen=True)
class CertifiedRollout:
    rollout: RolloutResult
    steps: tuple[tuple[int, float, float, bool], ...]  # (state, eps, gap, pass)

    @property
    def certified(self) -> bool:
        return all(ok for *_, ok in self.steps)

    @property
    def status(self) -> str:
        return "certified-success" if self.certified else "uncertified"


def certify_rollout(graph: Graph, dist: DistanceField, field, start: int, labelled=()) -> CertifiedRollout:
    """Walk the greedy rollout and test the half-gap condition at every decision."""
    r = rollout(graph, field, dist.goal, start, labelled)
    steps = []
    for s in r.decisions:
        eps = local_error(graph, dist, field, s)
        _, gap = action_gap(graph, dist, s)
        steps.append((int(s), eps, gap, half_gap_test(eps, gap)))
    return CertifiedRollout(r, tuple(steps))


@dataclass(frozen=True)
class FillCertificate:
    passed: bool
    rollout: RolloutResult
    steps: tuple[tuple[int, float, float, float], ...]  # (state, fill, gap, slack)


def amle_fill_certificate(
    graph: Graph,
    boundary: BoundaryCondition,
    dist: DistanceField,
    start: int,
    eps_lab: float = 0.0,
    lipschitz: float = 1.0,
    field: ValueField | None = None,
) -> FillCertificate:
    """Label-density certificate ``eps_lab + 2 L h(N(s)) < gap / 2`` along the AMLE rollout.

    Slack is ``gap / 2 - (eps_lab + 2 L h)``; the certificate passes iff every
    slack is strictly positive.
    """
    if not graph.is_unit:
        raise ValueError("the fill-distance certificate is defined on unit-cost graphs")
    if field is None:
        field = solve_amle(graph, boundary)
    r = rollout(graph, field, dist.goal, start, boundary.labelled.tolist())
    steps = []
    for s in r.decisions:
        h = fill_distance(graph, graph.neighbours(s).tolist(), boundary.labelled.tolist())
        _, gap = action_gap(graph, dist, s)
        slack = math.inf if math.isinf(gap) else gap / 2 - (eps_lab + 2 * lipschitz * h)
        steps.append((int(s), float(h), gap, slack))
    return FillCertificate(all(sl > 0 for *_, sl in steps), r, tuple(steps))


# --- harmonic anti-admissibility -------------------------------------------


@dataclass(frozen=True)
class AntiAdmissibility:
    fires: bool
    witness: int | None
    margin: float  # most negative worst-case sum over b, +inf when no competitor
    q_form_fires: bool
    q_form_margin: float

    @property
    def consistent(self) -> bool:
        return self.fires == self.q_form_fires


def _anti_scan(nbrs, a_star, score, tie: float) -> tuple[bool, int | None, float]:
    best_b, best_m = None, math.inf
    for b in nbrs:
        b = int(b)
        if b in a_star:
            continue
        m = max(score[b] - score[a] for a in a_star)
        if m < best_m:
            best_b, best_m = b, m
    return bool(best_m < -tie), best_b, float(best_m)


def harmonic_anti_admissibility(
    graph: Graph,
    boundary: BoundaryCondition,
    measures: HarmonicMeasureSet,
    dist: DistanceField,
    state: int,
    harmonic: ValueField | None = None,
    tie: float = 1e-10,
) -> AntiAdmissibility:
    """Search for a suboptimal ``b`` the harmonic planner strictly prefers to all of ``A*``.

    The measure form scores ``sum_z omega_v(z) Y(z)``; the Q form reads the
    harmonic field directly. Differences within ``tie`` count as ties.
    """
    if not graph.is_unit:
        raise ValueError("anti-admissibility is evaluated on unit-cost graphs")
    a_star, _ = action_gap(graph, dist, state)
    nbrs = graph.neighbours(state)
    if not np.array_equal(measures.labelled, boundary.labelled):
        raise ValueError("harmonic measures were computed for a different labelled set")
    recon = measures.reconstruct(boundary.values)
    fires, witness, margin = _anti_scan(nbrs, a_star, recon, tie)
    if harmonic is None:
        harmonic = solve_harmonic(graph, boundary)
    q_fires, _, q_margin = _anti_scan(nbrs, a_star, _vals(harmonic), tie)
    return AntiAdmissibility(fires, witness if fires else None, margin, q_fires, q_margin)


# --- Kendall tau -----------------------------------------------------------


@dataclass(frozen=True)
class KendallResult:
    tau: float
    inversions: int
    small_gap_count: int
    bound: float

    @property
    def bound_ok(self) -> bool:
        return self.tau >= self.bound


def _pair_stats(qt: np.ndarray, qs: np.ndarray, eta: float) -> tuple[int, int]:
    d = len(qt)
    i, j = np.triu_indices(d, 1)
    dt = qt[i] - qt[j]
    # surrogate order by (value, id); i < j so ties resolve in favour of i
    s_first = qs[i] <= qs[j]
    inv = ((dt < 0) & ~s_first) | ((dt > 0) & s_first)
    return int(np.count_nonzero(inv)), int(np.count_nonzero(np.abs(dt) <= eta))


def neighbour_kendall_tau(graph: Graph, dist: DistanceField, field, state: int) -> KendallResult:
    """Neighbour-ranking Kendall tau with its small-gap lower bound.

    True ties never count as inversions; surrogate ties are broken by vertex id.
    """
    _require_non_goal(dist, state)
    d = graph.degree(state)
    if d < 2:
        raise ValueError("Kendall tau needs degree >= 2")
    eps = local_error(graph, dist, field, state)
    inv, small = _pair_stats(true_q(graph, dist, state), surrogate_q(graph, field, state), 2 * eps)
    norm = d * (d - 1)
    return KendallResult(1 - 4 * inv / norm, inv, small, 1 - 4 * small / norm)


# --- local separation ------------------------------------------------------


@dataclass(frozen=True)
class Separation:
    separated: bool
    clause_i: bool
    clause_ii: bool
    amle_choice: int
    harmonic_choice: int
    amle_choice_optimal: bool
    harmonic_choice_optimal: bool

    @property
    def sound(self) -> bool:
        return not self.separated or (self.amle_choice_optimal and not self.harmonic_choice_optimal)


def local_separation(
    graph: Graph,
    dist: DistanceField,
    harmonic: ValueField,
    amle: ValueField,
    boundary: BoundaryCondition,
    state: int,
    measures: HarmonicMeasureSet | None = None,
) -> Separation:
    """Clause (i): AMLE half-gap test; clause (ii): harmonic anti-admissibility."""
    a_star, gap = action_gap(graph, dist, state)
    clause_i = half_gap_test(local_error(graph, dist, amle, state), gap)
    if measures is not None:
        clause_ii = harmonic_anti_admissibility(graph, boundary, measures, dist, state, harmonic).fires
    else:
        clause_ii, _, _ = _anti_scan(graph.neighbours(state), a_star, _vals(harmonic), 1e-10)
    ac = greedy_step(graph, amle, dist.goal, state)
    hc = greedy_step(graph, harmonic, dist.goal, state)
    return Separation(clause_i and clause_ii, clause_i, clause_ii, ac, hc, ac in a_star, hc in a_star)


# --- maximum principle -----------------------------------------------------


@dataclass(frozen=True)
class ExtremaScan:
    extrema: tuple[tuple[int, float, str], ...]  # (vertex, depth, "min" | "max")
    residual: float

    @property
    def max_depth(self) -> float:
        return max((d for _, d, _ in self.extrema), default=0.0)

    @property
    def passes(self) -> bool:
        return self.max_depth <= self.residual


def strict_extrema_scan(graph: Graph, boundary: BoundaryCondition, field, residual: float | None = None) -> ExtremaScan:
    """Interior strict local extrema and their depths, judged against the residual.

    ``residual`` defaults to the field's reported terminal residual.
    """
    u = _vals(field)
    if residual is None:
        residual = float(field.terminal_residual_inf)
    interior = ~boundary.mask(graph.vertex_count)
    found = []
    for x in np.flatnonzero(interior):
        nb = u[graph.neighbours(x)]
        if len(nb) == 0:
            continue
        lo, hi = nb.min(), nb.max()
        if u[x] < lo:
            found.append((int(x), float(lo - u[x]), "min"))
        elif u[x] > hi:
            found.append((int(x), float(u[x] - hi), "max"))
    return ExtremaScan(tuple(found), residual)


# --- bad-tail diagnostic ---------------------------------------------------


@dataclass(frozen=True)
class BadTail:
    lhs: float
    rhs: float
    hypothesis_holds: bool
    count: int

    @property
    def bound_holds(self) -> bool:
        return self.lhs <= self.rhs

    @property
    def status(self) -> str:
        if not self.hypothesis_holds:
            return "hypothesis-failed"
        return "holds" if self.bound_holds else "violated"


def bad_tail_diagnostic(records, theta: float, alpha: float, c0: float) -> BadTail:
    """Empirical mass of ``tau <= theta`` against ``2^(a+1) C0 E[eps^a] / (1 - theta)``.

    The gap-CDF hypothesis ``G(eta) <= C0 eta^alpha`` is checked at every
    pairwise true-Q gap of every record (``G`` only jumps there).
    """
    if not theta < 1 or alpha <= 0 or c0 <= 0:
        raise ValueError("need theta < 1 and positive alpha, C0")
    recs = [r for r in records if r.degree >= 2]
    if not recs:
        raise ValueError("no decision records with degree >= 2")
    tau = np.array([r.tau for r in recs])
    eps = np.array([r.local_error for r in recs])
    lhs = float(np.mean(tau <= theta))
    rhs = float(2 ** (alpha + 1) * c0 * np.mean(eps**alpha) / (1 - theta))
    holds = True
    for r in recs:
        q = np.asarray(r.true_q, dtype=float)
        i, j = np.triu_indices(len(q), 1)
        gaps = np.sort(np.abs(q[i] - q[j]))
        frac = np.searchsorted(gaps, gaps, side="right") / len(gaps)
        if np.any(frac > c0 * gaps**alpha):
            holds = False
            break
    return BadTail(lhs, rhs, holds, len(recs))


# --- subdivision -----------------------------------------------------------


@dataclass(frozen=True)
class SubdivisionRow:
    k: int
    method: str
    preferred: int
    margin: float  # |Q(image of a) - Q(image of b)|


def _branch_image(graph: Graph, s: int, target: int, k: int) -> int:
    """Neighbour of ``s`` on the subdivided edge towards ``target``."""
    if k == 1:
        return target
    lo, hi = min(s, target), max(s, target)
    # inserted vertices of edge (lo, hi) are appended in order from lo
    first = graph.vertex_count
    for u, v in graph.edges():
        if (u, v) == (lo, hi):
            break
        first += k - 1
    return first if s == lo else first + k - 2


def subdivision_margin_check(
    graph: Graph,
    boundary: BoundaryCondition,
    state: int,
    a: int,
    b: int,
    ks=(1, 2, 4, 8, 16),
    tol: float = 1e-12,
) -> tuple[list[SubdivisionRow], bool]:
    """First-step margins between branches ``a`` and ``b`` at ``state`` under k-subdivision.

    Labels are scaled by ``k``. Returns the rows and whether every margin
    and preferred branch matches its ``k = 1`` value within ``1e-6``.
    """
    nbrs = set(graph.neighbours(state).tolist())
    if a not in nbrs or b not in nbrs:
        raise ValueError("branches must be neighbours of the state")
    rows = []
    for k in ks:
        sub, orig = subdivide(graph, k)
        bc = BoundaryCondition(int(orig[boundary.goal]), orig[boundary.labelled], boundary.values * k)
        ia, ib = _branch_image(graph, state, a, k), _branch_image(graph, state, b, k)
        for method, fld in (
            ("harmonic", solve_harmonic(sub, bc)),
            ("amle", solve_amle(sub, bc, max_sweeps=10**7, tolerance=tol)),
        ):
            diff = fld.values[ia] - fld.values[ib]
            rows.append(SubdivisionRow(int(k), method, b if diff > 0 else a, float(abs(diff))))
    ok = True
    for method in ("harmonic", "amle"):
        mine = [r for r in rows if r.method == method]
        ok &= all(r.preferred == mine[0].preferred and abs(r.margin - mine[0].margin) <= 1e-6 for r in mine)
    return rows, bool(ok)


# --- decision records ------------------------------------------------------


@dataclass(frozen=True)
class DecisionRecord:
    state: int
    goal: int
    method: str
    degree: int
    true_best: tuple[int, ...]
    action_gap: float
    local_error: float
    chosen: int
    surrogate_best: tuple[int, ...]
    true_gap: float  # Q*(chosen) - min Q*
    true_q: tuple[float, ...]
    tau: float  # nan when degree < 2
    inversions: int
    small_gap_count: int  # M(2 eps)
    n_plus: int
    n_zero: int
    n_minus: int
    best_agree: bool
    harmonic_inversion: bool
    amle_correction: bool
    certified: bool
    tied_true_best: bool

    @property
    def geometry(self) -> GeometryClass:
        return GeometryClass(self.n_plus, self.n_zero, self.n_minus)

    @property
    def tau_bound(self) -> float:
        d = self.degree
        return 1 - 4 * self.small_gap_count / (d * (d - 1)) if d >= 2 else math.nan


def decision_record(
    graph: Graph,
    dist: DistanceField,
    field: ValueField,
    state: int,
    harmonic: ValueField | None = None,
    amle: ValueField | None = None,
) -> DecisionRecord:
    """Audit row for one decision of ``field``'s planner.

    With both endpoint fields supplied, the mechanism flags record whether
    harmonic picks outside ``A*``, whether AMLE picks inside it, and
    ``certified`` becomes the AMLE half-gap test.
    """
    a_star, gap = action_gap(graph, dist, state)
    eps = local_error(graph, dist, field, state)
    qt = true_q(graph, dist, state)
    qs = surrogate_q(graph, field, state)
    nbrs = graph.neighbours(state)
    choice = int(np.argmin(qs))
    d = len(nbrs)
    if d >= 2:
        inv, small = _pair_stats(qt, qs, 2 * eps)
        tau = 1 - 4 * inv / (d * (d - 1))
    else:
        inv, small, tau = 0, 0, math.nan
    geo = geometry_classify(graph, dist, state) if graph.is_unit else GeometryClass(0, 0, 0)
    h_inv = a_corr = False
    cert = half_gap_test(eps, gap)
    if harmonic is not None and amle is not None:
        h_inv = greedy_step(graph, harmonic, dist.goal, state) not in a_star
        a_corr = greedy_step(graph, amle, dist.goal, state) in a_star
        cert = half_gap_test(local_error(graph, dist, amle, state), gap)
    return DecisionRecord(
        state=int(state),
        goal=int(dist.goal),
        method=field.method,
        degree=d,
        true_best=a_star,
        action_gap=gap,
        local_error=eps,
        chosen=int(nbrs[choice]),
        surrogate_best=tuple(int(y) for y in nbrs[qs == qs[choice]]),
        true_gap=float(qt[choice] - qt.min()),
        true_q=tuple(float(q) for q in qt),
        tau=tau,
        inversions=inv,
        small_gap_count=small,
        n_plus=geo.n_plus,
        n_zero=geo.n_zero,
        n_minus=geo.n_minus,
        best_agree=int(nbrs[choice]) in a_star,
        harmonic_inversion=h_inv,
        amle_correction=a_corr,
        certified=cert,
        tied_true_best=len(a_star) > 1,
    )


_FIELDS = [f.name for f in fields(DecisionRecord)]
_TUPLES = {"true_best", "surrogate_best", "true_q"}
_BOOLS = {"best_agree", "harmonic_inversion", "amle_correction", "certified", "tied_true_best"}
_FLOATS = {"action_gap", "local_error", "true_gap", "tau"}


def _cell(name, v) -> str:
    if name in _TUPLES:
        return ",".join(repr(x) for x in v) if v else "-"
    if name in _BOOLS:
        return str(int(v))
    return repr(v) if isinstance(v, float) else str(v)


def write_decision_records(records, path: str | Path) -> None:
    """Tab-separated export, one row per decision, header first."""
    lines = ["\t".join(_FIELDS)]
    for r in records:
        row = asdict(r)
        lines.append("\t".join(_cell(k, row[k]) for k in _FIELDS))
    Path(path).write_text("\n".join(lines) + "\n")


def read_decision_records(path: str | Path) -> list[DecisionRecord]:
    lines = Path(path).read_text().splitlines()
    if lines[0].split("\t") != _FIELDS:
        raise ValueError(f"{path}: unexpected decision-record header")
    out = []
    for ln in lines[1:]:
        kw = {}
        for k, v in zip(_FIELDS, ln.split("\t")):
            if k in _TUPLES:
                conv = float if k == "true_q" else int
                kw[k] = () if v == "-" else tuple(conv(x) for x in v.split(","))
            elif k in _BOOLS:
                kw[k] = v == "1"
            elif k in _FLOATS:
                kw[k] = float(v)
            elif k == "method":
                kw[k] = v
            else:
                kw[k] = int(v)
        out.append(DecisionRecord(**kw))
    return out

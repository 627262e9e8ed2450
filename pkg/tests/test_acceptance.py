"""End-to-end acceptance criteria, one test per criterion.

Each test records a one-line verdict that the terminal summary prints.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from gpdeplan import (
    BoundaryCondition,
    boundary_from_mapping,
    build_graph,
    builtin_g7,
    certify_rollout,
    fill_distance,
    geometry_classify,
    harmonic_measure,
    neighbour_kendall_tau,
    rollout,
    shortest_path_distances,
    solve,
    solve_amle,
    solve_harmonic,
)
from gpdeplan.certificates import (
    action_gap,
    half_gap_test,
    local_error,
    operator_defects,
    strict_extrema_scan,
    subdivision_margin_check,
    surrogate_argmin,
)
from gpdeplan.harness import (
    ITERATION_SUBSET,
    GridSpec,
    adversarial_search,
    amle_iteration_audit,
    failure_decomposition,
    g7_checks,
    p_family_sweep,
    run_phase_diagram,
)
from gpdeplan.rng import make_rng
from gpdeplan.stats import wilson_interval
from tests.util import dense_harmonic, floyd_warshall, random_connected_graph, random_instance, record

pytestmark = pytest.mark.acceptance


# --- exact anchors -----------------------------------------------------------


def test_c01_g7_exactness():
    t0 = time.perf_counter()
    checks = g7_checks()
    elapsed = time.perf_counter() - t0
    bad = [c.name for c in checks if not c.ok]
    ok = record(1, "G7 exactness", not bad and elapsed < 1.0, f"{len(checks) - len(bad)}/{len(checks)} checks, {elapsed:.2f}s")
    assert ok, (bad, elapsed)


def test_c02_subdivision_table():
    g, bc, _ = builtin_g7()
    idx = g.index_of
    t0 = time.perf_counter()
    rows, stable = subdivision_margin_check(g, bc, idx(4), idx(1), idx(3))
    elapsed = time.perf_counter() - t0
    harm = [r for r in rows if r.method == "harmonic"]
    amle = [r for r in rows if r.method == "amle"]
    ok = (
        stable
        and {r.k for r in harm} == {1, 2, 4, 8, 16}
        and all(r.preferred == idx(1) and abs(r.margin - 3 / 29) <= 1e-6 for r in harm)
        and all(r.preferred == idx(3) and abs(r.margin - 1 / 3) <= 1e-6 for r in amle)
        and elapsed < 30
    )
    worst = max(max(abs(r.margin - 3 / 29) for r in harm), max(abs(r.margin - 1 / 3) for r in amle))
    record(2, "subdivision margins", ok, f"max margin error {worst:.1e}, {elapsed:.1f}s")
    assert ok, rows


# --- certificate trials (criteria 3 and 4 share them) ------------------------

TRIALS = 10_000
NOISE_BOUNDS = (0.0, 0.1, 0.3, 0.49, 0.7, 1.2)


def _fast_graph(rng, n):
    """Random tree plus a vectorised sprinkle of extra edges."""
    order = rng.permutation(n)
    parents = order[(rng.random(n - 1) * np.arange(1, n)).astype(int)]
    edges = {tuple(sorted((int(a), int(b)))) for a, b in zip(order[1:], parents)}
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < rng.uniform(0.0, 0.25)
    edges |= set(zip(iu[keep].tolist(), ju[keep].tolist()))
    return build_graph(n, sorted(edges))


@pytest.fixture(scope="module")
def certificate_trials():
    rng = make_rng(31337, "certificate-trials")
    stats = {"certified": 0, "uncertified": 0, "counterexamples": [], "top1": 0, "top1_bad": [], "kendall": 0, "kendall_bad": []}
    t0 = time.perf_counter()
    for t in range(TRIALS):
        n = int(rng.integers(2, 41))
        g = _fast_graph(rng, n)
        goal = int(rng.integers(n))
        dist = shortest_path_distances(g, goal)
        b = NOISE_BOUNDS[t % len(NOISE_BOUNDS)]
        field = dist.dist.astype(float) + rng.uniform(-b, b, n)
        start = int(rng.integers(n))
        cr = certify_rollout(g, dist, field, start)
        if cr.certified:
            stats["certified"] += 1
            d = [dist.hops(v) for v in cr.rollout.visited]
            if not (cr.rollout.reached and all(x - y == 1 for x, y in zip(d, d[1:]))):
                stats["counterexamples"].append((t, start, cr.rollout.visited))
        else:
            stats["uncertified"] += 1
        # every decision on the rollout plus one extra random state
        states = set(cr.rollout.decisions)
        if n > 1:
            states.add(int(rng.choice([v for v in range(n) if v != goal])))
        for s in states:
            a_star, gap = action_gap(g, dist, s)
            eps = local_error(g, dist, field, s)
            if half_gap_test(eps, gap):
                stats["top1"] += 1
                if not set(surrogate_argmin(g, field, s)) <= set(a_star):
                    stats["top1_bad"].append((t, s))
            if g.degree(s) >= 2:
                stats["kendall"] += 1
                kt = neighbour_kendall_tau(g, dist, field, s)
                if not kt.bound_ok:
                    stats["kendall_bad"].append((t, s, kt))
    stats["elapsed"] = time.perf_counter() - t0
    return stats


def test_c03_certificate_soundness(certificate_trials):
    s = certificate_trials
    bad = s["counterexamples"]
    ok = record(
        3,
        "certificate soundness",
        not bad and s["certified"] > 0 and s["elapsed"] < 60,
        f"{TRIALS} trials, {s['certified']} certified, {len(bad)} counterexamples, {s['elapsed']:.1f}s",
    )
    assert ok, bad[:5]


def test_c04_top1_and_kendall(certificate_trials):
    s = certificate_trials
    ok = record(
        4,
        "top-1 preservation and Kendall bound",
        not s["top1_bad"] and not s["kendall_bad"] and s["top1"] > 0 and s["kendall"] > 0,
        f"{s['top1']} half-gap states, {len(s['top1_bad'])} top-1 violations; "
        f"{s['kendall']} Kendall decisions, {len(s['kendall_bad'])} bound violations",
    )
    assert ok, (s["top1_bad"][:5], s["kendall_bad"][:5])


# --- solver properties -------------------------------------------------------


def _random_label_instance(rng, n_hi=30):
    g, dist, bc = random_instance(rng, 4, n_hi)
    vals = rng.uniform(-3, 3, len(bc.labelled))
    vals[bc.labelled == bc.goal] = 0.0
    return g, BoundaryCondition(bc.goal, bc.labelled, vals)


def test_c05_maximum_principle():
    rng = make_rng(4242, "maximum-principle")
    fields = snapshots = 0
    bad = []
    for i in range(120):
        g, bc = _random_label_instance(rng)
        runs = [
            solve(g, bc, "harmonic"),
            solve(g, bc, "p=4", sweeps=20000, relax=1.0, tol=1e-9),
            solve_amle(g, bc, tolerance=1e-10),
        ]
        for fld in runs:
            fields += 1
            scan = strict_extrema_scan(g, bc, fld)
            if not scan.passes:
                bad.append((i, fld.method, scan.max_depth, scan.residual))
        for k in (1, 2, 3, 5, 10, 25):
            snap = solve_amle(g, bc, max_sweeps=k, tolerance=0.0)
            snapshots += 1
            scan = strict_extrema_scan(g, bc, snap)
            if not scan.passes:
                bad.append((i, f"amle@{k}", scan.max_depth, scan.residual))
    ok = record(5, "maximum principle", not bad, f"120 instances, {fields} converged fields, {snapshots} snapshots, {len(bad)} violations")
    assert ok, bad[:5]


def test_c06_fill_distance_bound():
    rng = make_rng(5151, "fill-distance")
    tol = 1e-10
    checked = 0
    bad = []
    for i in range(120):
        g, dist, bc = random_instance(rng, 4, 40)
        fld = solve_amle(g, bc, max_sweeps=10**6, tolerance=tol)
        err = np.abs(fld.values - dist.dist)
        lab = bc.labelled.tolist()
        for s in range(g.vertex_count):
            if s == bc.goal:
                continue
            nb = g.neighbours(s)
            bound = 2 * fill_distance(g, nb.tolist(), lab) + 2 * tol
            checked += 1
            if err[nb].max() > bound:
                bad.append((i, s, float(err[nb].max()), bound))
    ok = record(6, "fill-distance bound", not bad, f"120 instances, {checked} neighbourhoods, {len(bad)} violations")
    assert ok, bad[:5]


def test_c07_operator_identities():
    rng = make_rng(7070, "operator-identities")
    vertices = 0
    bad = []
    for i in range(150):
        n = int(rng.integers(2, 30))
        g = random_connected_graph(rng, n, rng.uniform(0.02, 0.4))
        goal = int(rng.integers(n))
        dist = shortest_path_distances(g, goal)
        ref = floyd_warshall(g)[goal].astype(int)
        for x in range(n):
            if x == goal:
                continue
            vertices += 1
            nd = [int(ref[y]) for y in g.neighbours(x)]
            n_plus = sum(d == ref[x] + 1 for d in nd)
            n_minus = sum(d == ref[x] - 1 for d in nd)
            mid, mean = operator_defects(g, dist, x)
            extendable = geometry_classify(g, dist, x).extendable
            if (mid == 0) != (n_plus >= 1) or extendable != (n_plus >= 1):
                bad.append((i, x, "midrange", mid, n_plus))
            if mean != Fraction(n_plus - n_minus, len(nd)):
                bad.append((i, x, "averaging", mean, n_plus, n_minus))
    ok = record(7, "operator identities", not bad, f"150 graphs, {vertices} vertices, {len(bad)} violations")
    assert ok, bad[:5]


def _padded_neighbours(g):
    deg = g.degrees
    pad = np.zeros((g.vertex_count, int(deg.max())), dtype=np.int64)
    for v in range(g.vertex_count):
        pad[v, : deg[v]] = g.neighbours(v)
    return pad, deg


def _walk_absorption(g, labelled, start, walks, rng):
    """Vectorised simple random walks; returns the absorbing vertex of each walk."""
    pad, deg = _padded_neighbours(g)
    absorbing = np.zeros(g.vertex_count, dtype=bool)
    absorbing[labelled] = True
    pos = np.full(walks, start, dtype=np.int64)
    live = ~absorbing[pos]
    while live.any():
        p = pos[live]
        pos[live] = pad[p, (rng.random(len(p)) * deg[p]).astype(np.int64)]
        live[live] = ~absorbing[pos[live]]
    return pos


def test_c08_harmonic_measure():
    rng = make_rng(8080, "harmonic-measure")
    worst = 0.0
    for _ in range(60):
        g, bc = _random_label_instance(rng)
        hm = harmonic_measure(g, bc.labelled)
        direct = dense_harmonic(g, bc)
        worst = max(worst, float(np.abs(hm.reconstruct(bc.values) - direct).max()))
        worst = max(worst, float(np.abs(hm.reconstruct(bc.values) - solve_harmonic(g, bc, 1e-12).values).max()))
    walks = 100_000
    mc_bad = []
    comparisons = 0
    for trial in range(3):
        n = int(rng.integers(6, 16))
        g = random_connected_graph(rng, n, 0.2)
        lab = np.sort(rng.choice(n, size=3, replace=False))
        start = next(v for v in range(n) if v not in lab)
        hm = harmonic_measure(g, lab)
        ends = _walk_absorption(g, lab, start, walks, rng)
        for z in lab.tolist():
            comparisons += 1
            w = hm.weight(start, z)
            freq = float(np.mean(ends == z))
            se = math.sqrt(max(w * (1 - w), 0.0) / walks)
            if abs(freq - w) > 3 * se + 1e-12:
                mc_bad.append((trial, z, w, freq, se))
    ok = record(
        8,
        "harmonic-measure representation",
        worst <= 1e-8 and not mc_bad,
        f"max reconstruction error {worst:.1e} on 60 instances; {comparisons} Monte Carlo weights, {len(mc_bad)} outside 3 SE",
    )
    assert ok, (worst, mc_bad)


# --- desk-grid experiments ---------------------------------------------------


@pytest.fixture(scope="module")
def desk_diagram():
    t0 = time.perf_counter()
    pd = run_phase_diagram(GridSpec.desk())
    return pd, time.perf_counter() - t0


def test_c09_phase_diagram_direction(desk_diagram):
    pd, elapsed = desk_diagram
    lift = pd.lift
    l4, l8 = pd.lift_by_refine[4], pd.lift_by_refine[8]
    h, a = pd.summaries["harmonic"].mean, pd.summaries["amle"].mean
    ok = record(
        9,
        "phase-diagram direction",
        lift.mean >= 0.10 and lift.boot_low > 0 and l8.mean > l4.mean and elapsed < 600,
        f"harmonic {h:.3f}, amle {a:.3f}, lift {100 * lift.mean:+.1f} pp "
        f"[{100 * lift.boot_low:+.1f}, {100 * lift.boot_high:+.1f}], r=4 {100 * l4.mean:+.1f} pp, r=8 {100 * l8.mean:+.1f} pp, {elapsed:.0f}s",
    )
    assert ok


def test_c10_p_family_transition():
    fam = p_family_sweep(GridSpec.desk(), ps=(2, 4, math.inf))
    s = {r.method: r.success for r in fam.rows}
    ok = record(
        10,
        "p-family transition",
        s["p=2"] < s["p=4"] and s["p=2"] < s["amle"] and abs(s["p=2"] - s["harmonic"]) <= 0.01,
        f"harmonic {s['harmonic']:.4f}, p=2 {s['p=2']:.4f}, p=4 {s['p=4']:.4f}, p=inf {s['amle']:.4f}",
    )
    assert ok, s


def test_c11_failure_decomposition(desk_diagram):
    pd, _ = desk_diagram
    dec = failure_decomposition(pd.results)
    conserved = all(r["interior"] + r["boundary_touching"] == r["loops"] for r in dec.rows)
    conserved &= all(r.interior + r.boundary_touching == r.loops for r in pd.results)
    share = dec.pooled["harmonic"]["boundary_share_of_failures"]
    ok = record(
        11,
        "failure decomposition",
        conserved and share > 0.5,
        f"{len(dec.rows)} config-method rows conserved={conserved}, harmonic boundary-touching share {100 * share:.1f}%",
    )
    assert ok


def test_c12_amle_iteration_audit():
    budgets = (50, 200, 1000, 5000)
    rows = amle_iteration_audit(ITERATION_SUBSET, budgets)
    succ = [r.success for r in rows]
    resid = [r.residual_mean for r in rows]
    ok = record(
        12,
        "AMLE iteration audit",
        all(r.configs == 8 for r in rows)
        and all(x <= y for x, y in zip(succ, succ[1:]))
        and all(x > y for x, y in zip(resid, resid[1:])),
        "success " + " -> ".join(f"{x:.3f}" for x in succ) + "; residual " + " -> ".join(f"{x:.1e}" for x in resid),
    )
    assert ok, rows


def test_c13_wilson_interval():
    lo, hi = wilson_interval(59597, 61440)
    ok = record(13, "Wilson interval", (round(lo, 3), round(hi, 3)) == (0.969, 0.971), f"[{lo:.5f}, {hi:.5f}]")
    assert ok


def test_c14_adversarial_contract():
    tie_tol = 1e-6
    rep = adversarial_search(budget=2000, tol=1e-8, tie_tol=tie_tol)
    bad = []
    for w in rep.witnesses:
        g = build_graph(len(w.cells), w.edges, labels=w.cells)
        bc = boundary_from_mapping(w.goal, w.labels)
        h = solve_harmonic(g, bc, 1e-8)
        a = solve_amle(g, bc, max_sweeps=10**6, tolerance=1e-8)
        starts = [v for v in range(g.vertex_count) if v not in bc.labelled_set]
        hs = np.mean([rollout(g, h, w.goal, s, tie_tol=tie_tol).reached for s in starts])
        as_ = np.mean([rollout(g, a, w.goal, s, tie_tol=tie_tol).reached for s in starts])
        if not hs > as_:
            bad.append((w.index, hs, as_))
    verdict = f"{len(rep.witnesses)} witnesses" if rep.found else "no witness found (reported)"
    ok = record(
        14,
        "adversarial-search contract",
        not bad,
        f"{rep.tested} candidates, {rep.flagged} flagged, {rep.rejected} rejected, {verdict}, {len(bad)} failed re-verification",
    )
    assert ok, bad

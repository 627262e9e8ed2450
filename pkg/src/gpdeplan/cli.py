"""Command-line entry point (``gpdeplan <subcommand>``).

Grid-valued flags (``--layout``, ``--refine``, ``--label-fraction``,
``--seed``) take comma-separated lists; omitted flags fall back to the
``--config`` file and then to the desk grid. Exit status is 2 when an
invariant check fails and 1 on bad input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import reports
from .certificates import decision_record, subdivision_margin_check, write_decision_records
from .graph import read_edge_list, shortest_path_distances
from .harness import (
    FAMILY_BUDGET,
    ITERATION_SUBSET,
    Budget,
    GridSpec,
    InvariantViolation,
    adversarial_search,
    amle_iteration_audit,
    baselines,
    build_instances,
    failure_decomposition,
    g7_checks,
    mechanism_audit,
    ordering_audit,
    p_family_sweep,
    run_phase_diagram,
)
from .instances import ExperimentConfig, builtin_g7, read_boundary_file, sample_boundary
from .planner import ROLLOUT_HEADER, format_rollout_record, rollout
from .rng import make_rng
from .solvers import parse_method, solve, write_value_field

COMMANDS = (
    "g7",
    "solve",
    "rollout",
    "phase-diagram",
    "ordering-audit",
    "mechanism-audit",
    "decompose-failures",
    "p-sweep",
    "amle-iter-audit",
    "baselines",
    "adversarial-search",
    "subdivide-verify",
)


def _csv(conv):
    def parse(text: str):
        return tuple(conv(x) for x in text.split(",") if x.strip())

    return parse


def _p_value(text: str) -> float:
    return math.inf if text.strip().lower() in ("inf", "infinity") else float(text)


def _method(text: str) -> str:
    try:
        parse_method(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common")
    g.add_argument("--config", type=Path, help="key = value experiment config")
    g.add_argument("--graph", type=Path, help="edge-list file (replaces the layout grid)")
    g.add_argument("--goal", type=int, default=0, help="goal vertex for --graph")
    g.add_argument("--boundary", type=Path, help="'vertex value' overrides for --graph")
    g.add_argument("--layout", type=_csv(str))
    g.add_argument("--refine", type=_csv(int))
    g.add_argument("--label-fraction", type=_csv(float))
    g.add_argument("--seed", type=_csv(int))
    g.add_argument("--method", type=_method)
    g.add_argument("--sweeps", type=int)
    g.add_argument("--tol", type=float)
    g.add_argument("--relax", type=float)
    g.add_argument("--pairs", type=int)
    g.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpdeplan", description="Sparse value completion and greedy planning on graphs.")
    sub = parser.add_subparsers(dest="command", required=True)
    ps = {name: sub.add_parser(name) for name in COMMANDS}
    for p in ps.values():
        _common(p)
    ps["rollout"].add_argument("--start", type=_csv(int), help="start vertices (default: sampled pairs)")
    ps["p-sweep"].add_argument("--ps", type=_csv(_p_value), default=(2.0, 4.0, 8.0, math.inf))
    ps["amle-iter-audit"].add_argument("--budgets", type=_csv(int), default=(50, 200, 1000, 5000))
    adv = ps["adversarial-search"]
    adv.add_argument("--budget", type=int, default=2000, help="candidates per lattice size")
    adv.add_argument("--size", type=_csv(int), default=(4, 4), help="rows,cols")
    adv.add_argument("--tie-tol", type=float, default=1e-6, help="Q-values this close count as tied (0 = raw floats)")
    sv = ps["subdivide-verify"]
    sv.add_argument("--state", type=int, help="decision vertex (default: G7 vertex 4)")
    sv.add_argument("--branches", type=_csv(int), help="two neighbours a,b of the state")
    sv.add_argument("--ks", type=_csv(int), default=(1, 2, 4, 8, 16))
    return parser


# --- option resolution -------------------------------------------------------


def _config(args) -> ExperimentConfig | None:
    if args.config is None:
        return None
    return ExperimentConfig.from_text(args.config.read_text())


def _grid(args, default: GridSpec) -> GridSpec:
    cfg = _config(args)
    spec = default
    if cfg is not None:
        spec = replace(spec, layouts=(cfg.layout,), refines=(cfg.refine,), label_fractions=(cfg.label_fraction,), seeds=(cfg.seed,), pairs=cfg.pairs)
    over = {
        "layouts": args.layout,
        "refines": args.refine,
        "label_fractions": args.label_fraction,
        "seeds": args.seed,
        "pairs": args.pairs,
    }
    return replace(spec, **{k: v for k, v in over.items() if v is not None})


def _budget(args, default: Budget = Budget()) -> Budget:
    """Apply ``--sweeps/--tol/--relax`` to the solver family named by ``--method``."""
    cfg = _config(args)
    sweeps, tol, relax = args.sweeps, args.tol, args.relax
    method = args.method
    if cfg is not None:
        sweeps = cfg.sweeps if sweeps is None else sweeps
        tol = cfg.tol if tol is None else tol
        relax = cfg.relax if relax is None else relax
        method = cfg.method if method is None else method
    kind = parse_method(method)[0] if method else None
    b = default
    if kind in (None, "amle"):
        b = replace(b, **{k: v for k, v in {"amle_sweeps": sweeps, "amle_tol": tol}.items() if v is not None})
    if kind in (None, "picard"):
        b = replace(b, **{k: v for k, v in {"picard_sweeps": sweeps, "picard_tol": tol, "picard_relax": relax}.items() if v is not None})
    if kind == "harmonic" and tol is not None:
        b = replace(b, harmonic_tol=tol)
    return b


def _single(args):
    """Graph, distances, boundary and default starts for ``solve``/``rollout``."""
    if args.graph is not None:
        graph = read_edge_list(args.graph)
        dist = shortest_path_distances(graph, args.goal)
        if args.boundary is not None:
            bc = read_boundary_file(args.boundary, args.goal)
        else:
            lf = (args.label_fraction or (0.02,))[0]
            bc = sample_boundary(graph, dist, lf, make_rng((args.seed or (54,))[0], "labels", "graph", lf))
        pool = np.array([v for v in range(graph.vertex_count) if v != args.goal])
        pairs = args.pairs or len(pool)
        starts = make_rng((args.seed or (54,))[0], "starts", "graph").choice(pool, min(pairs, len(pool)), replace=False)
        return graph, dist, bc, np.sort(starts)
    grid = _grid(args, GridSpec(layouts=("medium",), refines=(4,), label_fractions=(0.02,), seeds=(54,)))
    cells = grid.cells()
    if len(cells) != 1:
        raise ValueError("solve/rollout take a single configuration")
    inst = build_instances(*cells[0], grid.pairs)[0]
    return inst.graph, inst.dist, inst.boundary, inst.starts


def _method_name(args, default: str = "amle") -> str:
    cfg = _config(args)
    return args.method or (cfg.method if cfg else default)


def _emit(args, tables) -> None:
    if args.out is not None:
        for path in reports.emit_reports(args.out, tables):
            print(f"wrote {path}")


def _print_rows(rows) -> None:
    for r in rows:
        print("  ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.items()))


# --- subcommands -------------------------------------------------------------


def cmd_g7(args) -> int:
    checks = g7_checks()
    for c in checks:
        print(f"{'ok  ' if c.ok else 'FAIL'} {c.name}: {c.value} (expected {c.expected})")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        doc = [{"name": c.name, "value": str(c.value), "expected": str(c.expected), "ok": c.ok} for c in checks]
        (args.out / "g7.json").write_text(json.dumps(doc, indent=1) + "\n")
    if not all(c.ok for c in checks):
        raise InvariantViolation("worked-example regression failed")
    return 0


def cmd_solve(args) -> int:
    graph, dist, bc, _ = _single(args)
    method = _method_name(args)
    fld = solve(graph, bc, method, dist=dist, **_budget(args).solve_kwargs(method))
    if not fld.boundary_pinned:
        raise InvariantViolation("boundary values moved during the solve")
    print(f"method={fld.method} sweeps={fld.sweeps_used} residual={fld.terminal_residual_inf:.3e} n={graph.vertex_count}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_value_field(fld, args.out / "values.txt")
        print(f"wrote {args.out / 'values.txt'}")
    return 0


def cmd_rollout(args) -> int:
    graph, dist, bc, starts = _single(args)
    method = _method_name(args)
    fld = solve(graph, bc, method, dist=dist, **_budget(args).solve_kwargs(method))
    starts = args.start if args.start else starts.tolist()
    results = [rollout(graph, fld, dist.goal, s, bc.labelled.tolist()) for s in starts]
    if any(r.outcome.value == "overrun" for r in results):
        raise InvariantViolation("a rollout overran without revisiting a vertex")
    ok = sum(r.reached for r in results)
    print(f"method={method} starts={len(results)} reached={ok} success={ok / len(results):.4f}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        lines = [ROLLOUT_HEADER] + [format_rollout_record(r) for r in results]
        (args.out / "rollouts.tsv").write_text("\n".join(lines) + "\n")
        states = sorted({s for r in results for s in r.decisions})
        recs = [decision_record(graph, dist, fld, s) for s in states]
        write_decision_records(recs, args.out / "decisions.tsv")
        print(f"wrote {args.out / 'rollouts.tsv'} and {args.out / 'decisions.tsv'}")
    return 0


def _diagram(args, methods=("harmonic", "amle")):
    return run_phase_diagram(_grid(args, GridSpec.desk()), methods, _budget(args))


def _phase_tables(pd) -> dict:
    return {
        "rollout_grid": reports.rollout_grid_rows(pd.results),
        "rollout_configs": reports.rollout_config_rows(pd.results),
        "stats": reports.stats_rows(pd.summaries),
        "lift": reports.lift_rows(pd),
    }


def cmd_phase_diagram(args) -> int:
    pd = _diagram(args)
    tables = _phase_tables(pd)
    _print_rows(tables["rollout_grid"])
    _print_rows(tables["lift"])
    _emit(args, tables)
    return 0


def cmd_ordering_audit(args) -> int:
    pd = _diagram(args)
    rows = reports.ordering_rows({s: ordering_audit(pd.results, s) for s in ("all", "eval_rollouts")})
    _print_rows(rows)
    _emit(args, {"ordering": rows})
    return 0


def cmd_mechanism_audit(args) -> int:
    pd = _diagram(args)
    audit = mechanism_audit(pd.results)
    rows = reports.mechanism_rows(audit)
    _print_rows(rows)
    if abs(sum(audit.mechanism[k] for k in ("geometry_both", "geometry_amle_only", "geometry_neither")) - 1) > 1e-12:
        raise InvariantViolation("geometry shares do not sum to one")
    _emit(args, {"mechanism": rows})
    return 0


def cmd_decompose_failures(args) -> int:
    pd = _diagram(args)
    per, pooled = reports.decomposition_rows(failure_decomposition(pd.results))
    for row in per:
        if row["interior"] + row["boundary_touching"] != row["loops"]:
            raise InvariantViolation(f"decomposition does not conserve loops for {row}")
    _print_rows(pooled)
    _emit(args, {"decomposition": per, "decomposition_pooled": pooled})
    return 0


def cmd_p_sweep(args) -> int:
    fam = p_family_sweep(_grid(args, GridSpec.desk()), args.ps, _budget(args, FAMILY_BUDGET))
    _print_rows(reports.p_family_ordering_rows(fam))
    _emit(
        args,
        {
            "p_family": reports.p_family_rows(fam),
            "solver_audit": reports.solver_audit_rows(fam),
            "p_family_ordering": reports.p_family_ordering_rows(fam),
        },
    )
    return 0


def cmd_amle_iter_audit(args) -> int:
    rows = reports.iteration_rows(amle_iteration_audit(_grid(args, ITERATION_SUBSET), args.budgets))
    _print_rows(rows)
    _emit(args, {"iteration": rows})
    return 0


def cmd_baselines(args) -> int:
    pd = baselines(_grid(args, GridSpec.desk()))
    rows = reports.baseline_rows(pd.results)
    _print_rows(rows)
    _emit(args, {"baselines": rows})
    return 0


def cmd_adversarial_search(args) -> int:
    if len(args.size) != 2:
        raise ValueError("--size takes rows,cols")
    seed = args.seed[0] if args.seed else 20260510
    if args.tie_tol < 0:
        raise ValueError("--tie-tol must be >= 0")
    tol = args.tol if args.tol is not None else 1e-8
    rep = adversarial_search((tuple(args.size),), args.budget, seed, tol, args.tie_tol)
    print(f"tested={rep.tested} flagged={rep.flagged} rejected={rep.rejected} witnesses={len(rep.witnesses)}")
    if not rep.found:
        print("no witness found")
    if args.out is not None:
        _emit(args, {"adversarial": reports.adversarial_rows(rep)})
        dump = []
        for w in rep.witnesses:
            d = asdict(w)
            d["labels"] = {str(k): v for k, v in w.labels.items()}
            dump.append(d)
        (args.out / "A10_witnesses_full.json").write_text(json.dumps(dump, indent=1) + "\n")
    return 0


def cmd_subdivide_verify(args) -> int:
    if args.graph is not None:
        graph = read_edge_list(args.graph)
        if args.boundary is None or args.state is None or not args.branches or len(args.branches) != 2:
            raise ValueError("--graph needs --boundary, --state and --branches a,b")
        bc = read_boundary_file(args.boundary, args.goal)
        state, (a, b) = args.state, args.branches
        names = None
    else:
        graph, bc, _ = builtin_g7()
        state, a, b = graph.index_of(4), graph.index_of(1), graph.index_of(3)
        names = graph.labels
    rows, ok = subdivision_margin_check(graph, bc, state, a, b, args.ks)
    table = reports.subdivision_rows(rows, names)
    _print_rows(table)
    _emit(args, {"subdivision": table})
    if not ok:
        raise InvariantViolation("first-step margins changed under subdivision")
    return 0


HANDLERS = {name: globals()["cmd_" + name.replace("-", "_")] for name in COMMANDS}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return HANDLERS[args.command](args)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

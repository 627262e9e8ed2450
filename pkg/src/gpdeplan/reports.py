"""Tabular report files: tab-separated text plus a JSON document per table.

File stems follow the audit-table naming ``A1`` ... ``A10``; every table has
a fixed column list so empty results still produce header-only files.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "TABLES",
    "write_table",
    "read_table",
    "read_table_json",
    "emit_reports",
    "rollout_grid_rows",
    "rollout_config_rows",
    "stats_rows",
    "ordering_rows",
    "subdivision_rows",
    "p_family_rows",
    "baseline_rows",
    "iteration_rows",
    "mechanism_rows",
    "decomposition_rows",
    "adversarial_rows",
]

TABLES: dict[str, tuple[str, tuple[str, ...]]] = {
    "rollout_grid": (
        "A1_rollout_grid",
        ("layout", "r", "lf", "seeds", "harmonic_success", "amle_success", "lift_pp", "harmonic_loop", "amle_loop"),
    ),
    "rollout_configs": (
        "A1_rollout_configs",
        ("layout", "r", "lf", "seed", "method", "pairs", "success", "loop_share", "interior", "boundary_touching", "sweeps", "residual"),
    ),
    "stats": (
        "A1_stats",
        ("method", "n", "mean", "sd", "level", "boot_low", "boot_high", "resamples", "wilson_low", "wilson_high"),
    ),
    "lift": ("A1_lift", ("subset", "mean", "boot_low", "boot_high", "pairs", "groups")),
    "ordering": ("A2_ordering_audit", ("scope", "metric", "harmonic", "amle", "delta")),
    "subdivision": ("A3_subdivision", ("k", "harmonic_preferred", "harmonic_margin", "amle_preferred", "amle_margin")),
    "p_family": (
        "A4_p_family",
        ("method", "p", "success", "success_sd", "loop", "residual_mean", "residual_max", "converged", "configs", "certification_incomplete"),
    ),
    "baselines": ("A5_baselines", ("r", "method", "success", "success_sd", "configs")),
    "iteration": ("A6_amle_iteration", ("budget", "success", "success_sd", "loop", "residual_mean", "residual_max", "configs")),
    "solver_audit": ("A7_solver_audit", ("method", "p", "success", "residual_mean", "residual_max", "converged", "configs")),
    "mechanism": ("A8_mechanism", ("diagnostic", "count", "denominator", "rate")),
    "p_family_ordering": (
        "A9_p_family_ordering",
        ("method", "p", "success", "loop", "tau_lt_05_rate", "best_agree_rate", "mean_gap", "tau_mean"),
    ),
    "adversarial": (
        "A10_adversarial",
        ("witness", "vertices", "goal", "boundary", "harmonic_success", "amle_success", "failures", "plateau"),
    ),
    "decomposition": (
        "failure_decomposition",
        ("layout", "r", "lf", "seed", "method", "pairs", "loops", "interior", "boundary_touching"),
    ),
    "decomposition_pooled": (
        "failure_decomposition_pooled",
        ("method", "pairs", "loops", "interior", "boundary_touching", "interior_share", "boundary_share", "boundary_share_of_failures"),
    ),
}


def _plain(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _parse(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def write_table(rows: Sequence[Mapping], columns: Sequence[str], stem: str | Path) -> tuple[Path, Path]:
    """Write ``<stem>.tsv`` and ``<stem>.json`` with identical content."""
    stem = Path(stem)
    body = [[_plain(row[c]) for c in columns] for row in rows]
    tsv = stem.with_suffix(".tsv")
    tsv.write_text("\n".join(["\t".join(columns)] + ["\t".join(_fmt(v) for v in r) for r in body]) + "\n")
    doc = {"table": stem.name, "columns": list(columns), "rows": [[_json_safe(v) for v in r] for r in body]}
    js = stem.with_suffix(".json")
    js.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return tsv, js


def read_table(path: str | Path) -> tuple[list[str], list[dict]]:
    lines = Path(path).read_text().splitlines()
    columns = lines[0].split("\t")
    rows = [dict(zip(columns, (_parse(x) for x in ln.split("\t")))) for ln in lines[1:] if ln]
    return columns, rows


def read_table_json(path: str | Path) -> tuple[list[str], list[dict]]:
    doc = json.loads(Path(path).read_text())
    cols = doc["columns"]

    def back(v):
        return float(v) if v in ("inf", "-inf", "nan") else v

    return cols, [dict(zip(cols, (back(v) for v in r))) for r in doc["rows"]]


def emit_reports(out_dir: str | Path, tables: Mapping[str, Sequence[Mapping]]) -> list[Path]:
    """Write each named table (see ``TABLES``) into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, rows in tables.items():
        if name not in TABLES:
            raise KeyError(f"unknown report table {name!r}")
        stem, cols = TABLES[name]
        written.extend(write_table(rows, cols, out / stem))
    return written


# --- row builders ----------------------------------------------------------


def rollout_config_rows(results) -> list[dict]:
    return [
        {
            "layout": r.layout,
            "r": r.refine,
            "lf": r.label_fraction,
            "seed": r.seed,
            "method": r.method,
            "pairs": r.pairs,
            "success": r.success,
            "loop_share": r.loop_share,
            "interior": r.interior,
            "boundary_touching": r.boundary_touching,
            "sweeps": r.sweeps,
            "residual": r.residual,
        }
        for r in results
    ]


def rollout_grid_rows(results, treated: str = "amle", control: str = "harmonic") -> list[dict]:
    """Seed-aggregated rows per ``(layout, r, lf)``."""
    cells = defaultdict(lambda: defaultdict(list))
    for r in results:
        cells[(r.layout, r.refine, r.label_fraction)][r.method].append(r)
    rows = []
    for (layout, rr, lf), per in cells.items():
        if treated not in per or control not in per:
            continue
        a, h = per[treated], per[control]
        sa = float(np.mean([x.success for x in a]))
        sh = float(np.mean([x.success for x in h]))
        rows.append(
            {
                "layout": layout,
                "r": rr,
                "lf": lf,
                "seeds": len(a),
                "harmonic_success": sh,
                "amle_success": sa,
                "lift_pp": 100 * (sa - sh),
                "harmonic_loop": float(np.mean([x.loop_share for x in h])),
                "amle_loop": float(np.mean([x.loop_share for x in a])),
            }
        )
    return rows


def stats_rows(summaries) -> list[dict]:
    return [
        {
            "method": m,
            "n": s.n,
            "mean": s.mean,
            "sd": s.sd,
            "level": s.level,
            "boot_low": s.boot_low,
            "boot_high": s.boot_high,
            "resamples": s.resamples,
            "wilson_low": s.wilson_low,
            "wilson_high": s.wilson_high,
        }
        for m, s in summaries.items()
    ]


def lift_rows(diagram) -> list[dict]:
    rows = []
    items = ([("all", diagram.lift)] if diagram.lift else []) + [(f"r={k}", v) for k, v in diagram.lift_by_refine.items()]
    for name, lift in items:
        rows.append(
            {
                "subset": name,
                "mean": lift.mean,
                "boot_low": lift.boot_low,
                "boot_high": lift.boot_high,
                "pairs": lift.pairs,
                "groups": lift.groups,
            }
        )
    return rows


def ordering_rows(audits_by_scope: Mapping[str, Mapping], a: str = "amle", h: str = "harmonic") -> list[dict]:
    rows = []
    for scope, audits in audits_by_scope.items():
        if a not in audits or h not in audits:
            continue
        for metric, hv in audits[h].metrics.items():
            av = audits[a].metrics[metric]
            rows.append({"scope": scope, "metric": metric, "harmonic": hv, "amle": av, "delta": av - hv})
    return rows


def subdivision_rows(rows, labels=None) -> list[dict]:
    by_k = defaultdict(dict)
    for r in rows:
        by_k[r.k][r.method] = r
    name = (lambda v: v) if labels is None else (lambda v: labels[v])
    return [
        {
            "k": k,
            "harmonic_preferred": name(m["harmonic"].preferred),
            "harmonic_margin": m["harmonic"].margin,
            "amle_preferred": name(m["amle"].preferred),
            "amle_margin": m["amle"].margin,
        }
        for k, m in sorted(by_k.items())
    ]


def p_family_rows(family) -> list[dict]:
    return [
        {
            "method": r.method,
            "p": r.p,
            "success": r.success,
            "success_sd": r.success_sd,
            "loop": r.loop,
            "residual_mean": r.residual_mean,
            "residual_max": r.residual_max,
            "converged": r.converged,
            "configs": r.configs,
            "certification_incomplete": r.certification_incomplete,
        }
        for r in family.rows
    ]


def solver_audit_rows(family) -> list[dict]:
    return [
        {
            "method": r.method,
            "p": r.p,
            "success": r.success,
            "residual_mean": r.residual_mean,
            "residual_max": r.residual_max,
            "converged": r.converged,
            "configs": r.configs,
        }
        for r in family.rows
    ]


def p_family_ordering_rows(family) -> list[dict]:
    return [
        {
            "method": r.method,
            "p": r.p,
            "success": r.success,
            "loop": r.loop,
            "tau_lt_05_rate": r.tau_lt_05_rate,
            "best_agree_rate": r.best_agree_rate,
            "mean_gap": r.mean_gap,
            "tau_mean": r.tau_mean,
        }
        for r in family.rows
    ]


def baseline_rows(results) -> list[dict]:
    groups = defaultdict(list)
    for r in results:
        groups[(r.refine, r.method)].append(r.success)
    rows = []
    for (rr, m), vals in sorted(groups.items()):
        v = np.asarray(vals)
        rows.append(
            {"r": rr, "method": m, "success": float(v.mean()), "success_sd": float(v.std(ddof=1)) if len(v) > 1 else 0.0, "configs": len(v)}
        )
    return rows


def iteration_rows(rows) -> list[dict]:
    return [
        {
            "budget": r.budget,
            "success": r.success,
            "success_sd": r.success_sd,
            "loop": r.loop,
            "residual_mean": r.residual_mean,
            "residual_max": r.residual_max,
            "configs": r.configs,
        }
        for r in rows
    ]


def mechanism_rows(audit) -> list[dict]:
    c = audit.counts
    geo_den = c.get("decisions", 0)
    spec = [
        ("geometry_both", round(audit.mechanism["geometry_both"] * geo_den) if geo_den else 0, geo_den),
        ("geometry_amle_only", round(audit.mechanism["geometry_amle_only"] * geo_den) if geo_den else 0, geo_den),
        ("geometry_neither", round(audit.mechanism["geometry_neither"] * geo_den) if geo_den else 0, geo_den),
        ("inversion_rate", c.get("inversions", 0), c.get("non_tied", 0)),
        ("inversion_in_amle_only_share", c.get("inversions_amle_only", 0), c.get("inversions", 0)),
        ("amle_correction_rate", c.get("corrections", 0), c.get("inversions", 0)),
        ("certified_correction_rate", c.get("certified", 0), c.get("inversions", 0)),
    ]
    return [{"diagnostic": d, "count": int(k), "denominator": int(n), "rate": audit.mechanism[d]} for d, k, n in spec]


def decomposition_rows(decomp) -> tuple[list[dict], list[dict]]:
    pooled = [{"method": m, **v} for m, v in decomp.pooled.items()]
    return decomp.rows, pooled


def adversarial_rows(report) -> list[dict]:
    return [
        {
            "witness": w.index,
            "vertices": len(w.cells),
            "goal": w.cells[w.goal],
            "boundary": len(w.labels),
            "harmonic_success": w.harmonic_success,
            "amle_success": w.amle_success,
            "failures": ",".join(str(c) for c in w.amle_failures) or "-",
            "plateau": w.plateau,
        }
        for w in report.witnesses
    ]

"""JSON reports: results next to the published targets, with discrepancies."""

from __future__ import annotations

import json
import math
from ptqkd.montecarlo import EtaSweep, RunConfig, RunStats, SweepRow
from ptqkd.ptcore import ALPHA_OPT

FIVE_SIXTHS = 5.0 / 6.0

# Published reference values used by the reports.
TARGETS = {
    "hermitian_accuracy": (0.75, "random-basis intercept-resend guesses 3/4 of the bits"),
    "pt_accuracy": (FIVE_SIXTHS, "PT-symmetric discrimination guesses 5*eta/6 of the bits"),
    "unambiguous_rate": (0.25, "near-breaking-point CPT measurement identifies the state in 1/4 of cases"),
    "alpha_opt": (ALPHA_OPT, "smallest alpha with an evolution time, atan(sqrt((sqrt(2)-1)/2))"),
    "eta_threshold": (0.9, "5*eta/6 > 3/4 requires eta > 0.9"),
}


def _target(key: str, quantity: str, value: float, tol: float) -> dict:
    return {"quantity": quantity, "target": value, "tolerance": tol, "claim": TARGETS[key][1]}


def run_targets(cfg: RunConfig) -> list[dict]:
    """Targets that apply to a configuration; the 5*eta/6 claims assume nulls count as errors."""
    out = []
    nulls_wrong = cfg.null_policy == "wrong" and cfg.fallback == "none"
    if cfg.strategy == "hermitian" and cfg.eta == 1.0:
        out.append(_target("hermitian_accuracy", "eve_accuracy", 0.75, 1e-9))
    if cfg.strategy in ("approach1", "approach2") and nulls_wrong:
        out.append(_target("pt_accuracy", "eve_accuracy", FIVE_SIXTHS * cfg.eta, 1e-9))
    if cfg.strategy == "approach3" and nulls_wrong:
        if math.isclose(cfg.params.get("alpha", ALPHA_OPT), ALPHA_OPT, abs_tol=1e-9):
            out.append(_target("pt_accuracy", "eve_accuracy", FIVE_SIXTHS * cfg.eta, 1e-9))
    if cfg.strategy == "approach1":
        # O(epsilon^2) leakage from psi00/psi10 into the -1 outcome.
        eps = cfg.params.get("epsilon", 1e-3)
        out.append(_target("unambiguous_rate", "unambiguous_rate", 0.25 * cfg.eta, eps * eps))
    return out


_EXACT_FIELD = {"eve_accuracy": "exact_accuracy", "unambiguous_rate": "exact_unambiguous_rate"}


def discrepancies(cfg: RunConfig, stats: RunStats, targets: list[dict]) -> list[dict]:
    """Targets missed by the exact value or by the sample beyond 4 binomial sigma."""
    found = []
    for t in targets:
        q = t["quantity"]
        exact = getattr(stats, _EXACT_FIELD[q])
        sampled = getattr(stats, q)
        n = stats.n_sifted if q == "eve_accuracy" else stats.n
        goal = t["target"]
        sigma = math.sqrt(max(goal * (1 - goal), 1e-12) / n) if n else math.inf
        exact_miss = bool(exact is not None and abs(exact - goal) > t["tolerance"])
        sample_miss = bool(sampled is not None and abs(sampled - goal) > 4 * sigma + t["tolerance"])
        if not (exact_miss or sample_miss):
            continue
        entry = {
            "quantity": q,
            "target": goal,
            "exact": exact,
            "sampled": sampled,
            "exact_mismatch": exact_miss,
            "sample_mismatch": sample_miss,
        }
        if cfg.strategy == "approach1" and q == "eve_accuracy":
            entry["note"] = (
                "a single CPT measurement with outcome -1 -> bit 1 and +1 -> bit 0 "
                "gives exactly 3/4 for every alpha; the claimed 5*eta/6 is not reached"
            )
        found.append(entry)
    return found


def run_report(cfg: RunConfig, stats: RunStats) -> dict:
    targets = run_targets(cfg)
    return {
        "command": "run",
        "config": cfg.echo(),
        "results": stats.to_dict(),
        "paper_targets": targets,
        "discrepancies": discrepancies(cfg, stats, targets),
    }


def _row(r: SweepRow) -> dict:
    return {
        "x": r.x,
        "feasible": r.feasible,
        "tau": r.tau,
        "exact": r.exact,
        "sampled": r.sampled,
        "lo": r.lo,
        "hi": r.hi,
    }


def alpha_sweep_report(cfg: RunConfig, grid: dict, rows: list[SweepRow]) -> dict:
    feasible = [r for r in rows if r.feasible]
    first = feasible[0] if feasible else None
    best = max(feasible, key=lambda r: r.exact) if feasible else None
    targets = [
        _target("alpha_opt", "first_feasible_alpha", ALPHA_OPT, 1e-9),
        _target("pt_accuracy", "max_exact", FIVE_SIXTHS, 1e-9),
    ]
    found = []
    if first is None:
        found.append({"quantity": "first_feasible_alpha", "note": "no feasible alpha in the grid"})
    else:
        if abs(first.x - ALPHA_OPT) > 1e-9:
            found.append({"quantity": "first_feasible_alpha", "target": ALPHA_OPT, "value": first.x,
                          "note": "grid does not contain the existence boundary"})
        if abs(best.exact - FIVE_SIXTHS) > 1e-9:
            found.append({"quantity": "max_exact", "target": FIVE_SIXTHS, "value": best.exact})
    return {
        "command": "sweep-alpha",
        "config": {**cfg.echo(), **grid},
        "results": {
            "rows": [_row(r) for r in rows],
            "first_feasible_alpha": None if first is None else first.x,
            "argmax_alpha": None if best is None else best.x,
            "max_exact": None if best is None else best.exact,
        },
        "paper_targets": targets,
        "discrepancies": found,
    }


def eta_sweep_report(cfg: RunConfig, grid: dict, sweep: EtaSweep) -> dict:
    targets = []
    found = []
    if cfg.strategy != "hermitian":
        targets.append(_target("eta_threshold", "threshold_exact", 0.9, 1e-9))
        if sweep.threshold_exact is None or abs(sweep.threshold_exact - 0.9) > 1e-9:
            found.append({"quantity": "threshold_exact", "target": 0.9, "value": sweep.threshold_exact})
    return {
        "command": "sweep-eta",
        "config": {**cfg.echo(), **grid},
        "results": {
            "rows": [_row(r) for r in sweep.rows],
            "threshold_exact": sweep.threshold_exact,
            "threshold_sampled": sweep.threshold_sampled,
        },
        "paper_targets": targets,
        "discrepancies": found,
    }


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False) + "\n"


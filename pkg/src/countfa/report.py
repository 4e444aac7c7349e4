"""Fit reports as a JSON-ready dict, and the plain-text rendering of that dict.

The text form is rendered from the dict, never from the fit objects, so both
formats always carry the same numbers.
"""

from __future__ import annotations

import json
from typing import Optional

from .search import SearchTrace
from .types import Base, Dataset, FitResult

SCHEMA_VERSION = 1


def _param_keys(result: FitResult) -> list[str]:
    keys = ["theta"] if result.family.base is Base.POISSON else ["r", "p"]
    return keys + (["pi"] if result.family.zero_inflated else [])


def build_report(result: FitResult, d: Dataset, *, call: Optional[dict] = None,
                 warnings=(), notes=(), trace: Optional[SearchTrace] = None,
                 include_timing: bool = False) -> dict:
    groups = []
    for k, (grp, fit) in enumerate(zip(result.partition.groups, result.fits), start=1):
        gp = fit.params
        groups.append({
            "factor": k,
            "indices": [i + 1 for i in grp],
            "variables": [d.names[i] for i in grp],
            "factor_params": None if gp.factor is None else gp.factor.as_dict(),
            "variable_params": [v.as_dict() for v in gp.variables],
            "log_lik": fit.log_lik,
            "diagnostics": fit.diagnostics.as_dict(),
        })
    report = {
        "schema": SCHEMA_VERSION,
        "call": call or {},
        "family": result.family.code,
        "trunc": result.family.trunc,
        "model": result.partition.display(),
        "independent": all(len(g) == 1 for g in result.partition.groups),
        "n": d.n,
        "N": d.N,
        "log_lik": result.log_lik,
        "n_params": result.n_params,
        "aic": result.aic,
        "aic_normalized": result.aic_normalized,
        "converged": result.converged,
        "param_keys": _param_keys(result),
        "groups": groups,
        "warnings": list(warnings),
        "notes": list(notes),
    }
    if trace is not None:
        report["trace"] = trace.as_dict()
    if include_timing:
        report["wall_time"] = result.wall_time
    return report


def to_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=False) + "\n"


def fmt(v: float) -> str:
    return f"{v:.4f}"


def _table(columns: list[list[str]], headers: list[str]) -> list[str]:
    depth = max(len(c) for c in columns)
    width = [max(len(h), *(len(x) for x in c)) for h, c in zip(headers, columns)]
    rowlab = len(str(depth))
    lines = [" " * rowlab + " " + " ".join(h.ljust(w) for h, w in zip(headers, width))]
    for i in range(depth):
        cells = [(c[i] if i < len(c) else "").ljust(w) for c, w in zip(columns, width)]
        lines.append(str(i + 1).ljust(rowlab) + " " + " ".join(cells))
    return [ln.rstrip() for ln in lines]


_LABELS = {
    "theta": "Estimated parameters",
    "r": "Estimated value of r",
    "p": "Estimated value of p",
    "pi": "Estimated zero-inflated parameters",
}


def render_text(report: dict) -> str:
    out: list[str] = []
    call = report.get("call") or {}
    if call:
        out += ["Call:", " ".join(f"{k}={v}" for k, v in call.items()), ""]
    for w in report["warnings"]:
        out.append(f"Warning: {w}")
    for note in report["notes"]:
        out.append(f"Note: {note}")
    if report["warnings"] or report["notes"]:
        out.append("")
    if report["independent"]:
        out.append("Independent model!")
    out += [f"This is a {report['model']} model.", ""]
    out += [f"AIC value is {fmt(report['aic_normalized'])}.",
            f"(raw AIC {fmt(report['aic'])}, log-likelihood {fmt(report['log_lik'])}, "
            f"{report['n_params']} parameters, n = {report['n']})", ""]

    groups = report["groups"]
    headers = [f"Factor{g['factor']}" for g in groups]
    out.append("Factors and variables in each factor:")
    out += _table([g["variables"] for g in groups], headers)
    out.append("")

    for key in report["param_keys"]:
        out.append(f"{_LABELS[key]} for each variable within each factor ({key}):")
        out += _table([[fmt(v[key]) for v in g["variable_params"]] for g in groups], headers)
        out.append("")
    factored = [g for g in groups if g["factor_params"] is not None]
    for key in report["param_keys"]:
        out.append(f"{_LABELS[key]} for factors ({key}):")
        out.append(" ".join(fmt(g["factor_params"][key]) for g in factored) if factored else "none")
        out.append("")

    out.append("Diagnostics:")
    out.append(f"converged: {'yes' if report['converged'] else 'NO'}")
    for g in groups:
        flags = g["diagnostics"]["boundary_flags"]
        if flags or not g["diagnostics"]["converged"]:
            out.append(f"Factor{g['factor']}: converged={g['diagnostics']['converged']} "
                       f"boundary={','.join(flags) or '-'}")
    out.append("")

    trace = report.get("trace")
    if trace is not None:
        out.append("Search trace:")
        for k, step in enumerate(trace["steps"], start=1):
            inc = step["incumbent"]
            out.append(f"step {k}: incumbent {inc['model']} {inc['groups']} "
                       f"AIC {fmt(inc['aic_normalized'])}; {step['new_fits']} new group fits")
            for i, c in enumerate(step["candidates"]):
                mark = "*" if i == step["chosen"] else " "
                out.append(f"  {mark} {c['model']} {c['groups']} AIC {fmt(c['aic_normalized'])}")
        out.append(f"total group fits: {trace['total_fits']}, cache hits: {trace['cache_hits']}")
        out.append("")

    if "wall_time" in report:
        out += ["Timing:", f"Time difference of {report['wall_time']:.3f} secs", ""]
    return "\n".join(out)

"""Merge run CSVs into a summary and render the companion figures.

Input CSVs come in two layouts written by the CLI:

* replication rows:  ``group,replication,value,seed``
* estimate rows:     ``quantity,t,s,R,estimate,std_error,n,seed``

The summary collapses replication rows into per-group statistics and passes
estimate rows through; figures (PNG) are written next to the delimited
output: variance-growth, histogram-vs-normal for replication data, and
errorbar curves for estimate data.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .stats import ks_normal, moments, power_fit

__all__ = ["merge_reports", "render_figures", "build_report"]


def _read_csv(path: Path) -> tuple[str, list[dict]]:
    with path.open() as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        fields = reader.fieldnames or []
    if fields[:3] == ["group", "replication", "value"]:
        return "replications", rows
    if fields[:4] == ["quantity", "t", "s", "R"]:
        return "estimates", rows
    raise InvalidInputError(f"{path}: unrecognized CSV layout {fields!r}")


def merge_reports(paths: list[str | Path]) -> dict:
    """Collapse the input CSVs into one summary dictionary."""
    summary: dict = {"inputs": [str(p) for p in paths], "groups": [], "estimates": []}
    for p in paths:
        p = Path(p)
        kind, rows = _read_csv(p)
        if kind == "replications":
            by_group: dict = {}
            for row in rows:
                by_group.setdefault(row["group"], []).append(float(row["value"]))
            for group, vals in by_group.items():
                vals = np.asarray(vals)
                entry = {
                    "file": p.name,
                    "group": group,
                    "n": int(vals.size),
                    "mean": float(vals.mean()),
                    "var": float(np.var(vals, ddof=1)) if vals.size > 1 else 0.0,
                }
                if vals.size >= 30:
                    mom = moments(vals)
                    d, pv = ks_normal(vals, 0.0, math.sqrt(mom["var"]))
                    entry["ks_p"] = pv
                    entry["fourth_moment_ratio"] = mom["excess_kurtosis"] + 3.0
                summary["groups"].append(entry)
        else:
            for row in rows:
                summary["estimates"].append({"file": p.name, **row})
    return summary


def render_figures(summary: dict, out_dir: str | Path) -> list[Path]:
    """Write PNG figures for the merged summary; returns the created paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    groups = summary.get("groups", [])
    if groups:
        by_file: dict = {}
        for g in groups:
            by_file.setdefault(g["file"], []).append(g)
        for fname, entries in by_file.items():
            try:
                xs = np.array([float(e["group"]) for e in entries])
            except ValueError:
                continue
            order = np.argsort(xs)
            xs = xs[order]
            vs = np.array([entries[i]["var"] for i in order])
            fig, ax = plt.subplots(figsize=(5.0, 3.4))
            ax.loglog(xs, vs, "o-", label="group variance")
            if xs.size >= 3 and np.all(vs > 0):
                expo, intercept, r2 = power_fit(xs, vs)
                ax.loglog(xs, np.exp(intercept) * xs**expo, "--",
                          label=f"fit slope {expo:.2f} (r2={r2:.3f})")
            ax.set_xlabel("group (radius)")
            ax.set_ylabel("variance")
            ax.legend(fontsize=8)
            fig.tight_layout()
            path = out_dir / f"fig_variance_{Path(fname).stem}.png"
            fig.savefig(path, dpi=150)
            plt.close(fig)
            created.append(path)

    estimates = summary.get("estimates", [])
    if estimates:
        by_q: dict = {}
        for e in estimates:
            by_q.setdefault(e["quantity"], []).append(e)
        for quantity, entries in by_q.items():
            xs, lab = [], "R"
            try:
                xs = [float(e["R"]) for e in entries]
                if len(set(xs)) <= 1:
                    xs = [float(e["t"]) for e in entries]
                    lab = "t"
            except (ValueError, TypeError):
                continue
            ys = [float(e["estimate"]) for e in entries]
            es = [float(e.get("std_error") or 0.0) for e in entries]
            order = np.argsort(xs)
            fig, ax = plt.subplots(figsize=(5.0, 3.4))
            ax.errorbar(np.asarray(xs)[order], np.asarray(ys)[order],
                        yerr=np.asarray(es)[order], fmt="o-", capsize=3)
            ax.set_xlabel(lab)
            ax.set_ylabel(quantity)
            fig.tight_layout()
            safe = quantity.replace("/", "_").replace(" ", "_")
            path = out_dir / f"fig_{safe}.png"
            fig.savefig(path, dpi=150)
            plt.close(fig)
            created.append(path)
    return created


def build_report(paths: list[str | Path], out_dir: str | Path, figures: bool = True) -> dict:
    """Merge inputs, write summary.csv / summary.json (and figures) into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = merge_reports(paths)

    with (out_dir / "summary.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["file", "group", "n", "mean", "var", "ks_p", "fourth_moment_ratio"])
        for g in summary["groups"]:
            writer.writerow([
                g["file"], g["group"], g["n"], repr(g["mean"]), repr(g["var"]),
                repr(g.get("ks_p", "")) if g.get("ks_p") is not None else "",
                repr(g.get("fourth_moment_ratio", "")) if g.get("fourth_moment_ratio") is not None else "",
            ])
        if summary["estimates"]:
            writer.writerow([])
            writer.writerow(["file", "quantity", "t", "s", "R", "estimate", "std_error", "n"])
            for e in summary["estimates"]:
                writer.writerow([e["file"], e["quantity"], e["t"], e["s"], e["R"],
                                 e["estimate"], e["std_error"], e["n"]])
    if figures:
        summary["figures"] = [str(p) for p in render_figures(summary, out_dir)]
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return summary

"""Figures for a finished run directory, rendered next to the metrics.

Reads config.json, metrics.csv, and events.jsonl as written by
run_experiment and drops PNG files into the same directory. Which figures
appear depends on the experiment kind; every kind gets the per-seed
completion chart, reception-time histograms come from the event log, and
the oracle-substitution kind gets its spacing-per-phase curves.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_PNG_META = {"Software": "sinrcast-report"}


def _load_rows(run: Path) -> List[Dict[str, str]]:
    with (run / "metrics.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    # aggregate rows carry labels in the seed column; keep per-seed rows
    return [r for r in rows if r["seed"].lstrip("-").isdigit()]


def _load_events(run: Path) -> List[dict]:
    path = run / "events.jsonl"
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line]


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_PNG_META)
    plt.close(fig)
    return path


def _completion_figure(kind: str, rows, out: Path) -> Path:
    seeds = [int(r["seed"]) for r in rows]
    comps = [float(r["completion"]) if r["completion"] else None for r in rows]
    done = [(s, c) for s, c in zip(seeds, comps) if c is not None]
    missed = [s for s, c in zip(seeds, comps) if c is None]
    fig, ax = plt.subplots(figsize=(7, 4))
    if done:
        xs, ys = zip(*done)
        ax.scatter(xs, ys, s=14, label="completed")
        med = sorted(ys)[len(ys) // 2]
        ax.axhline(med, color="tab:orange", lw=1, ls="--", label=f"median {med:g}")
    if missed:
        ax.scatter(missed, [0] * len(missed), marker="x", color="tab:red", label="not achieved")
    ax.set_xlabel("seed")
    ax.set_ylabel("completion (slots)")
    frac = sum(1 for r in rows if r["success"] == "1") / max(1, len(rows))
    ax.set_title(f"{kind}: completion per seed (success {frac:.0%})")
    if done or missed:
        ax.legend(loc="best", fontsize=8)
    return _save(fig, out / "completion.png")


def _reception_figure(kind: str, events, out: Path) -> Path | None:
    if kind == "approg-latency":
        times = [e["epoch_slot"] + 1 for e in events if e["type"] == "latch"]
        label = "first latch (epoch-clock slots)"
    elif kind in ("smb", "mmb"):
        times = [e["slot"] + 1 for e in events if e["type"] == "delivery"]
        label = "delivery (slots)"
    else:
        times = [
            e["slot"] + 1 for e in events if e["type"] == "mac" and e["kind"] == "rcv"
        ]
        label = "reception (slots)"
    if not times:
        return None
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.hist(times, bins=min(40, max(5, len(set(times)))), color="tab:blue")
    ax.set_xlabel(label)
    ax.set_ylabel("count")
    ax.set_title(f"{kind}: reception times, all seeds pooled")
    return _save(fig, out / "receptions.png")


def _spacing_figure(events, out: Path) -> Path | None:
    runs: Dict[int, List[dict]] = {}
    for e in events:
        if e["type"] == "phase":
            runs.setdefault(e["seed"], []).append(e)
    if not runs:
        return None
    fig, ax = plt.subplots(figsize=(7, 4))
    for seed, phases in sorted(runs.items()):
        phases.sort(key=lambda p: p["index"])
        ax.plot(
            [p["index"] for p in phases],
            [p["min_spacing"] for p in phases],
            marker="o",
            lw=1,
            alpha=0.7,
            label=f"seed {seed}" if len(runs) <= 8 else None,
        )
    ax.set_yscale("log")
    ax.set_xlabel("phase")
    ax.set_ylabel("set min spacing")
    ax.set_title("oracle-substitution: spacing growth per phase")
    if len(runs) <= 8:
        ax.legend(fontsize=8)
    return _save(fig, out / "spacing.png")


def render_report(run_dir) -> List[Path]:
    run = Path(run_dir)
    cfg = json.loads((run / "config.json").read_text())
    kind = cfg["kind"]
    rows = _load_rows(run)
    if not rows:
        raise ValueError(f"{run}: metrics.csv has no per-seed rows")
    events = _load_events(run)

    written = [_completion_figure(kind, rows, run)]
    fig = _reception_figure(kind, events, run)
    if fig is not None:
        written.append(fig)
    if kind == "oracle-substitution":
        fig = _spacing_figure(events, run)
        if fig is not None:
            written.append(fig)
    return written

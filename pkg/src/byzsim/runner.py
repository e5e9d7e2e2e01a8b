"""Experiment grid execution and metrics emission.

One config file maps to one output directory `<out>/<config-hash>/` holding
`metrics.csv` (one row per eval round per run) and `summary.json` (final and
best top-1 per (rule, attack) cell, mean and std over seeds). Everything is
recomputable from the CSV; the JSON holds no independent state. Output is
byte-deterministic for a given config.
"""
from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .datasets import default_synth_corpus, load_idx_dataset
from .engine import run_experiment
from .expconfig import ConfigError, ExperimentFile, parse_experiment_file
from .partition import LabeledDataset

CSV_HEADER = "run_id,rule,attack,delta,partition,seed,round,train_loss,test_top1"


def _fmt(value: float) -> str:
    return f"{value:.10g}"


def partition_descriptor(exp: ExperimentFile) -> str:
    if exp.partition == "dirichlet":
        return f"dirichlet(beta={_fmt(exp.beta)})"
    if exp.partition == "kclass":
        return f"kclass(k={exp.k})"
    return "iid"


def config_hash(exp: ExperimentFile) -> str:
    return hashlib.sha256(exp.canonical_text().encode("utf8")).hexdigest()[:12]


_IDX_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def load_datasets(exp: ExperimentFile) -> tuple[LabeledDataset, LabeledDataset]:
    if exp.dataset == "synth":
        return default_synth_corpus()
    base = Path(exp.data_dir)
    train = load_idx_dataset(base / _IDX_FILES["train_images"], base / _IDX_FILES["train_labels"])
    test = load_idx_dataset(base / _IDX_FILES["test_images"], base / _IDX_FILES["test_labels"])
    return train, test


def run_grid(exp: ExperimentFile, train: LabeledDataset, test: LabeledDataset, log=None) -> tuple[list[str], list[str]]:
    """Execute every (rule, attack, seed) cell; returns (csv rows, failures)."""
    descriptor = partition_descriptor(exp)
    rows: list[str] = []
    failures: list[str] = []
    for index, (rule, attack, seed) in enumerate(exp.grid()):
        run_id = f"{index:04d}"
        cfg = exp.sim_config(rule, attack, seed)
        try:
            records = run_experiment(cfg, train, test)
        except Exception as exc:  # aborted run: report, keep going
            failures.append(f"run {run_id} ({rule}, {attack}, seed={seed}) aborted: {exc}")
            continue
        for rec in records:
            rows.append(
                f"{run_id},{rule},{attack},{_fmt(exp.delta)},{descriptor},{seed},"
                f"{rec.round_index},{_fmt(rec.train_loss)},{_fmt(rec.test_top1)}"
            )
        if log is not None:
            final = records[-1].test_top1 if records else float("nan")
            print(f"run {run_id}: rule={rule} attack={attack} seed={seed} final_top1={_fmt(final)}", file=log)
    return rows, failures


def summarize_csv_rows(rows: list[str]) -> dict:
    """Final and best top-1 per (rule, attack) cell, aggregated over seeds."""
    by_run: dict[str, dict] = {}
    for row in rows:
        run_id, rule, attack, _, _, seed, round_s, _, top1_s = row.split(",")
        entry = by_run.setdefault(run_id, {"rule": rule, "attack": attack, "seed": int(seed), "series": []})
        entry["series"].append((int(round_s), float(top1_s)))
    cells: dict[tuple[str, str], dict] = {}
    for entry in by_run.values():
        series = sorted(entry["series"])
        cell = cells.setdefault(
            (entry["rule"], entry["attack"]),
            {"rule": entry["rule"], "attack": entry["attack"], "seeds": [], "final": [], "best": []},
        )
        cell["seeds"].append(entry["seed"])
        cell["final"].append(series[-1][1])
        cell["best"].append(max(v for _, v in series))
    out = []
    for (_, _), cell in sorted(cells.items()):
        final = np.array(cell["final"])
        best = np.array(cell["best"])
        out.append(
            {
                "rule": cell["rule"],
                "attack": cell["attack"],
                "seeds": sorted(cell["seeds"]),
                "final_top1_mean": round(float(final.mean()), 10),
                "final_top1_std": round(float(final.std()), 10),
                "best_top1_mean": round(float(best.mean()), 10),
                "best_top1_std": round(float(best.std()), 10),
            }
        )
    return {"cells": out}


def run_from_config(config_path, out_dir, log=None) -> int:
    """Run the whole grid and write metrics.csv + summary.json.

    Returns 0 on success, 1 if any run aborted, 2 on config/IO errors.
    """
    log = log if log is not None else sys.stderr
    try:
        exp = parse_experiment_file(config_path)
        train, test = load_datasets(exp)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=log)
        return 2

    target = Path(out_dir) / config_hash(exp)
    target.mkdir(parents=True, exist_ok=True)

    rows, failures = run_grid(exp, train, test, log=log)
    csv_text = CSV_HEADER + "\n" + "".join(row + "\n" for row in rows)
    (target / "metrics.csv").write_text(csv_text)

    summary = summarize_csv_rows(rows)
    summary["config_hash"] = config_hash(exp)
    summary["partition"] = partition_descriptor(exp)
    summary["delta"] = exp.delta
    (target / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    for failure in failures:
        print(f"error: {failure}", file=log)
    print(f"wrote {target / 'metrics.csv'}", file=log)
    return 1 if failures else 0


def read_csv_rows(csv_path) -> list[dict]:
    lines = Path(csv_path).read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{csv_path}: missing or unexpected CSV header")
    columns = CSV_HEADER.split(",")
    return [dict(zip(columns, line.split(","))) for line in lines[1:] if line]


def emit_plot_series(csv_path, attack: str, delta: float, partition: Optional[str] = None, out_path=None) -> str:
    """Whitespace-separated columns: round, then one seed-averaged top-1
    column per rule matching the selector. Suitable for any plotting tool."""
    rows = read_csv_rows(csv_path)
    selected = [
        r
        for r in rows
        if r["attack"] == attack
        and float(r["delta"]) == float(delta)
        and (partition is None or r["partition"] == partition)
    ]
    if not selected:
        raise ValueError(f"no rows match attack={attack!r}, delta={delta}, partition={partition!r}")
    rules: list[str] = []
    for r in selected:
        if r["rule"] not in rules:
            rules.append(r["rule"])
    per_round: dict[int, dict[str, list[float]]] = {}
    for r in selected:
        per_round.setdefault(int(r["round"]), {}).setdefault(r["rule"], []).append(float(r["test_top1"]))
    lines = ["# round " + " ".join(rules)]
    for round_index in sorted(per_round):
        values = per_round[round_index]
        cols = [str(round_index)]
        for rule in rules:
            samples = values.get(rule)
            cols.append(_fmt(sum(samples) / len(samples)) if samples else "nan")
        lines.append(" ".join(cols))
    text = "\n".join(lines) + "\n"
    if out_path is not None:
        Path(out_path).write_text(text)
    return text

"""Metrics and the fixed-fold repeated cross-validation protocol.

Metrics (label 1 = death = positive):

    precision         = tp / (tp + fp)
    recall            = tp / (tp + fn)
    f1                = 2 * P * R / (P + R)
    balanced_accuracy = (sensitivity + specificity) / 2

A zero denominator makes the metric undefined; undefined values are excluded
from mean/std aggregation rather than coerced to 0. Folds are drawn once per
report (seeded shuffle, round-robin) and reused for every (provider, variant)
cell; a fingerprint of the fold membership proves it.
"""
from __future__ import annotations

import csv
import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import gbdt
from .balancing import near_miss_1
from .errors import LengthMismatch, NonBinaryLabel, TooFewSamples

METRIC_NAMES = ("precision", "recall", "f1", "balanced_accuracy")
VARIANT_ORDER = ("boc", "full", "uc")
VARIANT_LABELS = {"boc": "boc", "full": "fullnotes", "uc": "uc"}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass(frozen=True)
class MetricSet:
    """Metric values; None marks a flagged-undefined metric."""
    precision: float | None
    recall: float | None
    f1: float | None
    balanced_accuracy: float | None

    def as_dict(self) -> dict[str, float | None]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "balanced_accuracy": self.balanced_accuracy,
        }


def confusion(y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionCounts:
    if len(y_true) != len(y_pred):
        raise LengthMismatch(f"lengths differ: {len(y_true)} vs {len(y_pred)}")
    tp = fp = tn = fn = 0
    for t, p in zip(y_true, y_pred):
        if t not in (0, 1) or p not in (0, 1):
            raise NonBinaryLabel(f"labels must be 0/1, got ({t!r}, {p!r})")
        if t == 1:
            if p == 1:
                tp += 1
            else:
                fn += 1
        else:
            if p == 1:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def metrics(c: ConfusionCounts) -> MetricSet:
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp > 0 else None
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn > 0 else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    sensitivity = recall
    specificity = c.tn / (c.tn + c.fp) if c.tn + c.fp > 0 else None
    if sensitivity is None or specificity is None:
        balanced = None
    else:
        balanced = (sensitivity + specificity) / 2
    return MetricSet(precision=precision, recall=recall, f1=f1, balanced_accuracy=balanced)


def make_folds(patient_ids: Sequence[str], k: int = 2, seed: int = 0) -> list[list[str]]:
    """Seeded shuffle then round-robin assignment into k folds.

    Deterministic across processes for the same (ids, k, seed); fold sizes
    differ by at most one.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(patient_ids) < k:
        raise TooFewSamples(f"{len(patient_ids)} samples cannot fill {k} folds")
    shuffled = list(patient_ids)
    random.Random(seed).shuffle(shuffled)
    folds: list[list[str]] = [[] for _ in range(k)]
    for i, pid in enumerate(shuffled):
        folds[i % k].append(pid)
    return folds


def fold_fingerprint(folds: Sequence[Sequence[str]]) -> str:
    """Stable hash of sorted fold membership."""
    canonical = json.dumps([sorted(f) for f in folds])
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class MetricStat:
    mean: float | None
    std: float | None
    n_defined: int


@dataclass(frozen=True)
class CellResult:
    """Aggregates for one (provider, variant) cell over all (run, fold) pairs."""
    stats: Mapping[str, MetricStat]
    runs: int
    folds: int
    fold_fingerprint: str


def _aggregate(values_by_metric: Mapping[str, list[float]], runs: int, n_folds: int,
               fingerprint: str) -> CellResult:
    stats = {}
    for name in METRIC_NAMES:
        vals = values_by_metric[name]
        if vals:
            arr = np.asarray(vals, dtype=np.float64)
            stats[name] = MetricStat(mean=float(arr.mean()), std=float(arr.std()), n_defined=len(vals))
        else:
            stats[name] = MetricStat(mean=None, std=None, n_defined=0)
    return CellResult(stats=stats, runs=runs, folds=n_folds, fold_fingerprint=fingerprint)


def run_experiment(
    X,
    y: Sequence[int],
    fold_indices: Sequence[Sequence[int]],
    runs: int = 20,
    train_config: gbdt.TrainConfig = gbdt.TrainConfig(),
    nearmiss_k: int = 3,
    fingerprint: str = "",
) -> CellResult:
    """Repeated fixed-fold CV for one embedding matrix.

    Each run r trains with seed train_config.seed + r; each fold serves once
    as the untouched test set while the other folds, undersampled with
    NearMiss-1, form the training set. Undefined metric values are skipped in
    the aggregation. Module errors propagate with (run, fold) prepended.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    values: dict[str, list[float]] = {name: [] for name in METRIC_NAMES}
    all_idx = [np.asarray(f, dtype=int) for f in fold_indices]
    for r in range(runs):
        cfg = replace(train_config, seed=train_config.seed + r)
        for fold_no, test_idx in enumerate(all_idx):
            try:
                train_idx = np.concatenate([f for j, f in enumerate(all_idx) if j != fold_no])
                sampled = near_miss_1(X[train_idx], y[train_idx], k=nearmiss_k)
                fit_idx = train_idx[list(sampled.kept)]
                model = gbdt.train(X[fit_idx], y[fit_idx], cfg)
                y_pred = gbdt.predict(model, X[test_idx])
                m = metrics(confusion(list(y[test_idx]), list(y_pred)))
            except Exception as e:
                e.args = (f"run={r} fold={fold_no}: {e}",)
                raise
            for name, value in m.as_dict().items():
                if value is not None:
                    values[name].append(value)
    return _aggregate(values, runs, len(all_idx), fingerprint)


@dataclass(frozen=True)
class EvalReport:
    """One cell per (provider, variant), plus the shared protocol settings."""
    cells: Mapping[tuple[str, str], CellResult]   # (provider, variant) -> result
    runs: int
    cv_k: int
    fold_seed: int
    fold_fingerprint: str
    config_snapshot: dict = field(default_factory=dict)


def _fmt(value: float | None, digits: int = 4) -> str:
    return "" if value is None else f"{value:.{digits}f}"


def _fmt_pct(value: float | None) -> str:
    return "" if value is None else f"{value * 100:.2f}"


def render_report(report: EvalReport, outdir: str | Path) -> dict[str, Path]:
    """Write report.json, report.csv (Table 4/5 shape), and plotdata.csv."""
    if not report.cells:
        raise ValueError("report has no cells")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    providers = []
    for provider, _ in report.cells:
        if provider not in providers:
            providers.append(provider)
    variants = [v for v in VARIANT_ORDER if any(key[1] == v for key in report.cells)]

    json_path = outdir / "report.json"
    payload = {
        "runs": report.runs,
        "cv_k": report.cv_k,
        "fold_seed": report.fold_seed,
        "fold_fingerprint": report.fold_fingerprint,
        "seed_policy": "gbdt seed = config seed + run index; folds fixed per report",
        "config": report.config_snapshot,
        "cells": {
            provider: {
                VARIANT_LABELS[variant]: {
                    "fold_fingerprint": cell.fold_fingerprint,
                    "metrics": {
                        name: {"mean": st.mean, "std": st.std, "n_defined": st.n_defined}
                        for name, st in cell.stats.items()
                    },
                }
                for (p, variant), cell in report.cells.items() if p == provider
            }
            for provider in providers
        },
    }
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    # Table 4/5 shape: one row per provider, per-metric column groups across
    # variants; balanced accuracy is printed as a percentage.
    csv_path = outdir / "report.csv"
    header = ["provider"]
    for name in METRIC_NAMES:
        for variant in variants:
            header.append(f"{name}_{VARIANT_LABELS[variant]}")
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for provider in providers:
            row = [provider]
            for name in METRIC_NAMES:
                for variant in variants:
                    cell = report.cells.get((provider, variant))
                    st = cell.stats[name] if cell else None
                    if st is None:
                        row.append("")
                    elif name == "balanced_accuracy":
                        row.append(_fmt_pct(st.mean))
                    else:
                        row.append(_fmt(st.mean))
            writer.writerow(row)

    plot_path = outdir / "plotdata.csv"
    with plot_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["provider", "variant", *METRIC_NAMES])
        for provider in providers:
            for variant in variants:
                cell = report.cells.get((provider, variant))
                if cell is None:
                    continue
                writer.writerow([
                    provider,
                    VARIANT_LABELS[variant],
                    *(_fmt(cell.stats[name].mean) for name in METRIC_NAMES),
                ])

    return {"json": json_path, "csv": csv_path, "plotdata": plot_path}

"""Test-split scoring and the MetricsReport record."""

import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd
from sklearn.metrics import f1_score, roc_auc_score

REPORT_COLUMNS = ("variant", "graph_mode", "seed", "f1", "auc", "epochs_run",
                  "transfers_out", "transfers_in", "wall_clock_s")


def macro_f1(y_true, y_pred, class_count):
    """Unweighted mean of per-class F1; classes never seen nor predicted score 0."""
    return float(f1_score(y_true, y_pred, labels=np.arange(class_count), average="macro", zero_division=0))


def macro_auc(y_true, probs, class_count=None):
    """Macro one-vs-rest ROC AUC.

    Classes without both positive and negative test samples are skipped; NaN
    when no class qualifies.
    """
    y_true = np.asarray(y_true)
    probs = np.asarray(probs, dtype=np.float64)
    class_count = probs.shape[1] if class_count is None else class_count
    scores = []
    for c in range(class_count):
        positive = y_true == c
        if positive.all() or not positive.any():
            continue
        scores.append(roc_auc_score(positive, probs[:, c]))
    return float(np.mean(scores)) if scores else float("nan")


@dataclass
class MetricsReport:
    variant: str
    graph_mode: str
    seed: int
    f1: float
    auc: Optional[float]
    epochs_run: int = 0
    transfers_out: int = 0
    transfers_in: int = 0
    wall_clock_s: float = 0.0
    extra: Dict[str, Any] = field(default_factory=dict)

    def row(self):
        return {name: getattr(self, name) for name in REPORT_COLUMNS}

    def to_dict(self):
        data = asdict(self)
        if data["auc"] is not None and math.isnan(data["auc"]):
            data["auc"] = None
        return data


def score_predictions(variant, graph_mode, seed, y_true, probs=None, y_pred=None, class_count=None, **fields):
    """Build a report from test probabilities, or from hard predictions alone (AUC is then None)."""
    if probs is not None:
        probs = np.asarray(probs)
        class_count = probs.shape[1] if class_count is None else class_count
        y_pred = np.argmax(probs, axis=1) if y_pred is None else y_pred
    f1 = macro_f1(y_true, y_pred, class_count)
    auc = macro_auc(y_true, probs, class_count) if probs is not None else None
    return MetricsReport(variant, graph_mode, seed, f1, auc, **fields)


def reports_frame(reports):
    return pd.DataFrame([r.row() for r in reports], columns=list(REPORT_COLUMNS))


def write_reports(reports, out_dir, stem="metrics"):
    """Write ``<stem>.json`` (full records) and ``<stem>.csv`` (fixed columns)."""
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, f"{stem}.json")
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    with open(json_path, "w", encoding="utf-8") as f:
        json.dump([r.to_dict() for r in reports], f, indent=2)
    reports_frame(reports).to_csv(csv_path, index=False)
    return json_path, csv_path

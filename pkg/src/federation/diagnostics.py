"""Disagreement among local heads."""

import numpy as np
import pandas as pd

from src.numcore.errors import DegenerateSampleError

HISTOGRAM_BINS = 10


def entropy_diagnostic(local_predictions, class_count):
    """Per-sample Shannon entropy (nats) of the local predicted classes.

    Args:
        local_predictions: (n x m) predicted class per client, -1 where absent
        class_count: number of classes

    Returns:
        np.ndarray: entropy per sample
    """
    preds = np.asarray(local_predictions, dtype=np.int64)
    counts = np.zeros((preds.shape[1], class_count))
    for row in preds:
        present = row >= 0
        counts[np.flatnonzero(present), row[present]] += 1.0
    totals = counts.sum(axis=1, keepdims=True)
    if np.any(totals == 0):
        raise DegenerateSampleError(f"no client holds data for sample {int(np.flatnonzero(totals[:, 0] == 0)[0])}")
    p = counts / totals
    logs = np.log(p, out=np.zeros_like(p), where=p > 0)
    return -np.sum(p * logs, axis=1)


def entropy_histogram(entropies, class_count, bins=HISTOGRAM_BINS):
    """Plot-ready histogram over [0, ln C]."""
    upper = max(np.log(class_count), float(np.max(entropies, initial=0.0)))
    counts, edges = np.histogram(entropies, bins=bins, range=(0.0, upper))
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts})

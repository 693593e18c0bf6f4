"""
Global model checkpoints (versioned JSON, same conventions as client checkpoints)
and CSV heatmap exports of theta and the alignment matrices.
"""

import json
import os

import numpy as np

from src.alignment.alignment_set import AlignmentSet
from src.graphsampler.posterior import GraphPosterior
from src.graphsampler.reference import ReferenceDistribution
from src.globalmodel.model import GlobalModel
from src.numcore.errors import FormatParseError, FormatVersionError

GLOBAL_FORMAT = "f3-global"
GLOBAL_FORMAT_VERSION = 1


def model_to_record(gm):
    record = {
        "format": GLOBAL_FORMAT,
        "format_version": GLOBAL_FORMAT_VERSION,
        "variant": gm.variant,
        "client_count": gm.client_count,
        "graph_mode": gm.graph_mode,
        "weights": {name: w.tolist() for name, w in gm.weights.items()},
        "alignment": {
            "mode": gm.alignment.mode,
            "d": gm.alignment.d,
            "d_out": gm.alignment.d_out,
            "steps": gm.alignment.steps,
            "free": [f.tolist() for f in gm.alignment.free],
        },
        "posterior": None,
    }
    if gm.posterior is not None:
        gp = gm.posterior
        record["posterior"] = {
            "logits": gp.logits.tolist(),
            "tau": gp.tau,
            "method": gp.method,
            "symmetric": gp.symmetric,
            "self_loop": gp.self_loop,
            "reference": gp.ref.to_dict(),
        }
    return record


def record_to_model(record, graph_provider=None):
    """Rebuild a GlobalModel; ``given``/``knn`` models need their graph provider passed back in."""
    if record.get("format") != GLOBAL_FORMAT:
        raise FormatParseError(f"not a global model checkpoint (format={record.get('format')!r})", 0)
    if record.get("format_version") != GLOBAL_FORMAT_VERSION:
        raise FormatVersionError(
            f"global model checkpoint version {record.get('format_version')} is not supported "
            f"(expected {GLOBAL_FORMAT_VERSION})")
    a = record["alignment"]
    alignment = AlignmentSet(a["mode"], record["client_count"], a["d"], a["d_out"], a["free"], a["steps"])
    posterior = None
    if record["posterior"] is not None:
        p = record["posterior"]
        ref = ReferenceDistribution(p["reference"]["kind"], p["reference"]["sigma"])
        posterior = GraphPosterior(p["logits"], p["tau"], ref, p["method"], p["symmetric"], p["self_loop"])
    weights = {name: np.array(w, dtype=np.float64) for name, w in record["weights"].items()}
    return GlobalModel(record["variant"], record["client_count"], weights, alignment,
                       record["graph_mode"], posterior, graph_provider)


def save_global_model(gm, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model_to_record(gm), f)
    return path


def load_global_model(path, graph_provider=None):
    with open(path, "r", encoding="utf-8") as f:
        try:
            record = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatParseError(f"global model checkpoint {path} is not valid JSON: {e.msg}", e.pos) from e
    return record_to_model(record, graph_provider)


def export_heatmaps(gm, out_dir, prefix=""):
    """Write theta.csv (learned graphs only) and alignment.csv; return the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if gm.posterior is not None:
        paths.append(gm.posterior.to_csv(os.path.join(out_dir, f"{prefix}theta.csv")))
    if gm.alignment.mode != "none":
        paths.append(gm.alignment.to_csv(os.path.join(out_dir, f"{prefix}alignment.csv")))
    return paths

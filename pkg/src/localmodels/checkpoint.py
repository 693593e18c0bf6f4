"""
Trained client checkpoints as versioned JSON.

Layout (see docs/FILE_FORMATS.md)::

    {"format": "f3-client", "format_version": 1, "id": 0, "kind": "fc",
     "d": 16, "class_count": 3, "input_dim": 7,
     "parameters": {"U": [[...]], "c": [[...]], "W": [[...]], "b": [[...]]}}

Floats are written with ``repr`` precision so a load reproduces every bit.
"""

import json
import os

import numpy as np

from src.localmodels.client import LocalClient, LogisticHead
from src.localmodels.embeddings import EMBEDDING_KINDS
from src.numcore.errors import FormatParseError, FormatVersionError

CLIENT_FORMAT = "f3-client"
CLIENT_FORMAT_VERSION = 1


def client_to_record(client):
    params = {name: arr.tolist() for name, arr in client.embedding.params.items()}
    params["W"] = client.head.W.tolist()
    params["b"] = client.head.b.tolist()
    return {
        "format": CLIENT_FORMAT,
        "format_version": CLIENT_FORMAT_VERSION,
        "id": int(client.id),
        "kind": client.embedding.kind,
        "d": int(client.hidden_dim),
        "class_count": int(client.class_count),
        "input_dim": int(client.embedding.input_dim),
        "frozen": bool(client.frozen),
        "parameters": params,
    }


def record_to_parameters(record):
    """Rebuild (embedding, head) from a checkpoint record."""
    if record.get("format") != CLIENT_FORMAT:
        raise FormatParseError(f"not a client checkpoint (format={record.get('format')!r})", 0)
    if record.get("format_version") != CLIENT_FORMAT_VERSION:
        raise FormatVersionError(
            f"client checkpoint version {record.get('format_version')} is not supported "
            f"(expected {CLIENT_FORMAT_VERSION})")
    kind = record["kind"]
    if kind not in EMBEDDING_KINDS:
        raise FormatParseError(f"unknown embedding kind {kind!r}", 0)
    params = record["parameters"]
    cls = EMBEDDING_KINDS[kind]
    embedding = cls({name: np.array(params[name], dtype=np.float64) for name in cls.names})
    head = LogisticHead(np.array(params["W"], dtype=np.float64), np.array(params["b"], dtype=np.float64))
    return embedding, head


def save_client(client, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(client_to_record(client), f)
    return path


def load_client(path, shard):
    """Load parameters from ``path`` and attach them to ``shard``."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            record = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatParseError(f"client checkpoint {path} is not valid JSON: {e.msg}", e.pos) from e
    embedding, head = record_to_parameters(record)
    return LocalClient(record["id"], embedding, head, shard, frozen=record.get("frozen", True))

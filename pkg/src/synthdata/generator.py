"""
Seeded generator for vertically partitioned data with a planted consensus graph.

Each sample has a class y and an event pattern over the n clients (nodes):

    class 0         no event
    odd classes     cascade: a random center node plus its planted-graph neighbors
    even classes>0  scattered: as many nodes as a cascade, pairwise non-adjacent

With conflict level kappa, node i of sample k carries the signal

    a_ik * t_y,   a_ik = (1 - kappa) + kappa * event_k[i]
    t_c  = (1 - kappa) e_c + kappa e_event   (e_event = 0 for class 0)

and client i observes B_i (a_ik t_y) + noise with its own random mixing B_i.
At kappa = 0 every client sees its class directly; at kappa = 1 cascade and
scattered events only differ in which nodes fire together, which only the
graph reveals.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np
import pandas as pd

from src.localmodels.client import ClientShard
from src.synthdata.spec import SyntheticSpec

# width of the Gaussian event bump in the sequence templates, in time steps
EVENT_BUMP_WIDTH = 2.0


@dataclass
class SyntheticDataset:
    spec: SyntheticSpec
    inputs: List[np.ndarray]
    present: np.ndarray
    labels: np.ndarray
    graph: np.ndarray
    permutations: np.ndarray
    events: np.ndarray = field(default=None)

    @property
    def client_count(self):
        return len(self.inputs)

    @property
    def sample_count(self):
        return len(self.labels)

    def shards(self):
        return [ClientShard(x, self.present[i]) for i, x in enumerate(self.inputs)]

    def kinds(self):
        return ["gru" if x.ndim == 3 else "fc" for x in self.inputs]

    def to_frame(self):
        """Wide debug table: one row per sample, one column per observed value."""
        columns = {"sample": np.arange(self.sample_count), "label": self.labels}
        for i, x in enumerate(self.inputs):
            columns[f"c{i}_present"] = self.present[i].astype(int)
            flat = x.reshape(x.shape[0], -1)
            if x.ndim == 3:
                names = [f"c{i}_t{t}_f{j}" for t in range(x.shape[1]) for j in range(x.shape[2])]
            else:
                names = [f"c{i}_f{j}" for j in range(x.shape[1])]
            for name, col in zip(names, flat.T):
                columns[name] = np.where(self.present[i], col, np.nan)
        return pd.DataFrame(columns)

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)
        return path


def planted_graph(spec, rng):
    """0/1 symmetric adjacency without self loops."""
    n = spec.clients
    A = np.zeros((n, n))
    if spec.graph == "ring":
        for i in range(n):
            if n > 1:
                A[i, (i + 1) % n] = A[(i + 1) % n, i] = 1.0
    elif spec.graph == "blocks":
        block = np.arange(n) * spec.graph_blocks // n
        A = (block[:, None] == block[None, :]).astype(np.float64)
    else:
        upper = np.triu(rng.random((n, n)) < spec.graph_p, 1)
        A = (upper | upper.T).astype(np.float64)
    np.fill_diagonal(A, 0.0)
    return A


def _scattered_nodes(A, size, rng):
    chosen = []
    for node in rng.permutation(A.shape[0]):
        if all(A[node, c] == 0 for c in chosen):
            chosen.append(int(node))
        if len(chosen) == size:
            break
    return chosen


def event_masks(labels, A, rng):
    """(m x n) 0/1 event pattern per sample."""
    m, n = len(labels), A.shape[0]
    masks = np.zeros((m, n))
    centers = rng.integers(0, n, size=m)
    for k, (y, center) in enumerate(zip(labels, centers)):
        if y == 0:
            continue
        cascade = [int(center)] + [int(j) for j in np.flatnonzero(A[center])]
        if y % 2 == 1:
            masks[k, cascade] = 1.0
        else:
            masks[k, _scattered_nodes(A, len(cascade), rng)] = 1.0
    return masks


def class_templates(classes, conflict):
    """(classes x classes+1) templates; the last column is the shared event direction."""
    T = np.zeros((classes, classes + 1))
    T[np.arange(classes), np.arange(classes)] = 1.0 - conflict
    T[1:, classes] += conflict
    return T


def sequence_envelopes(q, length):
    """(length x q) time profiles: one sinusoid per class direction, a bump for the event direction."""
    t = np.arange(length)
    env = np.stack([np.sin(2.0 * np.pi * (j + 1) * (t + 1) / length) for j in range(q - 1)], axis=1)
    bump = np.exp(-((t - length / 2.0) ** 2) / (2.0 * EVENT_BUMP_WIDTH ** 2))
    return np.concatenate([env, bump[:, None]], axis=1)


def missing_mask(n, m, rate, rng):
    """(n x m) presence mask with each sample kept by at least one client."""
    present = rng.random((n, m)) >= rate
    for k in np.flatnonzero(~present.any(axis=0)):
        present[rng.integers(0, n), k] = True
    return present


def generate(spec: SyntheticSpec):
    """Build a dataset from ``spec`` (deterministic in ``spec.seed``).

    Returns:
        SyntheticDataset with per-client inputs, presence mask, labels, the
        planted graph and the planted latent permutations
    """
    spec.validate()
    rng = np.random.default_rng([spec.seed, 0xF3])
    n, m, C = spec.clients, spec.samples, spec.classes
    A = planted_graph(spec, rng)
    labels = np.concatenate([np.arange(C), rng.integers(0, C, size=m - C)])
    labels = labels[rng.permutation(m)]
    events = event_masks(labels, A, rng)
    templates = class_templates(C, spec.conflict)
    q = C + 1
    signal = templates[labels]
    amplitude = (1.0 - spec.conflict) + spec.conflict * events
    envelopes = sequence_envelopes(q, spec.sequence_length)

    inputs = []
    for i, (p, kind) in enumerate(zip(spec.client_input_dims(), spec.client_kinds())):
        mix = rng.normal(0.0, 1.0, size=(p, q)) / np.sqrt(q)
        node_signal = amplitude[:, i:i + 1] * signal
        if kind == "fc":
            x = node_signal @ mix.T + spec.noise * rng.standard_normal((m, p))
        else:
            timed = node_signal[:, None, :] * envelopes[None, :, :]
            x = timed @ mix.T + spec.noise * rng.standard_normal((m, spec.sequence_length, p))
        inputs.append(x)

    present = missing_mask(n, m, spec.missing_rate, rng)
    for i in range(n):
        inputs[i][~present[i]] = 0.0

    if spec.permutations == "random_per_client":
        perms = np.stack([rng.permutation(spec.latent_dim) for _ in range(n)])
    else:
        perms = np.tile(np.arange(spec.latent_dim), (n, 1))
    return SyntheticDataset(spec, inputs, present, labels.astype(np.int64), A, perms.astype(np.int64), events)

"""
Local data owners: shard, embedding phi_i and the logistic head (W_i, b_i).

A client trains in isolation on its own shard, then is frozen. Only the
latents and head probabilities leave the client (see
``src.federation.bundle``).
"""

import hashlib
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.localmodels.embeddings import make_embedding, uniform_init
from src.numcore import ops
from src.numcore.errors import ContractError, DegenerateShardWarning, MissingDataError, ShapeError
from src.numcore.matrix import Matrix
from src.numcore.optim import Adam
from src.numcore.tape import Tape
from src.utils.console import log


class ClientShard:
    """One client's inputs for all m samples, behind an access counter.

    ``inputs`` has shape (m, p) for vector data or (m, T, p) for sequences.
    Absent samples keep a zero placeholder row and ``present[k] == False``;
    the placeholder is never used as data.
    """

    def __init__(self, inputs, present=None):
        inputs = np.array(inputs, dtype=np.float64)
        if inputs.ndim not in (2, 3):
            raise ShapeError(f"shard inputs must be (m, p) or (m, T, p), got {inputs.shape}")
        m = inputs.shape[0]
        present = np.ones(m, dtype=bool) if present is None else np.array(present, dtype=bool)
        if present.shape != (m,):
            raise ShapeError(f"present mask {present.shape} does not match {m} samples")
        inputs[~present] = 0.0
        inputs.setflags(write=False)
        present.setflags(write=False)
        self._inputs = inputs
        self._present = present
        self.reads = 0
        self.bytes_read = 0

    @property
    def present(self):
        return self._present

    @property
    def sample_count(self):
        return self._inputs.shape[0]

    @property
    def is_sequence(self):
        return self._inputs.ndim == 3

    @property
    def feature_dim(self):
        return self._inputs.shape[-1]

    def read(self, index=None):
        """Return inputs (all rows, or the given rows) and count the access."""
        data = self._inputs if index is None else self._inputs[np.asarray(index)]
        self.reads += 1
        self.bytes_read += data.nbytes
        return data


@dataclass
class LogisticHead:
    """softmax(W h + b) with W (classes x d) and b (classes x 1)."""

    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = np.array(self.W, dtype=np.float64)
        self.b = np.array(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0], 1):
            raise ShapeError(f"head W {self.W.shape} and b {self.b.shape} are inconsistent")

    @classmethod
    def init(cls, hidden_dim, class_count, rng):
        return cls(uniform_init(rng, (class_count, hidden_dim), hidden_dim),
                   uniform_init(rng, (class_count, 1), hidden_dim))

    @property
    def class_count(self):
        return self.W.shape[0]

    @property
    def input_dim(self):
        return self.W.shape[1]

    def parameter_arrays(self):
        return [self.W, self.b]

    def forward(self, latents, params=None):
        """Class probabilities for a batch of latent rows (m x d) -> (m x classes)."""
        W, b = (Matrix(self.W), Matrix(self.b)) if params is None else params
        return ops.softmax_rows(ops.add(ops.matmul(latents, ops.transpose(W)), ops.transpose(b)))

    def copy(self):
        return LogisticHead(self.W.copy(), self.b.copy())


@dataclass
class TrainingHistory:
    losses: List[float] = field(default_factory=list)
    accuracies: List[float] = field(default_factory=list)

    def to_dict(self):
        return {"losses": list(self.losses), "accuracies": list(self.accuracies)}


@dataclass
class LocalTrainingConfig:
    epochs: int = 200
    lr: float = 0.01


class LocalClient:
    """
    One data owner.

    Args:
        client_id: index i of the client
        embedding: FcEmbedding or GruEmbedding with hidden size d
        head: LogisticHead over the d-dimensional latent
        shard: ClientShard with all m samples (absent ones flagged)
    """

    def __init__(self, client_id, embedding, head, shard, frozen=False):
        if head.input_dim != embedding.hidden_dim:
            raise ShapeError(
                f"client {client_id}: head expects {head.input_dim} latent dims, "
                f"embedding produces {embedding.hidden_dim}")
        if shard.feature_dim != embedding.input_dim:
            raise ShapeError(
                f"client {client_id}: shard has {shard.feature_dim} features, "
                f"embedding expects {embedding.input_dim}")
        if shard.is_sequence != (embedding.kind == "gru"):
            raise ShapeError(f"client {client_id}: {embedding.kind} embedding cannot read "
                             f"{'sequence' if shard.is_sequence else 'vector'} inputs")
        self.id = client_id
        self.embedding = embedding
        self.head = head
        self.shard = shard
        self.frozen = frozen

    @classmethod
    def create(cls, client_id, kind, shard, hidden_dim, class_count, seed):
        """Build a client with parameters drawn from a generator keyed by (seed, client id)."""
        rng = np.random.default_rng([seed, client_id])
        embedding = make_embedding(kind, shard.feature_dim, hidden_dim, rng)
        head = LogisticHead.init(hidden_dim, class_count, rng)
        return cls(client_id, embedding, head, shard)

    @property
    def present(self):
        return self.shard.present

    @property
    def hidden_dim(self):
        return self.embedding.hidden_dim

    @property
    def class_count(self):
        return self.head.class_count

    def parameter_arrays(self):
        return self.embedding.parameter_arrays() + self.head.parameter_arrays()

    def checksum(self):
        """SHA-256 over every parameter buffer, in declaration order."""
        digest = hashlib.sha256()
        for arr in self.parameter_arrays():
            digest.update(np.ascontiguousarray(arr).tobytes())
        return digest.hexdigest()

    def copy(self):
        return LocalClient(self.id, self.embedding.copy(), self.head.copy(), self.shard, self.frozen)

    def embed(self, index=None, params=None):
        """Latents for the given rows (all m rows when ``index`` is None)."""
        inputs = self.shard.read(index)
        return self.embedding.forward(inputs, params)

    def embed_masked(self, params=None):
        """All m latent rows with absent samples zeroed."""
        mask = Matrix.column(self.present.astype(np.float64))
        return ops.mul(self.embed(None, params), mask)

    def predict_proba(self, index=None):
        return self.head.forward(self.embed(index)).numpy()

    def __repr__(self):
        state = "frozen" if self.frozen else "trainable"
        return (f"LocalClient(id={self.id}, {self.embedding.kind}, d={self.hidden_dim}, "
                f"classes={self.class_count}, present={int(self.present.sum())}/{self.shard.sample_count}, {state})")


def local_forward(client, k):
    """h = phi_i(x_ik) and probs = softmax(W_i h + b_i) for one sample.

    Returns:
        Tuple[Matrix, Matrix]: latent (d x 1) and class probabilities (classes x 1)
    """
    if not 0 <= k < client.shard.sample_count:
        raise IndexError(f"sample {k} outside [0, {client.shard.sample_count})")
    if not client.present[k]:
        raise MissingDataError(f"client {client.id} holds no data for sample {k}")
    h = client.embed([k])
    probs = client.head.forward(h)
    return ops.transpose(h), ops.transpose(probs)


def _accuracy(probs, labels):
    return float(np.mean(np.argmax(probs, axis=1) == labels)) if len(labels) else 0.0


def pretrain_local(client, labels, cfg: Optional[LocalTrainingConfig] = None, train_index=None):
    """Fit phi_i and (W_i, b_i) by full-batch Adam on the client's present samples.

    Args:
        client: client to train; it is not modified
        labels: class index per sample, length m
        cfg: epochs and learning rate
        train_index: samples the client may learn from (all when None)

    Returns:
        Tuple[LocalClient, TrainingHistory]: frozen trained copy and per-epoch loss/accuracy
    """
    cfg = cfg or LocalTrainingConfig()
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (client.shard.sample_count,):
        raise ShapeError(f"client {client.id}: {labels.shape[0]} labels for {client.shard.sample_count} samples")
    if cfg.epochs < 0 or cfg.lr < 0:
        raise ContractError(f"local training needs epochs >= 0 and lr >= 0, got {cfg.epochs}, {cfg.lr}")

    trained = client.copy()
    index = np.flatnonzero(trained.present)
    if train_index is not None:
        index = np.intersect1d(index, np.asarray(train_index, dtype=np.int64))
    if len(index) == 0:
        message = f"client {client.id}: no present training samples, keeping the initial weights"
        warnings.warn(message, DegenerateShardWarning, stacklevel=2)
        log(message, "WARNING")
        trained.frozen = True
        return trained, TrainingHistory()
    y = labels[index]
    if len(np.unique(y)) < 2:
        message = f"client {client.id}: shard holds a single class, head will predict a constant"
        warnings.warn(message, DegenerateShardWarning, stacklevel=2)
        log(message, "WARNING")

    params = trained.parameter_arrays()
    n_embed = len(trained.embedding.names)
    optimizer = Adam(params, lr=cfg.lr)
    history = TrainingHistory()
    inputs = trained.shard.read(index)

    for epoch in range(cfg.epochs):
        tape = Tape()
        leaves = [tape.watch(p) for p in params]
        probs = trained.head.forward(trained.embedding.forward(inputs, leaves[:n_embed]), leaves[n_embed:])
        loss = ops.cross_entropy(probs, y)
        grads = tape.gradient(loss, leaves)
        optimizer.step(grads)
        history.losses.append(loss.item())
        history.accuracies.append(_accuracy(probs.data, y))
        if epoch % 50 == 0:
            log(f"client {client.id} epoch {epoch}: loss {loss.item():.4f}", "DEBUG")

    trained.frozen = True
    if history.losses:
        log(f"client {client.id} pre-trained: loss {history.losses[-1]:.4f}, "
            f"train acc {history.accuracies[-1]:.3f}", "DEBUG")
    return trained, history


def clone_with_parameters(client, embedding, head):
    """Same shard and id, new parameters."""
    return LocalClient(client.id, embedding, head, client.shard, client.frozen)

"""
Reference systems built from the same one-round payload: majority vote over
local heads, best single client, and a linear head on concatenated latents.
"""

import numpy as np

from src.federation.metrics import macro_f1
from src.federation.trainer import EarlyStopping, fit, validation_cross_entropy
from src.localmodels.embeddings import uniform_init
from src.numcore import ops
from src.numcore.errors import ContractError, DegenerateSampleError
from src.numcore.matrix import Matrix


def majority_vote(local_predictions, class_count):
    """Modal local prediction per sample; ties go to the lowest class index.

    Args:
        local_predictions: (n x m) predicted class per client, -1 where absent
        class_count: number of classes

    Returns:
        np.ndarray: class per sample
    """
    preds = np.asarray(local_predictions, dtype=np.int64)
    votes = np.zeros((preds.shape[1], class_count), dtype=np.int64)
    for row in preds:
        present = row >= 0
        votes[np.flatnonzero(present), row[present]] += 1
    empty = np.flatnonzero(votes.sum(axis=1) == 0)
    if len(empty):
        raise DegenerateSampleError(f"no client holds data for sample {int(empty[0])}")
    return np.argmax(votes, axis=1)


def client_predictions(bundle, client_id, fallback):
    """Client i's predicted class per sample, ``fallback`` where it holds no data."""
    preds = np.argmax(bundle.local_probs[client_id], axis=1)
    return np.where(bundle.present[client_id], preds, fallback)


def training_majority_class(bundle):
    labels = bundle.labels[bundle.indices("train")]
    return int(np.argmax(np.bincount(labels, minlength=bundle.class_count)))


def best_model_selection(bundle):
    """Client with the highest validation macro-F1 (lowest id on ties).

    Samples a client does not hold are scored with the training-majority class.

    Returns:
        Tuple[int, List[float]]: chosen client id and every client's validation F1
    """
    val = bundle.indices("val")
    if len(val) == 0:
        raise ContractError("best-model selection needs a nonempty validation split")
    fallback = training_majority_class(bundle)
    scores = [macro_f1(bundle.labels[val], client_predictions(bundle, i, fallback)[val], bundle.class_count)
              for i in range(bundle.client_count)]
    best = 0
    for i, score in enumerate(scores):
        if score > scores[best]:
            best = i
    return best, scores


def concatenated_latents(bundle):
    """(m x n*d): client blocks side by side, zeros where a client is absent."""
    return np.hstack([np.where(bundle.present[i][:, None], L, 0.0) for i, L in enumerate(bundle.latents)])


class ConcatProblem:
    """Linear softmax head on the concatenated latents, for ``trainer.fit``."""

    def __init__(self, bundle, seed=0, block_order=None):
        self.bundle = bundle
        self.X = concatenated_latents(bundle)
        width = self.X.shape[1]
        rng = np.random.default_rng([seed, 3])
        self.W = uniform_init(rng, (width, bundle.class_count), width)
        self.b = np.zeros((1, bundle.class_count))
        if block_order is not None:
            d = bundle.latent_dim
            blocks = [self.W[j * d:(j + 1) * d] for j in block_order]
            self.W = np.vstack(blocks)
        self.train_index = bundle.indices("train")
        self.val_index = bundle.indices("val")

    def param_groups(self, lr):
        return [([self.W, self.b], lr)]

    def _probs(self, index, params=None):
        W, b = (Matrix(self.W), Matrix(self.b)) if params is None else params
        return ops.softmax_rows(ops.add(ops.matmul(Matrix(self.X[index]), W), b))

    def train_loss(self, leaves, step):
        return ops.cross_entropy(self._probs(self.train_index, leaves), self.bundle.labels[self.train_index])

    def val_loss(self):
        return validation_cross_entropy(self.predict(self.val_index), self.bundle.labels[self.val_index])

    def after_step(self, step):
        pass

    def after_restore(self):
        pass

    def predict(self, index, **_):
        return self._probs(np.asarray(index)).numpy()


def concat_baseline(bundle, stopping=None, seed=0):
    """Train the concatenation head with the shared early-stopping protocol.

    Returns:
        FitResult whose ``problem.predict(index)`` gives class probabilities
    """
    return fit(lambda: ConcatProblem(bundle, seed), stopping or EarlyStopping(), name="G_concat")

"""
Server-side fusion models over the shared latents.

Latents of all clients for a batch of m samples are interleaved into one
(m*n x d_out) matrix, row k*n + i holding client i's aligned latent for
sample k, so every graph operation is a block operation over n-row blocks.

    mean_pool: softmax(mean_i relu(H W0 + b0) W1 + b1)
    gcn:       H' = relu(A_hat H W0) (+ H W_skip)
               softmax(mean_i (A_hat H') W1)
"""

from typing import Callable, Optional

import numpy as np

from src.alignment.alignment_set import AlignmentSet, apply_alignment
from src.graphsampler.adjacency import normalize_adjacency
from src.graphsampler.posterior import GraphPosterior, sample_graph
from src.numcore import ops
from src.numcore.errors import ConfigError, ContractError, DegenerateSampleError, ShapeError
from src.numcore.matrix import Matrix, as_matrix

MODEL_VARIANTS = ("mean_pool", "gcn")
GRAPH_MODES = ("none", "given", "knn", "icdf", "gumbel")
LEARNED_GRAPH_MODES = ("icdf", "gumbel")
# Philox step reserved for inference-time graph samples
INFERENCE_STEP = 2 ** 40


class GlobalModel:
    """
    Fusion model w = (W0, W1, {P_i}) plus the graph posterior theta.

    Args:
        variant: ``mean_pool`` or ``gcn``
        client_count: n
        weights: dict with W0 (d_out x hidden), W1 (hidden x classes) and,
            when used, b0 (1 x hidden), b1 (1 x classes), W_skip (d_out x hidden)
        alignment: AlignmentSet for the n clients
        graph_mode: one of GRAPH_MODES (gcn only; mean_pool uses ``none``)
        posterior: GraphPosterior for learned graph modes
        graph_provider: callable(latents, present) -> normalized adjacency for
            ``given`` and ``knn`` modes
    """

    def __init__(self, variant, client_count, weights, alignment, graph_mode="none",
                 posterior: Optional[GraphPosterior] = None, graph_provider: Optional[Callable] = None):
        if variant not in MODEL_VARIANTS:
            raise ConfigError(f"Unknown global model variant '{variant}', expected one of {MODEL_VARIANTS}")
        if graph_mode not in GRAPH_MODES:
            raise ConfigError(f"Unknown graph mode '{graph_mode}', expected one of {GRAPH_MODES}")
        if variant == "mean_pool" and graph_mode != "none":
            raise ConfigError(f"mean_pool model takes no graph, got graph mode '{graph_mode}'")
        if graph_mode in LEARNED_GRAPH_MODES and (posterior is None or posterior.method != graph_mode):
            raise ConfigError(f"graph mode '{graph_mode}' needs a matching GraphPosterior")
        if graph_mode in ("given", "knn") and graph_provider is None:
            raise ConfigError(f"graph mode '{graph_mode}' needs a graph provider")
        if alignment.client_count != client_count:
            raise ShapeError(f"alignment covers {alignment.client_count} clients, model has {client_count}")
        self.variant = variant
        self.client_count = client_count
        self.weights = {name: np.array(w, dtype=np.float64) for name, w in weights.items()}
        self.alignment = alignment
        self.graph_mode = graph_mode
        self.posterior = posterior if graph_mode in LEARNED_GRAPH_MODES else None
        self.graph_provider = graph_provider
        if self.weights["W0"].shape[0] != alignment.d_out:
            raise ShapeError(f"W0 expects {self.weights['W0'].shape[0]} input features, "
                             f"alignment produces {alignment.d_out}")

    @classmethod
    def init(cls, variant, client_count, d, class_count, seed, hidden=8, d_out=None,
             alignment_mode="none", sinkhorn_steps=5, use_bias=True, skip=True,
             graph_mode="none", posterior_kwargs=None, graph_provider=None):
        """Seeded initialization.

        W0 and W1 are drawn first from the same stream for both variants, so a
        mean_pool model and a gcn model with the same seed share them.
        """
        d_out = d if d_out is None else d_out
        rng = np.random.default_rng([seed, 0])
        weights = {
            "W0": rng.uniform(-1.0, 1.0, size=(d_out, hidden)) / np.sqrt(d_out),
            "W1": rng.uniform(-1.0, 1.0, size=(hidden, class_count)) / np.sqrt(hidden),
        }
        if variant == "mean_pool" and use_bias:
            weights["b0"] = np.zeros((1, hidden))
            weights["b1"] = np.zeros((1, class_count))
        if variant == "gcn" and skip:
            weights["W_skip"] = rng.uniform(-1.0, 1.0, size=(d_out, hidden)) / np.sqrt(d_out)
        alignment = AlignmentSet.init(alignment_mode, client_count, d, np.random.default_rng([seed, 1]),
                                      d_out=d_out, steps=sinkhorn_steps)
        posterior = None
        if graph_mode in LEARNED_GRAPH_MODES:
            kwargs = dict(posterior_kwargs or {})
            kwargs["method"] = graph_mode
            posterior = GraphPosterior.init(client_count, np.random.default_rng([seed, 2]), **kwargs)
        return cls(variant, client_count, weights, alignment, graph_mode, posterior, graph_provider)

    # -- parameters -----------------------------------------------------------

    @property
    def weight_names(self):
        return [name for name in ("W0", "W1", "b0", "b1", "W_skip") if name in self.weights]

    @property
    def class_count(self):
        return self.weights["W1"].shape[1]

    @property
    def hidden(self):
        return self.weights["W0"].shape[1]

    @property
    def skip(self):
        return "W_skip" in self.weights

    def parameter_arrays(self):
        """Weights, then alignment free matrices, then edge logits; updated in place by the optimizer."""
        arrays = [self.weights[name] for name in self.weight_names]
        arrays += self.alignment.parameter_arrays()
        if self.posterior is not None:
            arrays += self.posterior.parameter_arrays()
        return arrays

    def split_params(self, params=None):
        if params is None:
            return None, None, None
        k = len(self.weight_names)
        a = len(self.alignment.parameter_arrays())
        weights = dict(zip(self.weight_names, params[:k]))
        return weights, list(params[k:k + a]), list(params[k + a:]) or None

    def copy(self):
        return GlobalModel(self.variant, self.client_count, {k: v.copy() for k, v in self.weights.items()},
                           self.alignment.copy(), self.graph_mode,
                           self.posterior.copy() if self.posterior is not None else None, self.graph_provider)

    def after_step(self):
        if self.posterior is not None:
            self.posterior.clamp()

    # -- graph ----------------------------------------------------------------

    def adjacency(self, latents=None, present=None, training=False, params=None, seed=0, step=0,
                  stream=0, counter=None, sample=False):
        """Normalized adjacency used by the gcn variant.

        Learned graphs are sampled during training (or when ``sample`` is set)
        and replaced by E[A] = theta otherwise. The posterior diagonal (the
        configured self-loop value) is kept through the normalization.
        """
        n = self.client_count
        if self.graph_mode == "none":
            return Matrix.eye(n)
        if self.graph_mode in ("given", "knn"):
            return as_matrix(self.graph_provider(latents, present))
        if training or sample:
            return sample_graph(self.posterior, seed, step, counter, params, stream=stream)
        return normalize_adjacency(self.posterior.expected_adjacency(params), self_loops="keep")

    def __repr__(self):
        return (f"GlobalModel({self.variant}, n={self.client_count}, hidden={self.hidden}, "
                f"classes={self.class_count}, align={self.alignment.mode}, graph={self.graph_mode})")


def _check_present(present, m):
    present = np.asarray(present, dtype=bool)
    if present.ndim != 2 or present.shape[1] != m:
        raise ShapeError(f"present mask {present.shape} does not cover {m} samples")
    empty = np.flatnonzero(~present.any(axis=0))
    if len(empty):
        raise DegenerateSampleError(f"no client holds data for sample {int(empty[0])} "
                                    f"({len(empty)} such samples)")
    return present


def _masked_latents(latents, present):
    out = []
    for i, L in enumerate(latents):
        L = as_matrix(L)
        if L.rows != present.shape[1]:
            raise ShapeError(f"client {i}: {L.rows} latent rows for {present.shape[1]} samples")
        if L.tracked:
            out.append(ops.mul(L, Matrix.column(present[i].astype(np.float64))))
        else:
            out.append(Matrix(np.where(present[i][:, None], L.data, 0.0)))
    return out


def global_logits(gm, latents, adjacency=None, params=None):
    """Pre-softmax scores (m x classes) for masked latents and a fixed normalized adjacency."""
    weights, align_params, _ = gm.split_params(params)
    W = {k: Matrix(v) for k, v in gm.weights.items()} if weights is None else weights
    n = gm.client_count
    if len(latents) != n:
        raise ShapeError(f"model fuses {n} clients, got {len(latents)} latent blocks")
    aligned = apply_alignment(gm.alignment, latents, align_params)
    X = ops.interleave_rows(aligned)
    if gm.variant == "mean_pool":
        Z = ops.matmul(X, W["W0"])
        if "b0" in W:
            Z = ops.add(Z, W["b0"])
        pooled = ops.block_mean(ops.relu(Z), n)
        logits = ops.matmul(pooled, W["W1"])
        if "b1" in W:
            logits = ops.add(logits, W["b1"])
        return logits
    A = adjacency if adjacency is not None else Matrix.eye(n)
    H1 = ops.relu(ops.block_left_matmul(A, ops.matmul(X, W["W0"]), n))
    if "W_skip" in W:
        H1 = ops.add(H1, ops.matmul(X, W["W_skip"]))
    dagger = ops.block_left_matmul(A, H1, n)
    return ops.matmul(ops.block_mean(dagger, n), W["W1"])


def global_forward(gm, latents, present, params=None, training=False, seed=0, step=0, stream=0,
                   counter=None, sample=False):
    """Class probabilities (m x classes) for a batch of m samples.

    Args:
        gm: GlobalModel
        latents: list of n per-client latent matrices (m x d); absent rows are
            replaced by zeros here
        present: (n x m) boolean mask
        params: tracked parameters in ``gm.parameter_arrays()`` order
        training: sample the graph (learned modes) instead of using E[A]
        seed, step, stream: key of the graph-sampling stream
        counter: DrawCounter for graph draws
        sample: sample the graph outside training as well
    """
    if not latents:
        raise ContractError("global_forward needs at least one client")
    m = as_matrix(latents[0]).rows
    present = _check_present(present, m)
    latents = _masked_latents(latents, present)
    A = None
    if gm.variant == "gcn":
        _, _, graph_params = gm.split_params(params)
        A = gm.adjacency(latents, present, training, graph_params, seed, step, stream, counter, sample)
    return ops.softmax_rows(global_logits(gm, latents, A, params))


def f3_loss(gm, bundle, index=None, params=None, seed=0, step=0, samples=1, counter=None, latents=None):
    """Mean cross-entropy of the fused prediction, averaged over ``samples`` graph draws.

    Args:
        gm: GlobalModel
        bundle: object with ``latents`` (n arrays m x d), ``present`` (n x m) and ``labels`` (m)
        index: rows of the bundle to use (all when None)
        params: tracked parameters of ``gm``
        seed, step: key of the graph-sampling stream
        samples: S, number of graph samples averaged (learned graph modes only)
        counter: DrawCounter for graph draws
        latents: tracked latent matrices replacing the bundle's (end-to-end variants)

    Returns:
        Matrix: 1x1 loss
    """
    index = np.arange(len(bundle.labels)) if index is None else np.asarray(index)
    if len(index) == 0:
        raise ContractError("f3_loss needs a nonempty set of samples")
    labels = np.asarray(bundle.labels)[index]
    present = np.asarray(bundle.present)[:, index]
    if latents is None:
        batch = [Matrix(np.asarray(L)[index]) for L in bundle.latents]
    else:
        batch = [ops.take_rows(L, index) for L in latents]
    draws = samples if gm.graph_mode in LEARNED_GRAPH_MODES else 1
    if draws < 1:
        raise ContractError(f"graph sample count must be >= 1, got {samples}")
    total = None
    for s in range(draws):
        probs = global_forward(gm, batch, present, params, training=True, seed=seed, step=step,
                               stream=s, counter=counter)
        loss = ops.cross_entropy(probs, labels)
        total = loss if total is None else ops.add(total, loss)
    return total if draws == 1 else ops.scale(total, 1.0 / draws)


def predict_proba(gm, bundle, index=None, seed=0, sample_at_inference=False, samples=1):
    """Inference-time probabilities: E[A] = theta, or the mean over ``samples`` sampled graphs."""
    index = np.arange(len(bundle.labels)) if index is None else np.asarray(index)
    present = np.asarray(bundle.present)[:, index]
    batch = [Matrix(np.asarray(L)[index]) for L in bundle.latents]
    if not (sample_at_inference and gm.graph_mode in LEARNED_GRAPH_MODES):
        return global_forward(gm, batch, present).numpy()
    probs = [global_forward(gm, batch, present, seed=seed, step=INFERENCE_STEP, stream=s, sample=True).numpy()
             for s in range(max(samples, 1))]
    return np.mean(probs, axis=0)

"""
kappa-NN graph baseline.

Node features for a batch are projected by a fixed, seeded one-hidden-layer
map; each node links to its kappa most cosine-similar nodes, the edge set is
symmetrized by elementwise max and normalized like any other adjacency.
"""

import numpy as np

from src.graphsampler.adjacency import normalize_adjacency
from src.numcore.errors import ContractError
from src.numcore.matrix import as_matrix

PROJECTION_HIDDEN = 32
PROJECTION_OUT = 16
NORM_FLOOR = 1e-12


def projection_weights(input_dim, seed, hidden=PROJECTION_HIDDEN, out=PROJECTION_OUT):
    rng = np.random.default_rng([seed, input_dim, 0x4B4E])
    W_a = rng.normal(0.0, 1.0 / np.sqrt(input_dim), size=(input_dim, hidden))
    W_b = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, out))
    return W_a, W_b


def project(features, seed):
    features = np.asarray(features, dtype=np.float64)
    W_a, W_b = projection_weights(features.shape[1], seed)
    return np.tanh(features @ W_a) @ W_b


def cosine_similarity(Z):
    norms = np.maximum(np.linalg.norm(Z, axis=1, keepdims=True), NORM_FLOOR)
    U = Z / norms
    return U @ U.T


def knn_edges(similarity, kappa):
    """0/1 matrix, row i marking its kappa most similar other nodes (lowest index wins ties)."""
    n = similarity.shape[0]
    S = np.array(similarity, dtype=np.float64)
    np.fill_diagonal(S, -np.inf)
    A = np.zeros((n, n))
    for i in range(n):
        neighbors = np.argsort(-S[i], kind="stable")[:kappa]
        A[i, neighbors] = 1.0
    return A


def knn_graph(features, kappa, seed=0, project_features=True):
    """Normalized kappa-NN adjacency over n node feature rows.

    Args:
        features: (n x F) node features
        kappa: neighbors per node, 1 <= kappa < n
        seed: seed of the projection map
        project_features: pass features through the projection first

    Returns:
        Matrix: normalized (n x n) adjacency
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    if not 1 <= kappa < n:
        raise ContractError(f"kappa-NN graph needs 1 <= kappa < n, got kappa={kappa}, n={n}")
    Z = project(features, seed) if project_features else features
    A = knn_edges(cosine_similarity(Z), kappa)
    return normalize_adjacency(np.maximum(A, A.T))


def node_features(latents):
    """One row per client: its latent block for the batch, flattened sample-major."""
    return np.stack([as_matrix(L).data.ravel() for L in latents])


def knn_provider(kappa, seed=0):
    """Graph provider for the global model: a fresh kappa-NN graph per batch."""
    def provide(latents, present):
        return knn_graph(node_features(latents), kappa, seed)
    return provide


def given_provider(graph):
    """Graph provider returning the normalized planted graph for every batch."""
    A_hat = normalize_adjacency(np.asarray(graph, dtype=np.float64))

    def provide(latents, present):
        return A_hat
    return provide

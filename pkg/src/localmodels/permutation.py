"""
Latent-dimension permutations that leave a client's predictions unchanged.

Reordering the hidden units of phi_i together with the columns of W_i gives
the same g_i(x); independently trained clients therefore end up with
arbitrarily ordered latents.
"""

import numpy as np

from src.localmodels.client import LogisticHead, clone_with_parameters
from src.localmodels.embeddings import FcEmbedding, GruEmbedding
from src.numcore.errors import ContractError


def check_permutation(p, d):
    p = np.asarray(p)
    if p.shape != (d,) or not np.issubdtype(p.dtype, np.integer):
        raise ContractError(f"permutation must be {d} integer indices, got shape {p.shape} dtype {p.dtype}")
    if not np.array_equal(np.sort(p), np.arange(d)):
        raise ContractError(f"{p.tolist()} is not a permutation of 0..{d - 1}")
    return p.astype(np.int64)


def permutation_matrix(p):
    """Matrix P with (P h) == h[p]."""
    p = np.asarray(p, dtype=np.int64)
    P = np.zeros((len(p), len(p)))
    P[np.arange(len(p)), p] = 1.0
    return P


def inverse_permutation(p):
    p = np.asarray(p, dtype=np.int64)
    inv = np.empty_like(p)
    inv[p] = np.arange(len(p))
    return inv


def _permute_head(head, p):
    return LogisticHead(head.W[:, p], head.b.copy())


def permute_fc(embedding: FcEmbedding, head: LogisticHead, p):
    """U[p,:], c[p] and head columns W[:,p]; b unchanged."""
    p = check_permutation(p, embedding.hidden_dim)
    permuted = FcEmbedding({"U": embedding.params["U"][p, :], "c": embedding.params["c"][p, :]})
    return permuted, _permute_head(head, p)


def permute_gru(embedding: GruEmbedding, head: LogisticHead, p):
    """W_*[p,:], U_*[p][:,p], b_*[p] for every gate; head columns W[:,p]."""
    p = check_permutation(p, embedding.hidden_dim)
    params = {}
    for gate in "zrn":
        params[f"W_{gate}"] = embedding.params[f"W_{gate}"][p, :]
        params[f"U_{gate}"] = embedding.params[f"U_{gate}"][np.ix_(p, p)]
        params[f"b_{gate}"] = embedding.params[f"b_{gate}"][p, :]
    return GruEmbedding(params), _permute_head(head, p)


PERMUTERS = {"fc": permute_fc, "gru": permute_gru}


def permute_client(client, p):
    """Client with permuted embedding and head; same id, shard and frozen state."""
    embedding, head = PERMUTERS[client.embedding.kind](client.embedding, client.head, p)
    return clone_with_parameters(client, embedding, head)

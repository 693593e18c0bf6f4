"""
Per-client alignment matrices P_i applied to the shared latents.

Modes:
    none  every P_i acts as the identity
    soft  free matrices P_i (d_out x d), initialized at identity + U(-0.01, 0.01)
    tied  one free matrix shared by all clients
    hard  P_i = sinkhorn(exp(F_i), T) with free square F_i
"""

import numpy as np
import pandas as pd

from src.alignment.sinkhorn import sinkhorn
from src.numcore import ops
from src.numcore.errors import ConfigError, ShapeError
from src.numcore.matrix import Matrix

ALIGNMENT_MODES = ("none", "soft", "tied", "hard")
SOFT_INIT_NOISE = 0.01
# diagonal bias of the free hard-mode matrix: exp(3) ~ 20x preference for the identity matching
HARD_INIT_DIAGONAL = 3.0


class AlignmentSet:
    """
    Alignment state for n clients with latent size d.

    Args:
        mode: one of ALIGNMENT_MODES
        client_count: n
        d: latent dimension of each client
        d_out: aligned width (equals d for hard mode)
        free: list of free parameter arrays (n for soft/hard, 1 for tied, 0 for none)
        steps: Sinkhorn truncation T (hard mode)
    """

    def __init__(self, mode, client_count, d, d_out=None, free=None, steps=5):
        if mode not in ALIGNMENT_MODES:
            raise ConfigError(f"Unknown alignment mode '{mode}', expected one of {ALIGNMENT_MODES}")
        d_out = d if d_out is None else d_out
        if mode == "none" and d_out != d:
            raise ConfigError(f"alignment mode 'none' cannot change width ({d} -> {d_out})")
        if mode == "hard" and d_out != d:
            raise ConfigError(f"hard alignment needs square matrices, got d_out={d_out} for d={d}")
        self.mode = mode
        self.client_count = client_count
        self.d = d
        self.d_out = d_out
        self.steps = steps
        self.free = [np.array(f, dtype=np.float64) for f in (free or [])]
        expected = {"none": 0, "soft": client_count, "tied": 1, "hard": client_count}[mode]
        if len(self.free) != expected:
            raise ShapeError(f"alignment mode '{mode}' needs {expected} matrices, got {len(self.free)}")
        for i, f in enumerate(self.free):
            if f.shape != (d_out, d):
                raise ShapeError(f"alignment matrix for client {i} is {f.shape}, expected {(d_out, d)}")

    @classmethod
    def init(cls, mode, client_count, d, rng, d_out=None, steps=5):
        d_out = d if d_out is None else d_out
        eye = np.eye(d_out, d)
        if mode == "none":
            free = []
        elif mode == "soft":
            free = [eye + rng.uniform(-SOFT_INIT_NOISE, SOFT_INIT_NOISE, size=(d_out, d))
                    for _ in range(client_count)]
        elif mode == "tied":
            free = [eye + rng.uniform(-SOFT_INIT_NOISE, SOFT_INIT_NOISE, size=(d_out, d))]
        elif mode == "hard":
            free = [HARD_INIT_DIAGONAL * eye + rng.uniform(-SOFT_INIT_NOISE, SOFT_INIT_NOISE, size=(d, d))
                    for _ in range(client_count)]
        else:
            raise ConfigError(f"Unknown alignment mode '{mode}', expected one of {ALIGNMENT_MODES}")
        return cls(mode, client_count, d, d_out, free, steps)

    @classmethod
    def from_matrices(cls, matrices, mode="soft", client_count=None):
        """Soft or tied set with the given P_i (for tied, pass a single matrix and the client count)."""
        matrices = [np.asarray(P, dtype=np.float64) for P in matrices]
        d_out, d = matrices[0].shape
        n = len(matrices) if client_count is None else client_count
        return cls(mode, n, d, d_out, matrices)

    def parameter_arrays(self):
        return self.free

    def copy(self):
        return AlignmentSet(self.mode, self.client_count, self.d, self.d_out,
                            [f.copy() for f in self.free], self.steps)

    def matrices(self, params=None):
        """Effective P_i per client as Matrix objects (None for mode 'none')."""
        if self.mode == "none":
            return None
        free = [Matrix(f) for f in self.free] if params is None else list(params)
        if self.mode == "tied":
            return [free[0]] * self.client_count
        if self.mode == "soft":
            return free
        return [sinkhorn(ops.exp(F), self.steps)[0] for F in free]

    def effective_arrays(self):
        mats = self.matrices()
        if mats is None:
            return [np.eye(self.d) for _ in range(self.client_count)]
        return [P.numpy() for P in mats]

    def to_frame(self):
        """Long-format heatmap table (client, row, col, value) of the effective P_i."""
        frames = []
        for i, P in enumerate(self.effective_arrays()):
            rows, cols = np.indices(P.shape)
            frames.append(pd.DataFrame({"client": i, "row": rows.ravel(), "col": cols.ravel(),
                                        "value": P.ravel()}))
        return pd.concat(frames, ignore_index=True)

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)
        return path

    def __repr__(self):
        return f"AlignmentSet(mode={self.mode}, n={self.client_count}, d={self.d}, d_out={self.d_out})"


def apply_alignment(alignment, latents, params=None):
    """Aligned latents L_i P_i^T for each client.

    Args:
        alignment: AlignmentSet
        latents: list of n Matrix objects, each (m x d) with one sample per row
        params: tracked free parameters, in ``parameter_arrays`` order

    Returns:
        list of n Matrix objects (m x d_out); row k of client i is (P_i h_ik)^T
    """
    if len(latents) != alignment.client_count:
        raise ShapeError(f"alignment covers {alignment.client_count} clients, got {len(latents)} latent blocks")
    for i, L in enumerate(latents):
        if L.cols != alignment.d:
            raise ShapeError(f"client {i}: latent width {L.cols} does not match alignment input width {alignment.d}")
    mats = alignment.matrices(params)
    if mats is None:
        return list(latents)
    return [ops.matmul(L, ops.transpose(P)) for L, P in zip(latents, mats)]

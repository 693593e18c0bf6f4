"""
Client-side embedding functions phi_i.

Parameters are stored in the column-vector convention (``U`` is
hidden x input, biases are hidden x 1); batched forward passes take one
sample per row and return an (m x hidden) latent matrix.
"""

from collections import OrderedDict

import numpy as np

from src.numcore import ops
from src.numcore.errors import ShapeError
from src.numcore.matrix import Matrix


def uniform_init(rng, shape, fan_in):
    a = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-a, a, size=shape)


class Embedding:
    """Common plumbing: named parameter arrays and tracked/untracked views."""

    kind = None
    names = ()

    def __init__(self, params):
        self.params = OrderedDict((name, np.array(params[name], dtype=np.float64)) for name in self.names)
        self._check_shapes()

    def _check_shapes(self):
        raise NotImplementedError

    def parameter_arrays(self):
        return [self.params[name] for name in self.names]

    def as_matrices(self, params=None):
        if params is None:
            return [Matrix(self.params[name]) for name in self.names]
        if len(params) != len(self.names):
            raise ShapeError(f"{self.kind} embedding expects {len(self.names)} parameters, got {len(params)}")
        return list(params)

    def copy(self):
        return type(self)({name: arr.copy() for name, arr in self.params.items()})

    @property
    def hidden_dim(self):
        raise NotImplementedError

    @property
    def input_dim(self):
        raise NotImplementedError


class FcEmbedding(Embedding):
    """``h = relu(U x + c)``."""

    kind = "fc"
    names = ("U", "c")

    def _check_shapes(self):
        U, c = self.params["U"], self.params["c"]
        if U.ndim != 2 or c.shape != (U.shape[0], 1):
            raise ShapeError(f"fc embedding: U {U.shape} and c {c.shape} are inconsistent")

    @classmethod
    def init(cls, input_dim, hidden_dim, rng):
        return cls({
            "U": uniform_init(rng, (hidden_dim, input_dim), input_dim),
            "c": uniform_init(rng, (hidden_dim, 1), input_dim),
        })

    @property
    def hidden_dim(self):
        return self.params["U"].shape[0]

    @property
    def input_dim(self):
        return self.params["U"].shape[1]

    def forward(self, inputs, params=None):
        """Latents for a batch of input rows (m x input) -> (m x hidden)."""
        U, c = self.as_matrices(params)
        X = inputs if isinstance(inputs, Matrix) else Matrix(inputs)
        if X.cols != self.input_dim:
            raise ShapeError(f"fc embedding expects {self.input_dim} input features, got {X.cols}")
        return ops.relu(ops.add(ops.matmul(X, ops.transpose(U)), ops.transpose(c)))


class GruEmbedding(Embedding):
    """GRU over a length-T sequence; the embedding is the last hidden state h_T."""

    kind = "gru"
    names = ("W_z", "W_r", "W_n", "U_z", "U_r", "U_n", "b_z", "b_r", "b_n")

    def _check_shapes(self):
        h, p = self.params["W_z"].shape
        for gate in "zrn":
            W, U, b = self.params[f"W_{gate}"], self.params[f"U_{gate}"], self.params[f"b_{gate}"]
            if W.shape != (h, p) or U.shape != (h, h) or b.shape != (h, 1):
                raise ShapeError(
                    f"gru embedding gate '{gate}': W {W.shape}, U {U.shape}, b {b.shape} "
                    f"inconsistent with hidden={h}, input={p}")

    @classmethod
    def init(cls, input_dim, hidden_dim, rng):
        params = {}
        for gate in "zrn":
            params[f"W_{gate}"] = uniform_init(rng, (hidden_dim, input_dim), input_dim)
            params[f"U_{gate}"] = uniform_init(rng, (hidden_dim, hidden_dim), hidden_dim)
            params[f"b_{gate}"] = uniform_init(rng, (hidden_dim, 1), hidden_dim)
        return cls(params)

    @property
    def hidden_dim(self):
        return self.params["W_z"].shape[0]

    @property
    def input_dim(self):
        return self.params["W_z"].shape[1]

    def forward(self, inputs, params=None):
        """Latents for a batch of sequences (m x T x input) -> (m x hidden)."""
        P = dict(zip(self.names, self.as_matrices(params)))
        seq = np.asarray(inputs, dtype=np.float64)
        if seq.ndim != 3 or seq.shape[2] != self.input_dim:
            raise ShapeError(f"gru embedding expects (m, T, {self.input_dim}) sequences, got {seq.shape}")
        m, T, _ = seq.shape
        WzT, WrT, WnT = (ops.transpose(P[k]) for k in ("W_z", "W_r", "W_n"))
        UzT, UrT, UnT = (ops.transpose(P[k]) for k in ("U_z", "U_r", "U_n"))
        bz, br, bn = (ops.transpose(P[k]) for k in ("b_z", "b_r", "b_n"))

        h = Matrix.zeros(m, self.hidden_dim)
        for t in range(T):
            x = Matrix(seq[:, t, :])
            z = ops.sigmoid(ops.add(ops.add(ops.matmul(x, WzT), ops.matmul(h, UzT)), bz))
            r = ops.sigmoid(ops.add(ops.add(ops.matmul(x, WrT), ops.matmul(h, UrT)), br))
            n = ops.tanh(ops.add(ops.add(ops.matmul(x, WnT), ops.matmul(ops.mul(r, h), UnT)), bn))
            # h_t = (1 - z) * h_{t-1} + z * n_t
            h = ops.add(ops.sub(h, ops.mul(z, h)), ops.mul(z, n))
        return h


EMBEDDING_KINDS = {"fc": FcEmbedding, "gru": GruEmbedding}


def make_embedding(kind, input_dim, hidden_dim, rng):
    if kind not in EMBEDDING_KINDS:
        raise ValueError(f"Unknown embedding kind '{kind}', expected one of {sorted(EMBEDDING_KINDS)}")
    return EMBEDDING_KINDS[kind].init(input_dim, hidden_dim, rng)

"""
Bernoulli posterior over consensus-graph edges.

Edge probabilities are stored as logits. In symmetric mode only the strict
upper triangle is a parameter; the lower triangle mirrors it and the diagonal
holds the configured self-loop value.
"""

import numpy as np
import pandas as pd
from scipy.special import expit

from src.graphsampler.adjacency import normalize_adjacency
from src.graphsampler.reference import ReferenceDistribution
from src.graphsampler.rng import make_generator
from src.graphsampler.samplers import DRAWS_PER_SAMPLE, gumbel_relax, icdf_relax
from src.numcore import ops
from src.numcore.errors import ConfigError, ContractError, ShapeError
from src.numcore.matrix import Matrix

GRAPH_SAMPLERS = ("icdf", "gumbel")
LOGIT_INIT_NOISE = 0.01
# logits are kept in [-LOGIT_LIMIT, LOGIT_LIMIT] so F^{-1}(theta) stays finite
LOGIT_LIMIT = 20.0


class GraphPosterior:
    """
    Product of independent edge Bernoullis Ber(theta_ij).

    Args:
        logits: (n x n) edge logits
        tau: relaxation temperature > 0
        ref: reference distribution for the ICDF sampler
        method: ``icdf`` or ``gumbel``
        symmetric: mirror the upper triangle
        self_loop: fixed diagonal value in [0, 1]
    """

    def __init__(self, logits, tau=0.5, ref=None, method="icdf", symmetric=True, self_loop=1.0):
        logits = np.array(logits, dtype=np.float64)
        if logits.ndim != 2 or logits.shape[0] != logits.shape[1]:
            raise ShapeError(f"edge logits must be square, got {logits.shape}")
        if method not in GRAPH_SAMPLERS:
            raise ConfigError(f"Unknown graph sampler '{method}', expected one of {GRAPH_SAMPLERS}")
        if not tau > 0:
            raise ContractError(f"temperature must be > 0, got {tau!r}")
        if not 0.0 <= self_loop <= 1.0:
            raise ContractError(f"self-loop value must lie in [0, 1], got {self_loop}")
        self.logits = logits
        self.tau = float(tau)
        self.ref = ref or ReferenceDistribution()
        self.method = method
        self.symmetric = symmetric
        self.self_loop = float(self_loop)
        n = logits.shape[0]
        self._edge_mask = np.triu(np.ones((n, n)), 1) if symmetric else 1.0 - np.eye(n)
        if symmetric:
            self.logits = np.triu(self.logits, 1) + np.triu(self.logits, 1).T

    @classmethod
    def init(cls, n, rng, tau=0.5, ref=None, method="icdf", symmetric=True, self_loop=1.0):
        """Uninformative start: logit(0.5) plus U(-0.01, 0.01) noise on every edge."""
        logits = rng.uniform(-LOGIT_INIT_NOISE, LOGIT_INIT_NOISE, size=(n, n))
        np.fill_diagonal(logits, 0.0)
        return cls(logits, tau, ref, method, symmetric, self_loop)

    @classmethod
    def from_theta(cls, theta, **kwargs):
        theta = np.array(theta, dtype=np.float64)
        off = ~np.eye(theta.shape[0], dtype=bool)
        if not np.all((theta[off] > 0) & (theta[off] < 1)):
            raise ContractError("edge probabilities must lie strictly inside (0, 1)")
        logits = np.zeros_like(theta)
        logits[off] = np.log(theta[off]) - np.log1p(-theta[off])
        return cls(logits, **kwargs)

    @property
    def n(self):
        return self.logits.shape[0]

    @property
    def edge_count(self):
        return int(self._edge_mask.sum())

    def parameter_arrays(self):
        return [self.logits]

    def copy(self):
        return GraphPosterior(self.logits.copy(), self.tau, self.ref, self.method, self.symmetric, self.self_loop)

    def clamp(self):
        np.clip(self.logits, -LOGIT_LIMIT, LOGIT_LIMIT, out=self.logits)

    def theta(self):
        """Edge probabilities with the self-loop value on the diagonal."""
        th = expit(self._edge_logits().data)
        np.fill_diagonal(th, self.self_loop)
        return th

    def _edge_logits(self, params=None):
        L = Matrix(self.logits) if params is None else params[0]
        upper = ops.mul(L, Matrix(self._edge_mask))
        if self.symmetric:
            return ops.add(upper, ops.transpose(upper))
        return upper

    def _with_diagonal(self, values):
        off = Matrix(1.0 - np.eye(self.n))
        return ops.add(ops.mul(values, off), Matrix(self.self_loop * np.eye(self.n)))

    def expected_adjacency(self, params=None):
        """E[A] = theta off the diagonal, self-loop value on it."""
        return self._with_diagonal(ops.sigmoid(self._edge_logits(params)))

    def draw_noise(self, rng, counter=None):
        """One noise matrix: reference draws s (ICDF) or g1 - g2 (Gumbel) on every edge."""
        rows, cols = np.nonzero(self._edge_mask)
        E = len(rows)
        if self.method == "icdf":
            values = np.asarray(self.ref.sample(rng, E), dtype=np.float64).reshape(E)
        else:
            g = rng.gumbel(size=(2, E))
            values = g[0] - g[1]
        if counter is not None:
            counter.add(E * DRAWS_PER_SAMPLE[self.method])
        noise = np.zeros((self.n, self.n))
        noise[rows, cols] = values
        if self.symmetric:
            noise[cols, rows] = values
        return noise

    def median_noise(self):
        """Noise that sends every edge to F^{-1}(0.5) (ICDF) or zero logit shift (Gumbel)."""
        value = float(self.ref.inverse_cdf(0.5)) if self.method == "icdf" else 0.0
        return np.where(self._edge_mask + self._edge_mask.T > 0, value, 0.0)

    def relax(self, noise, params=None):
        """Relaxed adjacency for fixed noise, differentiable in the logits."""
        logits = self._edge_logits(params)
        if self.method == "icdf":
            z = icdf_relax(ops.sigmoid(logits), noise, self.tau, self.ref)
        else:
            z = gumbel_relax(logits, noise, self.tau)
        return self._with_diagonal(z)

    def to_frame(self):
        th = self.theta()
        rows, cols = np.indices(th.shape)
        return pd.DataFrame({"row": rows.ravel(), "col": cols.ravel(), "theta": th.ravel()})

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)
        return path

    def __repr__(self):
        kind = "symmetric" if self.symmetric else "directed"
        return f"GraphPosterior(n={self.n}, {self.method}, tau={self.tau}, {kind})"


def sample_graph(gp, seed=0, step=0, counter=None, params=None, noise=None, stream=0):
    """Relaxed, normalized adjacency for one optimization step.

    Noise comes from the Philox stream keyed by (seed, step, stream) unless given;
    ``stream`` separates the S graph samples drawn within one step. The
    posterior diagonal is kept, so the configured self-loop value reaches A_hat.
    """
    if noise is None:
        noise = gp.draw_noise(make_generator(seed, step, stream), counter)
    return normalize_adjacency(gp.relax(noise, params), self_loops="keep")

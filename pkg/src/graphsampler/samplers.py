"""
Relaxed Bernoulli samplers.

ICDF: one reference draw s per sample, z = sigmoid((F^{-1}(theta) - s) / tau).
Gumbel: two Gumbel(0, 1) draws g1, g2 per sample, y1 = softmax((log pi + g) / tau)[0]
with pi = [theta, 1 - theta], evaluated as sigmoid((logit theta + g1 - g2) / tau).

Each public sampler takes an optional DrawCounter and adds exactly the number
of scalar draws it consumed.
"""

import numpy as np
from scipy.special import expit, logit

from src.graphsampler.reference import ReferenceDistribution
from src.numcore import ops
from src.numcore.errors import ContractError
from src.numcore.matrix import as_matrix

ICDF_DRAWS_PER_SAMPLE = 1
GUMBEL_DRAWS_PER_SAMPLE = 2


def check_theta_tau(theta, tau):
    theta = np.asarray(theta, dtype=np.float64)
    if not np.all((theta > 0.0) & (theta < 1.0)):
        raise ContractError(f"theta must lie strictly inside (0, 1), got {theta.min()!r}..{theta.max()!r}")
    if not tau > 0:
        raise ContractError(f"temperature must be > 0, got {tau!r}")
    return theta


def _shape(theta, size):
    if size is None:
        return tuple(np.shape(theta))
    return tuple(size) if np.iterable(size) else (int(size),)


def _count(counter, n):
    if counter is not None:
        counter.add(n)


# -- ICDF ---------------------------------------------------------------------

def icdf_samples(theta, tau, ref=None, rng=None, size=None, counter=None, noise=None):
    """Vectorized ICDF relaxation.

    Args:
        theta: edge probability (scalar or array) in (0, 1)
        tau: temperature > 0
        ref: ReferenceDistribution (standard normal when omitted)
        rng: numpy Generator used when ``noise`` is not given
        size: output shape (defaults to theta's shape)
        counter: DrawCounter, incremented by one per output value drawn
        noise: explicit reference draws s (no draw is counted)

    Returns:
        np.ndarray of relaxed samples in [0, 1]
    """
    ref = ref or ReferenceDistribution()
    theta = check_theta_tau(theta, tau)
    if noise is None:
        shape = _shape(theta, size)
        noise = ref.sample(rng if rng is not None else np.random.default_rng(), shape)
        _count(counter, np.size(noise) * ICDF_DRAWS_PER_SAMPLE)
    return expit((ref.inverse_cdf(theta) - np.asarray(noise, dtype=np.float64)) / tau)


def icdf_sample(theta, tau, ref=None, rng=None, counter=None, s=None):
    """Single ICDF sample; ``s`` forces the reference draw."""
    return float(icdf_samples(theta, tau, ref, rng, size=(), counter=counter, noise=s))


def icdf_relax(theta, noise, tau, ref=None):
    """Differentiable ICDF relaxation of a probability Matrix for fixed noise."""
    ref = ref or ReferenceDistribution()
    if not tau > 0:
        raise ContractError(f"temperature must be > 0, got {tau!r}")
    q = ops.unary(as_matrix(theta), ref.inverse_cdf, lambda x, y: ref.inverse_cdf_derivative(x, y), "inverse_cdf")
    return ops.sigmoid(ops.scale(ops.sub(q, as_matrix(noise)), 1.0 / tau))


# -- Gumbel -------------------------------------------------------------------

def gumbel_samples(theta, tau, rng=None, size=None, counter=None, noise=None):
    """Vectorized Gumbel-softmax relaxation of Ber(theta).

    ``noise`` may pass explicit (g1, g2) arrays; otherwise two Gumbel draws are
    taken (and counted) per output value.
    """
    theta = check_theta_tau(theta, tau)
    if noise is None:
        rng = rng if rng is not None else np.random.default_rng()
        g = rng.gumbel(size=(2,) + _shape(theta, size))
        g1, g2 = g[0], g[1]
        _count(counter, np.size(g1) * GUMBEL_DRAWS_PER_SAMPLE)
    else:
        g1, g2 = (np.asarray(x, dtype=np.float64) for x in noise)
    return expit((logit(theta) + g1 - g2) / tau)


def gumbel_sample(theta, tau, rng=None, counter=None, g=None):
    """Single Gumbel-softmax sample; ``g`` forces the (g1, g2) pair."""
    return float(np.asarray(gumbel_samples(theta, tau, rng, size=(), counter=counter, noise=g)).reshape(-1)[0])


def gumbel_relax(logits, noise_diff, tau):
    """Differentiable Gumbel relaxation from edge logits and fixed g1 - g2."""
    if not tau > 0:
        raise ContractError(f"temperature must be > 0, got {tau!r}")
    return ops.sigmoid(ops.scale(ops.add(as_matrix(logits), as_matrix(noise_diff)), 1.0 / tau))


SAMPLERS = {"icdf": icdf_samples, "gumbel": gumbel_samples}
DRAWS_PER_SAMPLE = {"icdf": ICDF_DRAWS_PER_SAMPLE, "gumbel": GUMBEL_DRAWS_PER_SAMPLE}


def relaxed_samples(method, theta, tau, ref=None, rng=None, size=None, counter=None):
    """Dispatch to the ICDF or Gumbel sampler by name."""
    if method == "icdf":
        return icdf_samples(theta, tau, ref, rng, size, counter)
    if method == "gumbel":
        return gumbel_samples(theta, tau, rng, size, counter)
    raise ContractError(f"Unknown sampler '{method}', expected one of {sorted(SAMPLERS)}")

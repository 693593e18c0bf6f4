"""Closed-form CDFs of the relaxed samples."""

import numpy as np
from scipy.special import expit

from src.graphsampler.reference import ReferenceDistribution


def icdf_cdf(t, theta, tau, ref=None):
    """Pr(z <= t) for the ICDF relaxation.

    Below sigmoid((F^{-1}(theta) - b) / tau) the CDF is 0, above
    sigmoid((F^{-1}(theta) - a) / tau) it is 1; in between it equals
    1 - F(F^{-1}(theta) + tau log(1/t - 1)). Unbounded supports only use the
    middle branch.
    """
    ref = ref or ReferenceDistribution()
    t = np.asarray(t, dtype=np.float64)
    q = ref.inverse_cdf(theta)
    with np.errstate(divide="ignore"):
        u = np.log(1.0 / t - 1.0)
        out = 1.0 - ref.cdf(q + tau * u)
    out = np.where(t <= 0.0, 0.0, out)
    out = np.where(t >= 1.0, 1.0, out)
    if np.isfinite(ref.b):
        out = np.where(t < expit((q - ref.b) / tau), 0.0, out)
    if np.isfinite(ref.a):
        out = np.where(t > expit((q - ref.a) / tau), 1.0, out)
    return out if out.ndim else float(out)


def gumbel_cdf(t, theta, tau):
    """Pr(y1 <= t) = t^tau (1-theta) / (t^tau (1-theta) + (1-t)^tau theta)."""
    t = np.asarray(t, dtype=np.float64)
    a = t ** tau * (1.0 - theta)
    b = (1.0 - t) ** tau * theta
    out = a / (a + b)
    return out if out.ndim else float(out)


def analytic_cdf(method, t, theta, tau, ref=None):
    if method == "icdf":
        return icdf_cdf(t, theta, tau, ref)
    return gumbel_cdf(t, theta, tau)

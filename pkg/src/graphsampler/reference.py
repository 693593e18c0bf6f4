"""Reference distributions F for the ICDF relaxation, backed by scipy.stats."""

import numpy as np
from scipy import stats

from src.numcore.errors import ConfigError

REFERENCE_KINDS = ("standard_normal", "uniform01", "logistic")


class ReferenceDistribution:
    """
    A continuous reference F with support [a, b].

    Args:
        kind: one of REFERENCE_KINDS
        sigma: scale of the normal reference (ignored otherwise)
    """

    def __init__(self, kind="standard_normal", sigma=1.0):
        if kind not in REFERENCE_KINDS:
            raise ConfigError(f"Unknown reference distribution '{kind}', expected one of {REFERENCE_KINDS}")
        if kind == "standard_normal" and not sigma > 0:
            raise ConfigError(f"normal reference needs sigma > 0, got {sigma}")
        self.kind = kind
        self.sigma = float(sigma) if kind == "standard_normal" else 1.0
        if kind == "standard_normal":
            self.dist = stats.norm(loc=0.0, scale=self.sigma)
        elif kind == "uniform01":
            self.dist = stats.uniform(loc=0.0, scale=1.0)
        else:
            self.dist = stats.logistic(loc=0.0, scale=1.0)
        self.a, self.b = (0.0, 1.0) if kind == "uniform01" else (-np.inf, np.inf)

    @property
    def bounded(self):
        return np.isfinite(self.a) and np.isfinite(self.b)

    def cdf(self, x):
        return self.dist.cdf(x)

    def inverse_cdf(self, p):
        return self.dist.ppf(p)

    def pdf(self, x):
        return self.dist.pdf(x)

    def pdf_derivative(self, x):
        """F''(x)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "standard_normal":
            return -x / self.sigma ** 2 * self.dist.pdf(x)
        if self.kind == "logistic":
            return self.dist.pdf(x) * (1.0 - 2.0 * self.dist.cdf(x))
        return np.zeros_like(x)

    def inverse_cdf_derivative(self, p, x=None):
        """d F^{-1}(p) / dp = 1 / f(F^{-1}(p))."""
        x = self.inverse_cdf(p) if x is None else x
        return 1.0 / self.dist.pdf(x)

    def sample(self, rng, size):
        return self.dist.rvs(size=size, random_state=rng)

    def to_dict(self):
        return {"kind": self.kind, "sigma": self.sigma}

    def __repr__(self):
        extra = f", sigma={self.sigma}" if self.kind == "standard_normal" else ""
        return f"ReferenceDistribution({self.kind}{extra})"

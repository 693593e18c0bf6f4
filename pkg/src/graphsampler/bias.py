"""
Bias E[sample] - theta of the relaxed samplers.

Three estimates are available: the leading O(tau^2) term, the exact value by
quadrature, and a Monte-Carlo estimate with its standard error.
"""

import numpy as np
from scipy import integrate, stats
from scipy.special import erfinv, expit, logit

from src.graphsampler.reference import ReferenceDistribution
from src.graphsampler.samplers import check_theta_tau, gumbel_samples, icdf_samples, relaxed_samples
from src.numcore.errors import ContractError

BIAS_METHODS = ("icdf_normal", "icdf", "gumbel")
MIN_EMPIRICAL_SAMPLES = 10_000
# chunk size for Monte-Carlo draws, bounds peak memory for 10^7-sample estimates
EMPIRICAL_CHUNK = 1_000_000


def _scalar(value):
    value = np.asarray(value, dtype=np.float64)
    return float(value) if value.ndim == 0 else value


def analytic_bias(theta, tau, method="gumbel", ref=None):
    """Leading-order bias term (no O(tau^4) correction).

    Args:
        theta: edge probability in (0, 1)
        tau: temperature > 0
        method: ``gumbel``, ``icdf_normal`` (closed erfinv form, any sigma) or
            ``icdf`` (any smooth reference via (pi^2/6) tau^2 F''(F^{-1}(theta)))
        ref: reference distribution for the ICDF methods

    Returns:
        float (or array for array theta)
    """
    theta = check_theta_tau(theta, tau)
    if method == "gumbel":
        return _scalar(tau ** 2 * np.pi ** 2 * theta * (1.0 - theta) * (1.0 - 2.0 * theta) / 6.0)
    ref = ref or ReferenceDistribution()
    if method == "icdf_normal":
        if ref.kind != "standard_normal":
            raise ContractError(f"icdf_normal bias needs a normal reference, got {ref.kind}")
        e = erfinv(2.0 * theta - 1.0)
        return _scalar(-tau ** 2 * np.pi ** 1.5 * e * np.exp(-e * e) / (6.0 * ref.sigma ** 2))
    if method == "icdf":
        return _scalar(np.pi ** 2 / 6.0 * tau ** 2 * ref.pdf_derivative(ref.inverse_cdf(theta)))
    raise ContractError(f"Unknown bias method '{method}', expected one of {BIAS_METHODS}")


def exact_bias(theta, tau, method="gumbel", ref=None):
    """E[sample] - theta by quadrature over the logistic variable behind each sampler.

    Both relaxations are expectations over u ~ Logistic(0, 1):
    ICDF gives E[F(F^{-1}(theta) + tau u)], Gumbel gives E[sigmoid((logit theta + u) / tau)].
    """
    check_theta_tau(theta, tau)
    density = stats.logistic.pdf
    if method == "gumbel":
        lt = logit(theta)

        def integrand(u):
            return expit((lt + u) / tau) * density(u)
        center = -lt
    elif method in ("icdf", "icdf_normal"):
        ref = ref or ReferenceDistribution()
        q = ref.inverse_cdf(theta)

        def integrand(u):
            return ref.cdf(q + tau * u) * density(u)
        center = 0.0
    else:
        raise ContractError(f"Unknown bias method '{method}', expected one of {BIAS_METHODS}")
    left, _ = integrate.quad(integrand, -np.inf, center, limit=200, epsabs=1e-13, epsrel=1e-12)
    right, _ = integrate.quad(integrand, center, np.inf, limit=200, epsabs=1e-13, epsrel=1e-12)
    return float(left + right - theta)


def paired_draws(sampler, theta, tau, ref, rng, n, counter=None):
    """Relaxed samples and the exact Bernoulli outcomes of the same noise (mean theta)."""
    if sampler == "icdf":
        s = ref.sample(rng, n)
        if counter is not None:
            counter.add(n)
        return icdf_samples(theta, tau, ref, noise=s), (ref.inverse_cdf(theta) - s > 0).astype(np.float64)
    g = rng.gumbel(size=(2, n))
    if counter is not None:
        counter.add(2 * n)
    return gumbel_samples(theta, tau, noise=(g[0], g[1])), (logit(theta) + g[0] - g[1] > 0).astype(np.float64)


def empirical_bias(theta, tau, method="icdf", samples=MIN_EMPIRICAL_SAMPLES, rng=None, ref=None, counter=None,
                   control_variate=False):
    """Monte-Carlo bias mean(z) - theta and its standard error.

    With ``control_variate`` each relaxed sample is paired with the hard
    Bernoulli outcome of the same noise and the estimate is mean(z - b); the
    pairing removes the Bernoulli variance, which dominates at small tau.

    Returns:
        Tuple[float, float]: (bias estimate, standard error)
    """
    if samples < MIN_EMPIRICAL_SAMPLES:
        raise ContractError(f"empirical bias needs at least {MIN_EMPIRICAL_SAMPLES} samples, got {samples}")
    sampler = "icdf" if method.startswith("icdf") else method
    rng = rng if rng is not None else np.random.default_rng()
    total, total_sq, done = 0.0, 0.0, 0
    while done < samples:
        n = min(EMPIRICAL_CHUNK, samples - done)
        if control_variate:
            z, hard = paired_draws(sampler, theta, tau, ref or ReferenceDistribution(), rng, n, counter)
            z = z - hard
        else:
            z = relaxed_samples(sampler, theta, tau, ref, rng, size=n, counter=counter)
        total += z.sum()
        total_sq += np.dot(z, z)
        done += n
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
    bias = mean if control_variate else mean - theta
    return float(bias), float(np.sqrt(var / samples))


def bias_ratio_factor(theta):
    """r(theta) = sqrt(pi) theta (1-theta) (2 theta - 1) / (e exp(-e^2)), e = erfinv(2 theta - 1).

    The removable singularity at theta = 1/2 takes its limit 1/2.
    """
    theta = np.asarray(theta, dtype=np.float64)
    e = erfinv(2.0 * theta - 1.0)
    near_half = np.abs(theta - 0.5) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(np.pi) * theta * (1.0 - theta) * (2.0 * theta - 1.0) / (e * np.exp(-e * e))
    r = np.where(near_half, 0.5, r)
    return r if r.ndim else float(r)


def bias_ratio(theta, tau_gumbel, tau_icdf, sigma=1.0):
    """Leading-order Gumbel bias over normal-reference ICDF bias."""
    return tau_gumbel ** 2 * sigma ** 2 / tau_icdf ** 2 * bias_ratio_factor(theta)


def matched_icdf_temperature(theta, tau_gumbel, sigma=1.0):
    """ICDF temperature with the same leading-order bias as a Gumbel sampler at ``tau_gumbel``."""
    return float(tau_gumbel * sigma * np.sqrt(bias_ratio_factor(theta)))

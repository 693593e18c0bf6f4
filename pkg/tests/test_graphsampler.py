"""Tests for the relaxed edge samplers, their CDFs and bias, and the graph posterior."""

import numpy as np
import pytest
from scipy import stats

from src.graphsampler.adjacency import normalize_adjacency
from src.graphsampler.bias import (
    analytic_bias,
    bias_ratio_factor,
    empirical_bias,
    exact_bias,
    matched_icdf_temperature,
)
from src.graphsampler.cdfs import gumbel_cdf, icdf_cdf
from src.graphsampler.posterior import GraphPosterior, sample_graph
from src.graphsampler.reference import ReferenceDistribution
from src.graphsampler.rng import DrawCounter, make_generator
from src.graphsampler.samplers import gumbel_samples, icdf_relax, icdf_sample, icdf_samples, relaxed_samples
from src.numcore import ops
from src.numcore.errors import ConfigError, ContractError, NumericDomainError
from src.numcore.gradcheck import grad_check
from src.numcore.matrix import Matrix

SAMPLES = 100_000


def rng(stream=0):
    return make_generator(20240601, stream=stream)


@pytest.mark.parametrize("tau", [0.01, 0.5, 3.0])
def test_icdf_median_draw_gives_one_half(tau):
    assert icdf_sample(0.5, tau, s=0.0) == 0.5


def test_icdf_small_temperature_approaches_bernoulli():
    z = icdf_samples(0.9, 0.01, rng=rng(), size=SAMPLES)
    assert abs(z.mean() - 0.9) < 0.01


def test_icdf_gradient_with_fixed_noise():
    noise = rng().normal(size=(2, 3))
    theta = np.array([[0.2, 0.5, 0.7], [0.35, 0.6, 0.9]])

    def f(p):
        return ops.sum_all(icdf_relax(p[0], noise, 0.5))

    report = grad_check(f, [theta], tol=1e-5)
    assert report.passed, report.to_dict()


def test_gumbel_one_half_is_symmetric():
    y = gumbel_samples(0.5, 0.5, rng=rng(), size=SAMPLES)
    assert abs(y.mean() - 0.5) < 0.005


def test_gumbel_draw_count():
    counter = DrawCounter()
    gumbel_samples(0.3, 0.5, rng=rng(), size=1000, counter=counter)
    assert counter.count == 2000


def test_icdf_draw_count():
    counter = DrawCounter()
    icdf_samples(0.3, 0.5, rng=rng(), size=1000, counter=counter)
    assert counter.count == 1000


def test_gumbel_small_temperature_approaches_bernoulli():
    y = gumbel_samples(0.8, 0.01, rng=rng(), size=SAMPLES)
    assert abs((y > 0.5).mean() - 0.8) < 0.012


@pytest.mark.parametrize("theta", [0.0, 1.0, -0.2])
def test_samplers_reject_theta_on_the_boundary(theta):
    with pytest.raises(ContractError):
        icdf_samples(theta, 0.5, rng=rng(), size=3)
    with pytest.raises(ContractError):
        gumbel_samples(theta, 0.5, rng=rng(), size=3)


def test_samplers_reject_nonpositive_temperature():
    with pytest.raises(ContractError):
        relaxed_samples("icdf", 0.3, 0.0, rng=rng(), size=3)
    with pytest.raises(ContractError):
        relaxed_samples("binary", 0.3, 0.5, rng=rng(), size=3)


def test_unknown_reference_distribution():
    with pytest.raises(ConfigError):
        ReferenceDistribution("cauchy")


@pytest.mark.parametrize("kind", ["standard_normal", "uniform01", "logistic"])
@pytest.mark.parametrize("theta", [0.2, 0.5, 0.85])
def test_icdf_cdf_at_one_half(kind, theta):
    assert icdf_cdf(0.5, theta, 0.3, ReferenceDistribution(kind)) == pytest.approx(1 - theta)


def test_icdf_cdf_bounded_support_lower_branch():
    ref = ReferenceDistribution("uniform01")
    assert icdf_cdf(0.005, 0.5, 0.1, ref) == 0.0


@pytest.mark.parametrize("kind", ["standard_normal", "uniform01"])
def test_icdf_cdf_matches_samples(kind):
    ref = ReferenceDistribution(kind)
    z = icdf_samples(0.3, 0.5, ref, rng=rng(), size=SAMPLES)
    result = stats.kstest(z, lambda t: icdf_cdf(t, 0.3, 0.5, ref))
    assert result.statistic < 0.01


def test_gumbel_cdf_closed_forms():
    assert gumbel_cdf(0.5, 0.3, 0.7) == pytest.approx(0.7)
    t = np.linspace(0.05, 0.95, 7)
    np.testing.assert_allclose(gumbel_cdf(t, 0.5, 0.4), t ** 0.4 / (t ** 0.4 + (1 - t) ** 0.4))


def test_gumbel_cdf_matches_samples():
    y = gumbel_samples(0.3, 0.5, rng=rng(), size=SAMPLES)
    result = stats.kstest(y, lambda t: gumbel_cdf(t, 0.3, 0.5))
    assert result.statistic < 0.01


@pytest.mark.parametrize("theta", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("tau", [0.05, 0.5, 2.0])
def test_relaxed_cdfs_are_monotone(theta, tau):
    t = np.linspace(0.0, 1.0, 2001)
    curves = [icdf_cdf(t, theta, tau, ReferenceDistribution(kind))
              for kind in ("standard_normal", "uniform01", "logistic")]
    curves.append(gumbel_cdf(t, theta, tau))
    for F in curves:
        assert np.all(np.diff(F) >= -1e-12)
        assert F[0] == 0.0 and F[-1] == 1.0


@pytest.mark.parametrize("method", ["gumbel", "icdf_normal", "icdf"])
def test_analytic_bias_vanishes_at_one_half(method):
    assert analytic_bias(0.5, 0.3, method) == pytest.approx(0.0, abs=1e-15)


def test_analytic_bias_gumbel_value():
    expected = (1 / 6) * 0.01 * np.pi ** 2 * 0.25 * 0.75 * 0.5
    assert analytic_bias(0.25, 0.1, "gumbel") == pytest.approx(expected)
    assert expected == pytest.approx(1.542e-3, rel=1e-3)


def test_icdf_bias_forms_agree_for_normal_reference():
    for theta in (0.1, 0.3, 0.7):
        assert analytic_bias(theta, 0.2, "icdf_normal") == pytest.approx(analytic_bias(theta, 0.2, "icdf"))


@pytest.mark.parametrize("method", ["gumbel", "icdf_normal"])
def test_exact_bias_matches_leading_term_at_small_temperature(method):
    ratio = exact_bias(0.25, 0.05, method) / analytic_bias(0.25, 0.05, method)
    assert 0.9 <= ratio <= 1.1


@pytest.mark.parametrize("method", ["gumbel", "icdf_normal"])
def test_bias_decays_quadratically_in_temperature(method):
    taus = np.array([0.2, 0.1, 0.05, 0.025])
    biases = np.array([abs(exact_bias(0.25, t, method)) for t in taus])
    slope, _ = np.polyfit(np.log(taus), np.log(biases), 1)
    assert 1.8 <= slope <= 2.2


@pytest.mark.parametrize("method", ["gumbel", "icdf"])
def test_empirical_bias_is_zero_at_one_half(method):
    bias, se = empirical_bias(0.5, 0.2, method, samples=1_000_000, rng=rng())
    assert abs(bias) <= 3 * se


@pytest.mark.parametrize("method", ["gumbel", "icdf"])
def test_empirical_bias_positive_below_one_half(method):
    bias, se = empirical_bias(0.25, 0.2, method, samples=1_000_000, rng=rng(1))
    assert bias > 3 * se


@pytest.mark.parametrize("method", ["gumbel", "icdf"])
def test_control_variate_agrees_with_quadrature(method):
    bias, se = empirical_bias(0.25, 0.2, method, samples=1_000_000, rng=rng(2), control_variate=True)
    plain_se = empirical_bias(0.25, 0.2, method, samples=1_000_000, rng=rng(2))[1]
    assert abs(bias - exact_bias(0.25, 0.2, method)) <= 4 * se
    assert se < plain_se


@pytest.mark.slow
@pytest.mark.parametrize("theta", [0.2, 0.35])
@pytest.mark.parametrize("method", ["gumbel", "icdf"])
def test_empirical_bias_rate_and_leading_term(method, theta):
    taus = np.array([0.2, 0.1, 0.05, 0.025])
    leading = "icdf_normal" if method == "icdf" else "gumbel"
    biases = np.array([empirical_bias(theta, tau, method, samples=10_000_000, rng=rng(10 + k),
                                      control_variate=True)[0] for k, tau in enumerate(taus)])
    slope, _ = np.polyfit(np.log(taus), np.log(np.abs(biases)), 1)
    assert 1.8 <= slope <= 2.2
    assert 0.85 <= biases[2] / analytic_bias(theta, 0.05, leading) <= 1.15


def test_empirical_bias_needs_enough_samples():
    with pytest.raises(ContractError):
        empirical_bias(0.3, 0.2, "gumbel", samples=100)


def test_matched_temperature_equalizes_bias():
    tau_icdf = matched_icdf_temperature(0.3, 0.4)
    assert analytic_bias(0.3, tau_icdf, "icdf_normal") == pytest.approx(analytic_bias(0.3, 0.4, "gumbel"))
    assert bias_ratio_factor(0.5) == 0.5


def test_normalize_empty_and_identity_graphs():
    np.testing.assert_allclose(normalize_adjacency(np.zeros((3, 3))).numpy(), np.eye(3))
    np.testing.assert_allclose(normalize_adjacency(np.eye(3)).numpy(), np.eye(3))


def test_normalize_complete_graph():
    A_hat = normalize_adjacency(np.ones((3, 3))).numpy()
    np.testing.assert_allclose(A_hat, np.full((3, 3), 1 / 3))
    np.testing.assert_allclose(A_hat.sum(axis=1), np.ones(3))


def test_normalize_rejects_entries_outside_unit_interval():
    with pytest.raises(ContractError):
        normalize_adjacency(np.array([[0.0, 1.5], [1.5, 0.0]]))


def test_normalize_keep_uses_the_given_diagonal():
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(normalize_adjacency(swap, self_loops="keep").numpy(), swap)
    with pytest.raises(NumericDomainError):
        normalize_adjacency(np.zeros((2, 2)), self_loops="keep")


def test_sampled_and_expected_graphs_keep_the_self_loop_value():
    gp = GraphPosterior.from_theta(np.full((3, 3), 0.5), self_loop=0.3)
    A_hat = normalize_adjacency(gp.expected_adjacency(), self_loops="keep").numpy()
    np.testing.assert_allclose(np.diag(A_hat), np.full(3, 0.3 / 1.3))
    noise = gp.draw_noise(rng())
    relaxed = gp.relax(noise).numpy()
    np.testing.assert_allclose(np.diag(sample_graph(gp, noise=noise).numpy()), 0.3 / relaxed.sum(axis=1))


def test_posterior_is_symmetric_with_fixed_diagonal():
    gp = GraphPosterior.init(5, np.random.default_rng(0), self_loop=0.7)
    theta = gp.theta()
    np.testing.assert_array_equal(theta, theta.T)
    np.testing.assert_array_equal(np.diag(theta), np.full(5, 0.7))
    assert np.all((theta > 0) & (theta < 1))
    assert gp.edge_count == 10


@pytest.mark.parametrize("method", ["icdf", "gumbel"])
def test_low_temperature_samples_are_nearly_binary(method):
    theta = np.full((6, 6), 0.001)
    theta[np.triu_indices(6, 1)[0][::2], np.triu_indices(6, 1)[1][::2]] = 0.999
    gp = GraphPosterior.from_theta(np.triu(theta, 1) + np.triu(theta, 1).T + np.eye(6),
                                   tau=1e-3, method=method)
    z = gp.relax(gp.draw_noise(rng())).numpy()
    off = ~np.eye(6, dtype=bool)
    assert np.all(np.minimum(z[off], 1 - z[off]) < 1e-2)


@pytest.mark.parametrize("method", ["icdf", "gumbel"])
def test_median_noise_keeps_one_half_edges(method):
    gp = GraphPosterior(np.zeros((4, 4)), tau=0.3, method=method)
    z = gp.relax(gp.median_noise()).numpy()
    off = ~np.eye(4, dtype=bool)
    np.testing.assert_allclose(z[off], 0.5)


def test_sample_graph_counts_one_draw_per_edge():
    counter = DrawCounter()
    gp = GraphPosterior.init(7, np.random.default_rng(1))
    sample_graph(gp, seed=3, step=0, counter=counter)
    assert counter.count == 7 * 6 // 2


def test_sample_graph_counts_two_draws_per_gumbel_edge():
    counter = DrawCounter()
    gp = GraphPosterior.init(7, np.random.default_rng(1), method="gumbel")
    sample_graph(gp, seed=3, step=0, counter=counter)
    assert counter.count == 7 * 6


def test_sample_graph_is_keyed_by_seed_and_step():
    gp = GraphPosterior.init(5, np.random.default_rng(2))
    a = sample_graph(gp, seed=1, step=4).numpy()
    b = sample_graph(gp, seed=1, step=4).numpy()
    c = sample_graph(gp, seed=1, step=5).numpy()
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    np.testing.assert_allclose(a, a.T)


def test_sample_graph_gradient_in_logits():
    gp = GraphPosterior.init(4, np.random.default_rng(3), tau=0.5)
    noise = gp.draw_noise(rng())
    weights = Matrix(np.random.default_rng(4).normal(size=(4, 4)))

    def f(p):
        return ops.sum_all(ops.mul(sample_graph(gp, params=p, noise=noise), weights))

    report = grad_check(f, [gp.logits])
    assert report.passed, report.to_dict()


def test_directed_posterior_has_every_off_diagonal_edge():
    gp = GraphPosterior.init(4, np.random.default_rng(5), symmetric=False)
    assert gp.edge_count == 12

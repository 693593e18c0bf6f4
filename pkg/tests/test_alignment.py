"""Tests for Sinkhorn scaling and the per-client alignment matrices."""

import numpy as np
import pytest

from src.alignment.alignment_set import AlignmentSet, apply_alignment
from src.alignment.sinkhorn import fit_decay_rate, marginal_residual, second_singular_value, sinkhorn
from src.cli.suites import block_kernel
from src.localmodels.permutation import inverse_permutation, permutation_matrix
from src.numcore import ops
from src.numcore.errors import ConfigError, NumericDomainError, ShapeError
from src.numcore.gradcheck import grad_check
from src.numcore.matrix import Matrix


@pytest.mark.parametrize("T", [0, 1, 5, 20])
def test_doubly_stochastic_input_is_a_fixed_point(T):
    K0 = np.array([[0.25, 0.75], [0.75, 0.25]])
    K_T, _ = sinkhorn(K0, T)
    np.testing.assert_allclose(K_T.numpy(), K0, atol=1e-15)


def test_all_ones_after_one_iteration():
    K_T, diag = sinkhorn(np.ones((2, 2)), 1)
    np.testing.assert_allclose(K_T.numpy(), [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)
    assert diag.iterations == 1


def test_near_permutation_converges_to_the_permutation():
    P = permutation_matrix([2, 0, 3, 1])
    K_T, diag = sinkhorn(P + 1e-9, 200)
    np.testing.assert_allclose(K_T.numpy(), P, atol=1e-6)
    assert diag.final_residual < 1e-10


def test_sinkhorn_rejects_bad_input():
    with pytest.raises(NumericDomainError):
        sinkhorn(np.array([[1.0, 0.0], [1.0, 1.0]]), 3)
    with pytest.raises(ShapeError):
        sinkhorn(np.ones((2, 3)), 3)


def test_sinkhorn_reports_overflow():
    with pytest.raises(NumericDomainError, match="overflow"):
        sinkhorn(np.full((2, 2), 1e-160), 5)


def test_sinkhorn_gradient_through_all_steps():
    rng = np.random.default_rng(11)
    F = rng.normal(scale=0.5, size=(3, 3))
    weights = Matrix(rng.normal(size=(3, 3)))

    def loss(p):
        K_T, _ = sinkhorn(ops.exp(p[0]), 5)
        return ops.sum_all(ops.mul(K_T, weights))

    report = grad_check(loss, [F])
    assert report.passed, report.to_dict()


def test_random_positive_matrix_converges_quickly():
    K0 = np.random.default_rng(16).uniform(0.1, 1.0, size=(16, 16))
    K_T, diag = sinkhorn(K0, 50)
    assert diag.final_residual < 1e-8
    np.testing.assert_allclose(K_T.numpy().sum(axis=0), np.ones(16), atol=1e-8)


def test_decay_rate_insufficient_when_residual_hits_floor():
    _, diag = sinkhorn(np.ones((3, 3)), 20)
    assert diag.residuals[0] < 1e-13
    fit = fit_decay_rate(diag)
    assert not fit.sufficient
    assert fit.exponent is None


def test_decay_rate_bounded_by_second_singular_value():
    rng = np.random.default_rng(12)
    K_T, diag = sinkhorn(block_kernel(8, rng), 300)
    fit = fit_decay_rate(diag)
    assert fit.sufficient
    assert diag.sigma2 == pytest.approx(second_singular_value(K_T.numpy()))
    assert fit.exponent <= fit.two_log_sigma2 + 0.1


def test_nearly_decoupled_blocks_converge_slowly():
    rng = np.random.default_rng(13)
    _, diag = sinkhorn(block_kernel(8, rng, off_block=1e-3), 80)
    res = np.asarray(diag.residuals)
    per_step = (res[79] / res[39]) ** (1 / 40)
    assert res[79] > 1e-13
    assert per_step > 0.99


def test_marginal_residual_of_doubly_stochastic_matrix():
    assert marginal_residual(np.full((4, 4), 0.25)) == 0.0
    assert marginal_residual(np.eye(2) * 2) == pytest.approx(2.0)


def test_mode_none_returns_the_latents():
    rng = np.random.default_rng(14)
    latents = [Matrix(rng.normal(size=(5, 3))) for _ in range(2)]
    aligned = apply_alignment(AlignmentSet.init("none", 2, 3, rng), latents)
    for a, b in zip(aligned, latents):
        np.testing.assert_array_equal(a.numpy(), b.numpy())


def test_shared_permutation_undoes_prepermuted_latents():
    rng = np.random.default_rng(15)
    p = rng.permutation(4)
    canonical = [rng.normal(size=(6, 4)) for _ in range(3)]
    moved = [Matrix(L[:, inverse_permutation(p)]) for L in canonical]
    alignment = AlignmentSet.from_matrices([permutation_matrix(p)] * 3)
    for out, L in zip(apply_alignment(alignment, moved), canonical):
        np.testing.assert_array_equal(out.numpy(), L)


def test_rectangular_alignment_changes_width():
    rng = np.random.default_rng(16)
    alignment = AlignmentSet.init("soft", 2, 4, rng, d_out=6)
    latents = [Matrix(rng.normal(size=(5, 4))) for _ in range(2)]
    assert all(out.shape == (5, 6) for out in apply_alignment(alignment, latents))


def test_tied_mode_shares_one_matrix():
    rng = np.random.default_rng(17)
    alignment = AlignmentSet.init("tied", 3, 2, rng)
    assert len(alignment.parameter_arrays()) == 1
    mats = alignment.effective_arrays()
    np.testing.assert_array_equal(mats[0], mats[2])


def test_hard_mode_matrices_are_doubly_stochastic():
    rng = np.random.default_rng(18)
    alignment = AlignmentSet.init("hard", 2, 4, rng, steps=30)
    for P in alignment.effective_arrays():
        assert marginal_residual(P) < 1e-6
        assert np.all(np.argmax(P, axis=1) == np.arange(4))


def test_invalid_alignment_configurations():
    rng = np.random.default_rng(19)
    with pytest.raises(ConfigError):
        AlignmentSet.init("rotate", 2, 3, rng)
    with pytest.raises(ConfigError):
        AlignmentSet.init("hard", 2, 3, rng, d_out=4)
    with pytest.raises(ShapeError):
        apply_alignment(AlignmentSet.init("soft", 2, 3, rng), [Matrix(np.ones((2, 3)))])


def test_alignment_heatmap_frame():
    rng = np.random.default_rng(20)
    frame = AlignmentSet.init("soft", 2, 3, rng).to_frame()
    assert list(frame.columns) == ["client", "row", "col", "value"]
    assert len(frame) == 2 * 9

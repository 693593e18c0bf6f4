"""
Property suites behind ``run.py verify``.

Each suite runs with fixed seeds, returns a SuiteResult of named checks and
plot-ready evidence tables; ``write_suite`` stores them as JSON and CSV.
"""

import json
import os
from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Dict, List

import numpy as np
import pandas as pd
from scipy import stats

from src.alignment.sinkhorn import fit_decay_rate, sinkhorn
from src.globalmodel.model import GlobalModel, f3_loss
from src.graphsampler.bias import analytic_bias, empirical_bias, exact_bias
from src.graphsampler.cdfs import analytic_cdf
from src.graphsampler.reference import ReferenceDistribution
from src.graphsampler.rng import make_generator
from src.graphsampler.samplers import relaxed_samples
from src.localmodels.client import ClientShard, LocalClient
from src.localmodels.permutation import permutation_matrix, permute_client
from src.numcore import ops
from src.numcore.gradcheck import grad_check
from src.numcore.matrix import Matrix

SUITE_SEED = 20240601
CDF_THETAS = (0.25, 0.5, 0.75)
CDF_TAUS = (0.1, 0.5, 1.0)
CDF_SAMPLES = 100_000
CDF_TOLERANCE = 0.012
RATE_THETAS = (0.2, 0.35)
RATE_TAUS = (0.2, 0.1, 0.05, 0.025)
RATE_SLOPE_RANGE = (1.8, 2.2)
RATIO_TAU = 0.05
RATIO_RANGE = (0.85, 1.15)
SIGN_THETAS = (0.2, 0.5, 0.8)
SIGN_TAUS = (0.1, 0.5, 1.0)
BIAS_SAMPLES = 10_000_000
SIGN_SAMPLES = 1_000_000
# Monte Carlo must match quadrature within this many standard errors
MC_AGREEMENT = 4.0
DECAY_SLACK = 0.1
RANDOM_STEPS = 50
SLOW_RATIO = 0.99
PERMUTATION_TRIALS = 100
PERMUTATION_TOLERANCE = 1e-10
GRADCHECK_TOLERANCE = 1e-4


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class SuiteResult:
    suite: str
    checks: List[Check] = field(default_factory=list)
    evidence: Dict[str, pd.DataFrame] = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def check(self, name, passed, detail=""):
        self.checks.append(Check(name, bool(passed), detail))

    def to_dict(self):
        return {"suite": self.suite, "passed": self.passed,
                "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
                "evidence": sorted(self.evidence)}


def cdf_suite(samples=CDF_SAMPLES, seed=SUITE_SEED):
    """Kolmogorov distance between sampled and closed-form CDFs of both relaxations."""
    result = SuiteResult("cdf")
    rows = []
    cases = [("icdf", "standard_normal"), ("icdf", "uniform01"), ("gumbel", None)]
    stream = 0
    for method, ref_kind in cases:
        ref = ReferenceDistribution(ref_kind) if ref_kind else None
        for theta in CDF_THETAS:
            for tau in CDF_TAUS:
                rng = make_generator(seed, stream=stream)
                stream += 1
                z = relaxed_samples(method, theta, tau, ref, rng, size=samples)
                ks = stats.kstest(z, lambda t: analytic_cdf(method, t, theta, tau, ref))
                ok = ks.statistic < CDF_TOLERANCE
                rows.append({"sampler": method, "reference": ref_kind or "gumbel", "theta": theta, "tau": tau,
                             "samples": samples, "ks_statistic": ks.statistic, "p_value": ks.pvalue, "passed": ok})
                result.check(f"{method}/{ref_kind or 'gumbel'} theta={theta} tau={tau}", ok,
                             f"sup-norm {ks.statistic:.5f} (limit {CDF_TOLERANCE})")
    result.evidence["ks"] = pd.DataFrame(rows)
    return result


def _slope(taus, biases):
    return float(np.polyfit(np.log(taus), np.log(np.abs(biases)), 1)[0])


def bias_suite(samples=BIAS_SAMPLES, seed=SUITE_SEED, sign_samples=SIGN_SAMPLES):
    """O(tau^2) rate, leading-term ratio and sign law of both samplers.

    The rate and ratio gates read the Monte-Carlo estimates; the quadrature
    values are reported next to them and must agree within MC_AGREEMENT
    standard errors at every temperature.
    """
    result = SuiteResult("bias")
    ref = ReferenceDistribution()
    methods = {"icdf": "icdf_normal", "gumbel": "gumbel"}
    curve, slopes, signs = [], [], []
    stream = 0
    lo, hi = RATE_SLOPE_RANGE
    for sampler, analytic_name in methods.items():
        for theta in RATE_THETAS:
            exact, empirical = [], []
            for tau in RATE_TAUS:
                rng = make_generator(seed, stream=stream)
                stream += 1
                b_exact = exact_bias(theta, tau, analytic_name, ref)
                b_lead = analytic_bias(theta, tau, analytic_name, ref)
                b_emp, se = empirical_bias(theta, tau, sampler, samples, rng, ref, control_variate=True)
                exact.append(b_exact)
                empirical.append(b_emp)
                curve.append({"sampler": sampler, "theta": theta, "tau": tau, "exact": b_exact,
                              "analytic": b_lead, "empirical": b_emp, "stderr": se})
                result.check(f"{sampler} theta={theta} tau={tau} Monte Carlo vs quadrature",
                             abs(b_emp - b_exact) <= MC_AGREEMENT * se + 1e-12,
                             f"{b_emp:.3e} vs {b_exact:.3e} (se {se:.1e})")
                if tau == RATIO_TAU:
                    ratio = b_emp / b_lead
                    result.check(f"{sampler} theta={theta} empirical/leading ratio at tau={tau}",
                                 RATIO_RANGE[0] <= ratio <= RATIO_RANGE[1], f"ratio {ratio:.4f}")
            emp_slope = _slope(RATE_TAUS, empirical) if np.all(np.abs(empirical) > 0) else float("nan")
            slope = _slope(RATE_TAUS, exact)
            slopes.append({"sampler": sampler, "theta": theta, "slope_exact": slope, "slope_empirical": emp_slope})
            result.check(f"{sampler} theta={theta} empirical log-log slope", lo <= emp_slope <= hi,
                         f"slope {emp_slope:.3f} (quadrature {slope:.3f})")
        for theta in SIGN_THETAS:
            for tau in SIGN_TAUS:
                rng = make_generator(seed, stream=stream)
                stream += 1
                b, se = empirical_bias(theta, tau, sampler, sign_samples, rng, ref, control_variate=True)
                if theta == 0.5:
                    ok = abs(b) <= 3.0 * se
                else:
                    ok = np.sign(b) == np.sign(0.5 - theta) and abs(b) > 3.0 * se
                signs.append({"sampler": sampler, "theta": theta, "tau": tau, "bias": b, "stderr": se, "passed": ok})
                result.check(f"{sampler} sign theta={theta} tau={tau}", ok, f"bias {b:.3e} (se {se:.1e})")
    result.evidence["curve"] = pd.DataFrame(curve)
    result.evidence["slopes"] = pd.DataFrame(slopes)
    result.evidence["signs"] = pd.DataFrame(signs)
    return result


def block_kernel(d, rng, off_block=0.05):
    """Positive matrix with two diagonal blocks; the Sinkhorn limit has sigma_2 near 1."""
    half = d // 2
    K = np.full((d, d), off_block)
    K[:half, :half] = 1.0
    K[half:, half:] = 1.0
    return K * rng.uniform(0.5, 1.5, size=(d, d))


def sinkhorn_suite(seed=SUITE_SEED, steps=300):
    """Convergence to double stochasticity and the residual decay rate 2 log sigma_2."""
    result = SuiteResult("sinkhorn")
    K, _ = sinkhorn(np.ones((2, 2)), 1)
    result.check("all-ones 2x2 after one iteration", np.allclose(K.data, 0.5, atol=1e-15), str(K.data.tolist()))

    rng = np.random.default_rng([seed, 5])
    rows, residuals = [], []
    for d in (4, 8, 16):
        K0 = block_kernel(d, rng)
        _, diag = sinkhorn(K0, steps)
        fit = fit_decay_rate(diag)
        result.check(f"d={d} doubly stochastic", diag.final_residual < 1e-10, f"residual {diag.final_residual:.2e}")
        gap = abs(fit.exponent - fit.two_log_sigma2) / abs(fit.two_log_sigma2) if fit.sufficient else float("nan")
        result.check(f"d={d} decay exponent vs 2 log sigma2",
                     fit.sufficient and fit.exponent <= fit.two_log_sigma2 + DECAY_SLACK,
                     fit.reason or f"exponent {fit.exponent:.4f}, 2 log sigma2 {fit.two_log_sigma2:.4f}")
        rows.append({"d": d, "sigma2": diag.sigma2, "exponent": fit.exponent,
                     "two_log_sigma2": fit.two_log_sigma2, "points": fit.points, "relative_gap": gap})
        frame = diag.to_frame()
        frame.insert(0, "d", d)
        residuals.append(frame)

    _, diag = sinkhorn(rng.uniform(0.1, 1.0, size=(16, 16)), RANDOM_STEPS)
    result.check(f"random 16x16 within {RANDOM_STEPS} iterations", diag.final_residual < 1e-8,
                 f"residual {diag.final_residual:.2e}")

    _, diag = sinkhorn(block_kernel(8, rng, off_block=1e-3), 80)
    per_step = (diag.residuals[79] / diag.residuals[39]) ** (1 / 40)
    result.check("nearly decoupled blocks converge slowly", per_step > SLOW_RATIO,
                 f"per-step residual ratio {per_step:.4f}")

    result.evidence["decay"] = pd.DataFrame(rows)
    result.evidence["residuals"] = pd.concat(residuals, ignore_index=True)
    return result


def _toy_client(kind, client_id, rng, m=6, p=4, d=5, classes=3, length=4):
    shape = (m, length, p) if kind == "gru" else (m, p)
    shard = ClientShard(rng.normal(size=shape))
    return LocalClient.create(client_id, kind, shard, d, classes, seed=client_id)


def permutation_suite(trials=PERMUTATION_TRIALS, seed=SUITE_SEED):
    """Permuting hidden units leaves predictions unchanged; the transposed permutation matrix repairs latents."""
    result = SuiteResult("permutation")
    rng = np.random.default_rng([seed, 6])
    rows = []
    worst = {"fc": 0.0, "gru": 0.0}
    for trial in range(trials):
        kind = "fc" if trial % 2 == 0 else "gru"
        client = _toy_client(kind, trial, rng)
        p = rng.permutation(client.hidden_dim)
        permuted = permute_client(client, p)
        gap = float(np.max(np.abs(client.predict_proba() - permuted.predict_proba())))
        latents = client.embed().numpy()
        moved = permuted.embed().numpy()
        repaired = moved @ permutation_matrix(p)
        repair_gap = float(np.max(np.abs(repaired - latents)))
        worst[kind] = max(worst[kind], gap, repair_gap)
        rows.append({"trial": trial, "kind": kind, "output_gap": gap, "repair_gap": repair_gap})
    for kind, gap in worst.items():
        result.check(f"{kind} outputs invariant", gap <= PERMUTATION_TOLERANCE, f"max gap {gap:.2e}")
    result.evidence["trials"] = pd.DataFrame(rows)
    return result


def toy_problem(n=4, m=8, d=3, classes=2, seed=SUITE_SEED):
    """Latents, mask and labels for a small fused model; one (client, sample) pair is missing."""
    rng = np.random.default_rng([seed, 7])
    present = np.ones((n, m), dtype=bool)
    present[n - 1, 0] = False
    latents = [np.where(present[i][:, None], np.abs(rng.normal(size=(m, d))), 0.0) for i in range(n)]
    labels = np.arange(m) % classes
    return SimpleNamespace(latents=latents, present=present, labels=labels)


def gradcheck_suite(seed=SUITE_SEED):
    """Finite-difference checks of the fused objective in its main configurations."""
    result = SuiteResult("gradcheck")
    bundle = toy_problem(seed=seed)
    cases = {
        "gcn soft alignment icdf graph": dict(variant="gcn", alignment_mode="soft", graph_mode="icdf"),
        "gcn hard alignment gumbel graph": dict(variant="gcn", alignment_mode="hard", graph_mode="gumbel"),
        "gcn tied alignment no graph": dict(variant="gcn", alignment_mode="tied", graph_mode="none"),
        "mean_pool": dict(variant="mean_pool", alignment_mode="none", graph_mode="none"),
    }
    rows = []
    for name, kwargs in cases.items():
        gm = GlobalModel.init(client_count=4, d=3, class_count=2, seed=seed, hidden=4, sinkhorn_steps=3, **kwargs)

        def loss(leaves, gm=gm):
            return f3_loss(gm, bundle, None, leaves, seed=seed, step=0)

        report = grad_check(loss, gm.parameter_arrays(), tol=GRADCHECK_TOLERANCE)
        result.check(name, report.passed, f"max rel-err {report.max_error:.2e}")
        rows.append({"case": name, "max_rel_error": report.max_error, "parameters": len(report.errors)})

    X = Matrix(np.random.default_rng([seed, 8]).normal(size=(5, 3)))

    def softmax_loss(leaves):
        return ops.cross_entropy(ops.softmax_rows(ops.matmul(X, leaves[0])), np.array([0, 1, 2, 0, 1]))

    report = grad_check(softmax_loss, [np.random.default_rng([seed, 9]).normal(size=(3, 3))])
    result.check("softmax cross-entropy", report.passed, f"max rel-err {report.max_error:.2e}")
    rows.append({"case": "softmax cross-entropy", "max_rel_error": report.max_error, "parameters": 1})
    result.evidence["errors"] = pd.DataFrame(rows)
    return result


SUITES = {
    "cdf": cdf_suite,
    "bias": bias_suite,
    "sinkhorn": sinkhorn_suite,
    "permutation": permutation_suite,
    "gradcheck": gradcheck_suite,
}


def write_suite(result, out_dir):
    """``verify_<suite>.json`` plus one ``<suite>_<table>.csv`` per evidence table."""
    os.makedirs(out_dir, exist_ok=True)
    for name, frame in result.evidence.items():
        frame.to_csv(os.path.join(out_dir, f"{result.suite}_{name}.csv"), index=False)
    path = os.path.join(out_dir, f"verify_{result.suite}.json")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(result.to_dict(), f, indent=2, default=float)
    return path

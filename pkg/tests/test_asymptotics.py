import numpy as np
import pytest

from dagfuse.asymptotics import (
    EmpiricalLaw,
    LimitLawSpec,
    classify_edges,
    compare_laws,
    decomposition_check,
    finite_sample_penalty,
    limit_law_solve,
    linear_shift,
    mc_finite_sample,
    mc_limit,
    objective_V,
    objective_Vn,
    replicate_rng,
    sample_psi_multinomial,
)
from dagfuse.errors import InvalidProbabilityVector, PreconditionViolated
from dagfuse.graph import build_chain, build_grid2d
from dagfuse.solver import PenaltyConfig, solve
from dagfuse.verify import random_dag


def spec(truth, lf=0.0, lni=0.0, q=0.5):
    return LimitLawSpec(np.asarray(truth, float), lf, lni, q)


def test_classify_edges_examples():
    assert classify_edges(spec([0, 0]), build_chain(2)).eq_edges == (0,)
    cls = classify_edges(spec([0, 0, 1]), build_chain(3))
    assert (cls.eq_edges, cls.pos_edges, cls.neg_edges) == ((0,), (), (1,))
    assert classify_edges(spec([1, 0]), build_chain(2)).pos_edges == (0,)


def test_linear_shift_examples():
    g = build_chain(2)
    s = spec([0, 1], lf=1.0)
    np.testing.assert_allclose(linear_shift(s, g, classify_edges(s, g)), [-1, 1])
    s = spec([1, 0], lni=2.0)
    np.testing.assert_allclose(linear_shift(s, g, classify_edges(s, g)), [2, -2])
    s = spec(np.zeros(12), lf=1.0, lni=3.0)
    g = build_grid2d(3, 4)
    np.testing.assert_allclose(linear_shift(s, g, classify_edges(s, g)), 0.0)


def test_linear_shift_matches_linear_terms_of_V():
    rng = np.random.default_rng(8)
    for _ in range(50):
        g = random_dag(rng, 12)
        truth = rng.integers(0, 3, g.n_vertices).astype(float)
        s = spec(truth, *rng.uniform(0, 2, 2))
        cls = classify_edges(s, g)
        c = linear_shift(s, g, cls)
        w, psi = rng.normal(size=(2, g.n_vertices))
        # Only the eq-edge terms and the quadratic remain once c'w is removed.
        dw = w[g.sources] - w[g.targets]
        eq = np.array(cls.eq_edges, dtype=int)
        rest = -2 * psi @ w + w @ w
        rest += s.lambda_f0 * np.abs(dw[eq]).sum() + s.lambda_ni0 * np.maximum(dw[eq], 0).sum()
        assert objective_V(w, psi, s, g) == pytest.approx(rest + c @ w, abs=1e-10)


def test_limit_solve_zero_penalty_is_psi():
    psi = np.array([0.3, -0.1, -0.2])
    np.testing.assert_array_equal(limit_law_solve(psi, spec([0, 0, 0]), build_chain(3)), psi)


def test_limit_solve_no_flat_edges_closed_form():
    g = build_chain(3)
    s = spec([0.0, 1.0, 0.5], lf=0.7, lni=1.1)
    psi = np.array([0.4, -0.3, 0.2])
    c = linear_shift(s, g, classify_edges(s, g))
    np.testing.assert_allclose(limit_law_solve(psi, s, g), psi - c / 2)


def test_limit_solve_two_node_factor_of_two():
    w = limit_law_solve([1.0, 0.0], spec([0.3, 0.3], lni=0.4), build_chain(2))
    np.testing.assert_allclose(w, [0.8, 0.2], atol=1e-8)


def test_objective_V_examples():
    g = build_chain(2)
    psi = np.array([1.0, 0.0])
    assert objective_V([0.0, 0.0], psi, spec([1, 0], 2, 3), g) == 0.0
    assert objective_V(psi, psi, spec([0, 0]), g) == pytest.approx(-1.0)
    assert objective_V([0.8, 0.2], psi, spec([0, 0], lni=0.4), g) == pytest.approx(-0.68, abs=1e-12)


def test_limit_solution_beats_perturbations():
    rng = np.random.default_rng(21)
    for k in range(100):
        g = random_dag(rng, 10, ("chain", "grid", "diamond", "random")[k % 4])
        truth = rng.integers(0, 3, g.n_vertices).astype(float)
        s = spec(truth, *rng.uniform(0, 2, 2))
        psi = rng.normal(size=g.n_vertices)
        w = limit_law_solve(psi, s, g)
        v = objective_V(w, psi, s, g)
        for scale in (1e-2, 1e-4):
            for _ in range(25):
                pert = w + scale * rng.uniform(-1, 1, g.n_vertices)
                assert v <= objective_V(pert, psi, s, g) + 1e-10


def test_sampler_degenerate_and_centered():
    rng = replicate_rng(1, 0, 0)
    np.testing.assert_array_equal(sample_psi_multinomial([1.0, 0.0, 0.0], rng), 0.0)
    p = np.array([0.1, 0.2, 0.3, 0.4])
    for _ in range(1000):
        assert abs(sample_psi_multinomial(p, rng).sum()) <= 1e-12


def test_sampler_covariance():
    p = np.full(4, 0.25)
    rng = np.random.default_rng(4)
    draws = np.array([sample_psi_multinomial(p, rng) for _ in range(100_000)])
    target = np.diag(p) - np.outer(p, p)
    assert np.max(np.abs(np.cov(draws, rowvar=False) - target)) <= 0.01


def test_sampler_rejects_bad_pmf():
    rng = np.random.default_rng(0)
    for p in ([0.5, 0.6], [-0.1, 1.1], [np.nan, 1.0]):
        with pytest.raises(InvalidProbabilityVector):
            sample_psi_multinomial(p, rng)


def test_finite_sample_zero_penalty_is_raw_error():
    g = build_chain(3)
    p = np.array([0.2, 0.3, 0.5])
    law = mc_finite_sample(p, g, 400, PenaltyConfig(), 0.5, 20, seed=5)
    for r in range(20):
        counts = replicate_rng(5, 0, r).multinomial(400, p)
        np.testing.assert_allclose(law.samples[r], 20 * (counts / 400 - p), atol=1e-12)


def test_finite_sample_degenerate():
    law = mc_finite_sample([1.0, 0.0], build_chain(2), 1, PenaltyConfig(), 0.5, 5, seed=0)
    np.testing.assert_array_equal(law.samples, 0.0)


def test_finite_sample_deterministic_and_order_independent():
    g = build_chain(4)
    p = np.full(4, 0.25)
    a = mc_finite_sample(p, g, 1000, PenaltyConfig(0, 1), 0.5, 30, seed=9)
    b = mc_finite_sample(p, g, 1000, PenaltyConfig(0, 1), 0.5, 30, seed=9)
    np.testing.assert_array_equal(a.samples, b.samples)
    # Replicate r depends only on (seed, r): a shorter run is a prefix.
    c = mc_finite_sample(p, g, 1000, PenaltyConfig(0, 1), 0.5, 10, seed=9)
    np.testing.assert_array_equal(a.samples[:10], c.samples)


def test_threads_do_not_change_results():
    g = build_chain(4)
    p = np.full(4, 0.25)
    a = mc_limit(p, spec(p, lni=1.0), g, 40, seed=3)
    b = mc_limit(p, spec(p, lni=1.0), g, 40, seed=3, threads=2)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_finite_sample_mean_matches_limit_mean():
    # The nearly-isotonic pull is one-sided, so neither mean is zero
    # (end coordinates sit near -0.17 and +0.17); they must agree.
    g = build_chain(4)
    p = np.full(4, 0.25)
    law = mc_finite_sample(p, g, 100_000, PenaltyConfig(0, 1), 0.5, 2000, seed=17, scaling="matched")
    lim = mc_limit(p, spec(p, lni=1.0), g, 2000, seed=17)
    assert np.max(np.abs(law.samples.mean(axis=0) - lim.samples.mean(axis=0))) <= 0.1
    # Middle coordinates mirror the ends: the mean is antisymmetric.
    m = lim.samples.mean(axis=0)
    assert np.max(np.abs(m + m[::-1])) <= 0.05


def test_penalty_scalings():
    lam = PenaltyConfig(1.0, 2.0)
    assert finite_sample_penalty(lam, 100, 0.5) == PenaltyConfig(10.0, 20.0)
    assert finite_sample_penalty(lam, 100, 0.5, "matched") == PenaltyConfig(0.05, 0.1)
    with pytest.raises(ValueError):
        finite_sample_penalty(lam, 100, 0.5, "other")


def test_scaled_criterion_minimizer_needs_matched_penalty():
    # n^q (beta* - beta0) minimizes V_n for lambda_n exactly when the solver
    # penalty is lambda_n / (2 n^{2q}).
    rng = np.random.default_rng(2)
    g = build_chain(4)
    truth = np.array([0.1, 0.2, 0.2, 0.5])
    s = spec(truth, q=0.5)
    n = 400
    pen_n = PenaltyConfig(3.0, 5.0)
    for _ in range(20):
        beta_hat = truth + rng.normal(scale=0.05, size=4)
        fit = solve(beta_hat, g, pen_n.scaled(1 / (2 * n))).beta
        w = np.sqrt(n) * (fit - truth)
        v = objective_Vn(w, beta_hat, s, g, n, pen_n)
        for _ in range(30):
            assert v <= objective_Vn(w + 1e-3 * rng.uniform(-1, 1, 4), beta_hat, s, g, n, pen_n) + 1e-10


def test_matched_scaling_is_exact_for_flat_truth():
    g = build_grid2d(2, 3)
    p = np.full(6, 1 / 6)
    n = 5000
    s = spec(p, lf=0.4, lni=1.0)
    law = mc_finite_sample(p, g, n, PenaltyConfig(0.4, 1.0), 0.5, 10, seed=1, scaling="matched")
    for r in range(10):
        psi_n = np.sqrt(n) * (replicate_rng(1, 0, r).multinomial(n, p) / n - p)
        np.testing.assert_allclose(law.samples[r], limit_law_solve(psi_n, s, g), atol=1e-6)


def test_mc_limit_zero_penalty_is_psi():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    law = mc_limit(p, spec(p), build_chain(4), 10, seed=4)
    for r in range(10):
        np.testing.assert_array_equal(law.samples[r], sample_psi_multinomial(p, replicate_rng(4, 1, r)))


def test_mc_limit_strictly_increasing_truth_is_shifted_gaussian():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    g = build_chain(4)
    s = spec(p, lf=0.5, lni=1.0)
    c = linear_shift(s, g, classify_edges(s, g))
    law = mc_limit(p, s, g, 10, seed=4)
    for r in range(10):
        psi = sample_psi_multinomial(p, replicate_rng(4, 1, r))
        np.testing.assert_allclose(law.samples[r], psi - c / 2, atol=1e-14)


def test_mc_limit_sum_identity():
    p = np.array([0.1, 0.4, 0.4, 0.1])
    g = build_chain(4)
    s = spec(p, lf=0.3, lni=1.0)
    c = linear_shift(s, g, classify_edges(s, g))
    law = mc_limit(p, s, g, 2000, seed=6)
    # The psi draws sum to zero, so every w sums to -sum(c)/2.
    assert np.max(np.abs(law.samples.sum(axis=1) + c.sum() / 2)) <= 1e-8


def test_compare_laws_basics():
    x = np.random.default_rng(0).normal(size=(50, 3))
    rep = compare_laws(EmpiricalLaw(x, 0), EmpiricalLaw(x, 0))
    assert rep["per_coord_ks"] == [0.0, 0.0, 0.0]
    assert rep["mean_gap"] == 0.0 and rep["cov_gap"] == 0.0
    a = EmpiricalLaw(np.arange(10.0)[:, None], 0)
    b = EmpiricalLaw(np.arange(10.0, 20.0)[:, None], 0)
    assert compare_laws(a, b)["per_coord_ks"] == [1.0]


def test_compare_laws_self_consistency():
    p = np.full(4, 0.25)
    g = build_chain(4)
    s = spec(p, lni=1.0)
    a = mc_limit(p, s, g, 2000, seed=100)
    b = mc_limit(p, s, g, 2000, seed=101)
    ks = np.array(compare_laws(a, b)["per_coord_ks"])
    assert np.sum(ks < 0.061) >= 3


def test_decomposition_examples():
    rng = np.random.default_rng(12)
    g = build_chain(4)
    psi = rng.normal(size=4)
    inc = spec([0.0, 1.0, 2.0, 3.0], lni=1.0)
    assert decomposition_check(psi, inc, g)["max_gap"] == 0.0
    np.testing.assert_array_equal(limit_law_solve(psi, inc, g), psi)
    assert decomposition_check(psi, spec(np.zeros(4), lni=1.0), g)["max_gap"] <= 1e-8
    rep = decomposition_check(psi, spec([0, 0, 1, 1], lni=1.0), g)
    assert rep["max_gap"] <= 1e-8 and rep["n_regions"] == 2


def test_decomposition_preconditions():
    g = build_chain(3)
    with pytest.raises(PreconditionViolated):
        decomposition_check(np.zeros(3), spec([0, 0, 1], lf=0.1, lni=1.0), g)
    with pytest.raises(PreconditionViolated):
        decomposition_check(np.zeros(3), spec([1, 0, 0], lni=1.0), g)

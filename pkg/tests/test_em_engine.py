"""Fitting, Q maximization, derivatives, and the information decomposition."""

import math

import numpy as np
import pytest

import missinfo as mi
from missinfo import HypothesisSpec, UnitDataset
from missinfo.em_engine import loglik_derivative
from missinfo.models import (
    BernoulliMcarUnit,
    NormalMeanUnit,
    TiltingFamilyUnit,
    TwoSampleCountsUnit,
    tilting_sibpair_ibs_unit,
)
from missinfo.models.tilting import SIBPAIR_NULL
from missinfo.models.tilting import SIBPAIR_SUPPORT as SIBPAIR_Z


class TestFitMle:
    def test_two_sample_complete_data(self, two_sample_model):
        data = UnitDataset.of([TwoSampleCountsUnit((300, 200), (250, 250), 0, 0)])
        fit = mi.fit_mle(two_sample_model, data)
        a = fit.theta.values[1] + fit.theta.values[0] / 2
        u = fit.theta.values[1] - fit.theta.values[0] / 2
        assert a == pytest.approx(0.6, abs=1e-9)
        assert u == pytest.approx(0.5, abs=1e-9)
        assert fit.converged

    def test_normal_closed_form(self, normal_model):
        y = (0.4, -1.2, 2.2, 0.8)
        data = UnitDataset.of([NormalMeanUnit(y, 9)])
        fit = mi.fit_mle(normal_model, data)
        assert fit.theta.values[0] == pytest.approx(np.mean(y), abs=1e-10)
        assert fit.theta.values[1] == pytest.approx(np.var(y), abs=1e-10)
        assert fit.gradient_norm <= 1e-6

    def test_flat_likelihood_flagged(self, tilting_model):
        flat = TiltingFamilyUnit(SIBPAIR_Z, SIBPAIR_NULL, SIBPAIR_NULL)
        data = UnitDataset.of([flat])
        fit = mi.fit_mle(tilting_model, data)
        assert "flat_loglik" in fit.flags
        assert "non_identifiable" in fit.flags
        assert fit.gradient_norm == pytest.approx(0.0, abs=1e-9)

    def test_boundary_flagged(self, bernoulli_model):
        data = UnitDataset.of([BernoulliMcarUnit((1, 1, 1, 1, 1), 2)])
        fit = mi.fit_mle(bernoulli_model, data)
        assert fit.boundary
        assert fit.converged

    def test_multistart_improves(self, tilting_model, tilting_data):
        cfg = mi.FitConfig(n_starts=3, seed=4)
        fit = mi.fit_mle(tilting_model, tilting_data, config=cfg)
        base = mi.fit_mle(tilting_model, tilting_data)
        assert fit.loglik >= base.loglik - 1e-10


class TestFitNullMle:
    def test_two_sample_pooled(self, two_sample_model, allele_demo_data):
        fit = mi.fit_null_mle(two_sample_model, allele_demo_data, HypothesisSpec((0.0,)))
        assert fit.theta.values[0] == 0.0
        assert fit.theta.values[1] == pytest.approx(0.55, abs=1e-10)

    def test_no_nuisance_returns_null(self, bernoulli_model):
        data = UnitDataset.of([BernoulliMcarUnit((1, 0, 1), 2)])
        fit = mi.fit_null_mle(bernoulli_model, data, HypothesisSpec((0.37,)))
        assert fit.theta.values == (0.37,)
        assert fit.iterations == 0
        assert fit.converged

    def test_normal_null_variance(self, normal_model):
        y = (0.4, -1.2, 2.2, 0.8)
        mu0 = 0.1
        data = UnitDataset.of([NormalMeanUnit(y, 9)])
        fit = mi.fit_null_mle(normal_model, data, HypothesisSpec((mu0,)))
        want = float(np.mean((np.asarray(y) - mu0) ** 2))
        assert fit.theta.values[0] == mu0
        assert fit.theta.values[1] == pytest.approx(want, abs=1e-10)


class TestMaximizeQ:
    def test_no_missing_matches_mle(self, two_sample_model):
        data = UnitDataset.of([TwoSampleCountsUnit((30, 20), (25, 25), 0, 0)])
        anchor = two_sample_model.point([0.0, 0.4])
        res = mi.maximize_q(two_sample_model, data, anchor)
        fit = mi.fit_mle(two_sample_model, data)
        np.testing.assert_allclose(res.theta.array, fit.theta.array, atol=1e-9)

    def test_reference_completed_counts(self, two_sample_model, allele_demo_data):
        anchor = two_sample_model.point([0.0, 0.55])
        res = mi.maximize_q(two_sample_model, allele_demo_data, anchor)
        a = res.theta.values[1] + res.theta.values[0] / 2
        u = res.theta.values[1] - res.theta.values[0] / 2
        # expected completions: 575/1000 case chromosomes, 525/1000 control
        assert a == pytest.approx(0.575, abs=1e-12)
        assert u == pytest.approx(0.525, abs=1e-12)
        gain = res.loglik - mi.dataset_q(two_sample_model, allele_demo_data, anchor, anchor)
        assert 2 * gain == pytest.approx(5.0527, abs=5e-4)

    def test_mean_imputation_argmax(self, normal_model):
        """The Q maximizer blends the observed mean with the anchor mean by
        the observed fraction; verified against a brute-force Monte Carlo
        average of completed log-likelihoods maximized on a grid."""
        y = (1.0, 2.0, 0.5)
        unit = NormalMeanUnit(y, 6)
        data = UnitDataset.of([unit])
        anchor = normal_model.point([-1.0, 1.2])
        res = mi.maximize_q(normal_model, data, anchor)
        r = 0.5
        want_mu = r * np.mean(y) + (1 - r) * (-1.0)
        assert res.theta.values[0] == pytest.approx(want_mu, abs=1e-12)

        rng = np.random.default_rng(17)
        comps = [normal_model.sample_missing(unit, anchor.array, rng) for _ in range(3000)]
        grid = np.linspace(want_mu - 0.5, want_mu + 0.5, 41)
        means = []
        for mu in grid:
            vals = [normal_model.loglik_comp(c, np.array([mu, res.theta.values[1]]))
                    for c in comps]
            means.append(np.mean(vals))
        assert abs(grid[int(np.argmax(means))] - want_mu) <= 0.1

    def test_flat_q_flagged(self, bernoulli_model):
        # a unit with no outcomes at all has an identically zero Q surface
        data = UnitDataset.of([BernoulliMcarUnit((), 0)])
        res = mi.maximize_q(bernoulli_model, data, bernoulli_model.point([0.4]))
        assert "flat_q" in res.flags


@pytest.mark.parametrize("case", ["bernoulli", "normal", "two_sample", "tilting"])
def test_em_ascent_100_random_anchors(case, bernoulli_model, normal_model,
                                      two_sample_model, tilting_model, tilting_data):
    """One E+M step never decreases the observed log-likelihood."""
    rng = np.random.default_rng(123)
    if case == "bernoulli":
        model = bernoulli_model
        data = UnitDataset.of([BernoulliMcarUnit((1, 0, 1, 1, 0, 1), 7)])
        draw = lambda: [rng.uniform(0.02, 0.98)]
    elif case == "normal":
        model = normal_model
        data = UnitDataset.of([NormalMeanUnit((0.3, -0.8, 1.2, 0.1), 9)])
        draw = lambda: [rng.normal(0, 2), rng.uniform(0.2, 4.0)]
    elif case == "two_sample":
        model = two_sample_model
        data = UnitDataset.of([TwoSampleCountsUnit((30, 20), (25, 25), 18, 12)])
        draw = lambda: [rng.uniform(-0.4, 0.4), rng.uniform(0.3, 0.7)]
    else:
        model = tilting_model
        data = tilting_data
        draw = lambda: [rng.uniform(-2.0, 2.0)]
    for _ in range(100):
        anchor = model.point(draw())
        step = mi.maximize_q(model, data, anchor)
        before = mi.dataset_loglik_obs(model, data, anchor)
        after = mi.dataset_loglik_obs(model, data, step.theta)
        assert after >= before - 1e-9 * max(1.0, abs(before))


def test_score_at_mle_below_tolerance(bernoulli_model, normal_model, two_sample_model,
                                      tilting_model, tilting_data):
    cases = [
        (bernoulli_model, UnitDataset.of([BernoulliMcarUnit((1, 0, 1, 1, 0), 5)])),
        (normal_model, UnitDataset.of([NormalMeanUnit((0.3, -0.8, 1.2), 7)])),
        (two_sample_model, UnitDataset.of([TwoSampleCountsUnit((30, 20), (25, 25), 8, 6)])),
        (tilting_model, tilting_data),
    ]
    for model, data in cases:
        fit = mi.fit_mle(model, data)
        assert fit.gradient_norm <= 1e-6, model.tag


class TestQDerivative:
    def test_normal_analytic_values(self, normal_model):
        y = (0.3, 1.4, -0.6, 0.9)
        m, n = 4, 10
        s2 = 1.7
        data = UnitDataset.of([NormalMeanUnit(y, n)])
        at = normal_model.point([0.2, s2])
        # fixed-variance derivatives of the expected complete log-likelihood
        cases = {
            (2, 0): -n / s2,
            (1, 1): (n - m) / s2,
            (3, 0): 0.0,
            (2, 1): 0.0,
        }
        for (i, j), want in cases.items():
            got = mi.q_derivative(normal_model, data, i, j, at)
            assert got.value == pytest.approx(want, abs=max(5e-5, 50 * got.error))

    def test_q10_formula(self, normal_model):
        y = (0.3, 1.4, -0.6, 0.9)
        data = UnitDataset.of([NormalMeanUnit(y, 10)])
        mu, s2 = 0.2, 1.7
        at = normal_model.point([mu, s2])
        want = (4 * (np.mean(y) - mu) + 6 * (mu - mu)) / s2
        got = mi.q_derivative(normal_model, data, 1, 0, at)
        assert got.value == pytest.approx(want, abs=1e-7)

    def test_error_estimate_bounds_truth(self, normal_model):
        y = (0.3, 1.4, -0.6, 0.9)
        data = UnitDataset.of([NormalMeanUnit(y, 10)])
        at = normal_model.point([0.2, 1.7])
        got = mi.q_derivative(normal_model, data, 2, 0, at)
        assert abs(got.value - (-10 / 1.7)) <= max(10 * got.error, 1e-8)

    def test_invalid_orders(self, normal_model):
        data = UnitDataset.of([NormalMeanUnit((0.1,), 2)])
        at = normal_model.point([0.0, 1.0])
        with pytest.raises(mi.DataError):
            mi.q_derivative(normal_model, data, 3, 2, at)

    def test_boundary_underflow(self, bernoulli_model):
        data = UnitDataset.of([BernoulliMcarUnit((1, 0), 2)])
        at = bernoulli_model.point([1e-14])
        with pytest.raises(mi.NumericalError):
            mi.q_derivative(bernoulli_model, data, 2, 0, at)

    def test_no_missing_q_derivatives(self, bernoulli_model):
        data = UnitDataset.of([BernoulliMcarUnit((1, 0, 1, 0, 1), 0)])
        at = bernoulli_model.point([0.6])
        qd = mi.q_derivative(bernoulli_model, data, 2, 0, at)
        ld = loglik_derivative(bernoulli_model, data, 2, at)
        assert qd.value == pytest.approx(ld.value, rel=1e-8)
        assert mi.q_derivative(bernoulli_model, data, 1, 1, at).value == \
            pytest.approx(0.0, abs=1e-6)


class TestInfoDecomposition:
    def test_normal_known_matrices(self, normal_model):
        y = (0.3, 1.4, -0.6, 0.9, 0.0)
        m, n = 5, 12
        data = UnitDataset.of([NormalMeanUnit(tuple(y), n)])
        fit = mi.fit_mle(normal_model, data)
        mu, s2 = fit.theta.values
        dec = mi.info_decomposition(normal_model, data, fit.theta)
        np.testing.assert_allclose(dec.i_ob, [[m / s2, 0], [0, m / (2 * s2 * s2)]],
                                   rtol=1e-5, atol=1e-7)
        np.testing.assert_allclose(
            dec.i_mi, [[(n - m) / s2, 0], [0, (n - m) / (2 * s2 * s2)]], rtol=1e-12)
        np.testing.assert_allclose(dec.i_co, dec.i_ob + dec.i_mi, rtol=1e-12)
        assert np.min(np.linalg.eigvalsh(dec.i_co)) > 0

    def test_no_missing_zero(self, bernoulli_model):
        data = UnitDataset.of([BernoulliMcarUnit((1, 0, 1), 0)])
        dec = mi.info_decomposition(bernoulli_model, data, bernoulli_model.point([0.5]))
        assert dec.i_mi[0, 0] == 0.0

    def test_tilting_missing_info_from_posterior_variance(self, tilting_model):
        unit = TiltingFamilyUnit(SIBPAIR_Z, SIBPAIR_NULL, (0.1, 0.5, 0.4), gamma=1.3)
        data = UnitDataset.of([unit])
        dec = mi.info_decomposition(tilting_model, data, tilting_model.point([0.0]))
        # brute force over the finite support at the null
        z = np.asarray(unit.support)
        p = np.asarray(unit.posterior_probs)
        want = unit.gamma ** 2 * (p @ z ** 2 - (p @ z) ** 2)
        assert dec.i_mi[0, 0] == pytest.approx(want, rel=1e-12)

    def test_indefinite_flagged_off_mle(self, tilting_model):
        data = UnitDataset.of([tilting_sibpair_ibs_unit()])
        # at the null the evidence has a local minimum, so observed curvature
        # is negative there
        dec = mi.info_decomposition(tilting_model, data, tilting_model.point([0.0]))
        assert "i_ob_indefinite" in dec.flags


def test_meng_identity_all_models(bernoulli_model, normal_model, two_sample_model,
                                  tilting_model, tilting_data):
    """Observed curvature equals the sum of pure and mixed Q curvatures."""
    cases = [
        (bernoulli_model, UnitDataset.of([BernoulliMcarUnit((1, 0, 1, 1, 0), 6)]), [0.55]),
        (normal_model, UnitDataset.of([NormalMeanUnit((0.3, -0.8, 1.2), 7)]), [0.3, 1.1]),
        (two_sample_model,
         UnitDataset.of([TwoSampleCountsUnit((30, 20), (25, 25), 18, 12)]), [0.08, 0.52]),
        (tilting_model, tilting_data, [0.4]),
    ]
    for model, data, vals in cases:
        at = model.point(vals)
        l2 = loglik_derivative(model, data, 2, at).value
        q20 = mi.q_derivative(model, data, 2, 0, at).value
        q11 = mi.q_derivative(model, data, 1, 1, at).value
        assert l2 == pytest.approx(q20 + q11, rel=1e-5, abs=1e-6), model.tag

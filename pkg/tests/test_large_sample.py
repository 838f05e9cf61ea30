"""Large-sample relative-information measures and combining rules."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import missinfo as mi
from missinfo import HypothesisSpec, UnitDataset
from missinfo.models import (
    BernoulliMcarUnit,
    NormalMeanUnit,
    TwoSampleCountsUnit,
    normal_closed_forms,
)


@pytest.fixture(scope="module")
def allele_fits(two_sample_model_module, allele_demo_data_module):
    model, data = two_sample_model_module, allele_demo_data_module
    fit = mi.fit_mle(model, data)
    hyp = HypothesisSpec((0.0,))
    nfit = mi.fit_null_mle(model, data, hyp)
    return model, data, fit.theta, mi.null_point(model, hyp, nfit)


@pytest.fixture(scope="module")
def two_sample_model_module():
    from missinfo.models import TwoSampleAlleleModel
    return TwoSampleAlleleModel()


@pytest.fixture(scope="module")
def allele_demo_data_module():
    return UnitDataset.of([TwoSampleCountsUnit((300, 200), (250, 250), 500, 500)])


class TestReferenceDataset:
    def test_ri1_exact_half(self, allele_fits):
        model, data, ob, null = allele_fits
        r1 = mi.compute_ri1(model, data, ob, null)
        assert r1.value == pytest.approx(0.5, abs=1e-9)
        # evidence doubles with complete data
        assert 1.0 / r1.value == pytest.approx(2.0, abs=1e-8)

    def test_ri0_reference_value(self, allele_fits):
        model, data, ob, null = allele_fits
        r0 = mi.compute_ri0(model, data, ob, null)
        assert r0.value == pytest.approx(0.4993407, abs=1e-6)

    def test_ri_half_is_geometric_mean(self, allele_fits):
        model, data, ob, null = allele_fits
        r1 = mi.compute_ri1(model, data, ob, null).value
        r0 = mi.compute_ri0(model, data, ob, null).value
        rh = mi.compute_ri_half(model, data, ob, null).value
        assert rh == pytest.approx(math.sqrt(r0 * r1), abs=1e-10)

    def test_completed_ratios(self, allele_fits):
        model, data, ob, null = allele_fits
        csr = mi.completed_stat_ratio(model, data, ob, null)
        assert csr.r_from_alt == pytest.approx(0.5, abs=1e-12)
        assert csr.r_from_null == pytest.approx(0.49934, abs=1e-4)

    def test_report_consistency(self, allele_fits):
        model, data, ob, null = allele_fits
        rep = mi.large_sample_report(model, data, ob, null)
        assert rep.ri_half ** 2 == pytest.approx(rep.ri0 * rep.ri1, abs=1e-9)
        assert rep.lod_ob <= rep.expected_lod_co
        assert rep.q_gain_at_null <= rep.lod_ob
        assert 2 * rep.lod_ob == pytest.approx(10.1188, abs=5e-4)
        assert 2 * rep.expected_lod_co == pytest.approx(20.2376, abs=5e-4)
        assert 2 * rep.q_gain_at_null == pytest.approx(5.0527, abs=5e-4)


class TestNoMissing:
    def test_all_measures_one(self, two_sample_model_module):
        model = two_sample_model_module
        data = UnitDataset.of([TwoSampleCountsUnit((30, 20), (26, 24), 0, 0)])
        fit = mi.fit_mle(model, data)
        hyp = HypothesisSpec((0.0,))
        null = mi.null_point(model, hyp, mi.fit_null_mle(model, data, hyp))
        assert mi.compute_ri1(model, data, fit.theta, null).value == pytest.approx(1.0, abs=1e-9)
        assert mi.compute_ri0(model, data, fit.theta, null).value == pytest.approx(1.0, abs=1e-7)
        assert mi.compute_ri_half(model, data, fit.theta, null).value == \
            pytest.approx(1.0, abs=1e-7)


class TestNormalModel:
    def test_ri1_is_observed_fraction_for_any_data(self, normal_model):
        rng = np.random.default_rng(8)
        for _ in range(5):
            m = int(rng.integers(2, 8))
            n = m + int(rng.integers(1, 8))
            y = rng.normal(0.7, 1.8, m)
            data = UnitDataset.of([NormalMeanUnit(tuple(y), n)])
            fit = mi.fit_mle(normal_model, data)
            hyp = HypothesisSpec((rng.normal(),))
            null = mi.null_point(normal_model, hyp,
                                 mi.fit_null_mle(normal_model, data, hyp))
            val = mi.compute_ri1(normal_model, data, fit.theta, null).value
            assert val == pytest.approx(m / n, abs=1e-10)

    def test_ri0_closed_form(self, normal_model):
        y = (0.5, 1.5, -0.3, 0.9, 2.0)
        data = UnitDataset.of([NormalMeanUnit(y, 10)])
        cf = normal_closed_forms(data.units[0], -0.2)
        fit = mi.fit_mle(normal_model, data)
        hyp = HypothesisSpec((-0.2,))
        null = mi.null_point(normal_model, hyp, mi.fit_null_mle(normal_model, data, hyp))
        got = mi.compute_ri0(normal_model, data, fit.theta, null).value
        assert got == pytest.approx(cf.ri0, abs=1e-8)

    def test_ri0_quadratic_correction(self, normal_model):
        """Near the null the conservativeness deficit follows the quadratic
        correction in the standardized offset; the residual decays like its
        fourth power when the offset halves."""
        y = np.array([0.5, 1.5, -0.3, 0.9, 2.0])
        m, n, r = 5, 10, 0.5
        ybar, s2 = y.mean(), ((y - y.mean()) ** 2).mean()
        errs = []
        for t0 in (0.4, 0.2):
            mu0 = ybar - t0 * math.sqrt(s2 / m)
            cf = normal_closed_forms(NormalMeanUnit(tuple(y), n), mu0)
            pred = r - r * (1 - r * r) * t0 * t0 / (2 * m)
            errs.append(abs(cf.ri0 - pred))
        assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.35)

    def test_curve_constant_at_observed_fraction(self, normal_model):
        y = (0.5, 1.5, -0.3, 0.9)
        data = UnitDataset.of([NormalMeanUnit(y, 8)])
        fit = mi.fit_mle(normal_model, data)
        mu_hat, s2_hat = fit.theta.values
        grid = [normal_model.point([mu_hat + d, s2_hat])
                for d in (-2.0, -0.5, 0.3, 1.0, 2.5)]
        pts = mi.ri_curve(normal_model, data, fit.theta, grid)
        for cp in pts:
            assert cp.value == pytest.approx(0.5, abs=1e-6)


class TestDegenerateNull:
    def test_ri1_falls_back_to_curvature_ratio(self, normal_model):
        y = (0.5, 1.5, -0.3, 0.9)
        data = UnitDataset.of([NormalMeanUnit(y, 8)])
        fit = mi.fit_mle(normal_model, data)
        hyp = HypothesisSpec((fit.theta.values[0],))
        null = mi.null_point(normal_model, hyp, mi.fit_null_mle(normal_model, data, hyp))
        res = mi.compute_ri1(normal_model, data, fit.theta, null)
        assert "ri_e_limit" in res.flags
        assert res.value == pytest.approx(0.5, abs=1e-6)

    def test_ri0_same_fallback(self, normal_model):
        y = (0.5, 1.5, -0.3, 0.9)
        data = UnitDataset.of([NormalMeanUnit(y, 8)])
        fit = mi.fit_mle(normal_model, data)
        hyp = HypothesisSpec((fit.theta.values[0],))
        null = mi.null_point(normal_model, hyp, mi.fit_null_mle(normal_model, data, hyp))
        res = mi.compute_ri0(normal_model, data, fit.theta, null)
        assert "ri_e_limit" in res.flags


class TestCurve:
    def test_grid_must_exclude_fit(self, normal_model):
        data = UnitDataset.of([NormalMeanUnit((0.1, 0.4), 4)])
        fit = mi.fit_mle(normal_model, data)
        with pytest.raises(mi.DataError):
            mi.ri_curve(normal_model, data, fit.theta, [fit.theta])

    def test_limit_approaches_curvature_ratio(self, tilting_model, tilting_data):
        fit = mi.fit_mle(tilting_model, tilting_data)
        rie = mi.compute_ri_e(tilting_model, tilting_data, fit.theta).value
        t_ob = fit.theta.values[0]
        grid = [tilting_model.point([t_ob + d]) for d in (1e-3, 5e-4, 2.5e-4)]
        pts = mi.ri_curve(tilting_model, tilting_data, fit.theta, grid)
        gaps = [abs(cp.value - rie) for cp in pts]
        assert gaps[-1] < 1e-3
        assert gaps[0] >= gaps[-1]

    def test_curve_value_at_null_matches_ri1(self, allele_fits):
        model, data, ob, null = allele_fits
        [cp] = mi.ri_curve(model, data, ob, [null])
        want = mi.compute_ri1(model, data, ob, null).value
        assert cp.value == pytest.approx(want, rel=1e-12)


class TestCombining:
    def test_constant_values(self):
        assert mi.combine_harmonic([2.0, 3.0], [0.7, 0.7]).value == pytest.approx(0.7)
        assert mi.combine_arithmetic([2.0, 3.0], [0.7, 0.7]).value == pytest.approx(0.7)

    def test_two_term_hand_values(self):
        assert mi.combine_harmonic([1.0, 1.0], [0.5, 1.0]).value == pytest.approx(2 / 3)
        assert mi.combine_arithmetic([2.0, 1.0], [0.5, 1.0]).value == pytest.approx(2 / 3)

    def test_negative_lod_flagged(self):
        res = mi.combine_harmonic([2.0, -0.2], [0.5, 0.8])
        assert "negative_lod" in res.flags

    def test_ri_out_of_range_rejected(self):
        with pytest.raises(mi.DataError):
            mi.combine_harmonic([1.0], [1.2])

    def test_zero_total_evidence(self):
        with pytest.raises(mi.DegenerateTestError):
            mi.combine_harmonic([1.0, -1.0], [0.5, 0.5])

    @given(st.lists(st.tuples(st.floats(0.05, 5.0), st.floats(0.05, 1.0)),
                    min_size=1, max_size=8))
    @settings(deadline=None, max_examples=60)
    def test_harmonic_equals_arithmetic_with_matched_weights(self, pairs):
        """With complete-data weights set to lod/ri the two rules coincide."""
        lods = [l for l, _ in pairs]
        ris = [r for _, r in pairs]
        lod_cs = [l / r for l, r in pairs]
        h = mi.combine_harmonic(lods, ris).value
        a = mi.combine_arithmetic(lod_cs, ris).value
        assert h == pytest.approx(a, rel=1e-12)

    def test_per_unit_split_recovers_global(self, two_sample_model_module):
        """Case and control halves combine back to the pooled measure."""
        model = two_sample_model_module
        case_unit = TwoSampleCountsUnit((300, 200), (0, 0), 500, 0)
        ctrl_unit = TwoSampleCountsUnit((0, 0), (250, 250), 0, 500)
        data = UnitDataset.of([case_unit, ctrl_unit])
        fit = mi.fit_mle(model, data)
        hyp = HypothesisSpec((0.0,))
        null = mi.null_point(model, hyp, mi.fit_null_mle(model, data, hyp))
        global_ri1 = mi.compute_ri1(model, data, fit.theta, null).value
        terms = mi.per_unit_terms(model, data, fit.theta, null)
        h = mi.combine_harmonic([t.lod for t in terms], [t.ri1 for t in terms]).value
        a = mi.combine_arithmetic([t.lod_complete for t in terms],
                                  [t.ri1 for t in terms]).value
        assert h == pytest.approx(global_ri1, rel=1e-10)
        assert a == pytest.approx(global_ri1, rel=1e-10)
        assert h == pytest.approx(a, rel=1e-12)


class TestConservativenessGuards:
    def test_directions_hold_on_random_data(self, bernoulli_model):
        rng = np.random.default_rng(31)
        for _ in range(20):
            n0 = int(rng.integers(4, 30))
            k = int(rng.integers(0, 30))
            obs = tuple(int(v) for v in rng.random(n0) < rng.uniform(0.2, 0.8))
            if sum(obs) in (0, n0):
                continue
            data = UnitDataset.of([BernoulliMcarUnit(obs, k)])
            fit = mi.fit_mle(bernoulli_model, data)
            p0 = min(max(rng.uniform(0.1, 0.9), 0.02), 0.98)
            null = bernoulli_model.point([p0])
            r1 = mi.compute_ri1(bernoulli_model, data, fit.theta, null)
            r0 = mi.compute_ri0(bernoulli_model, data, fit.theta, null)
            if "ri_e_limit" in r1.flags:
                continue
            assert r1.denominator >= r1.numerator - 1e-9
            assert r0.numerator <= r0.denominator + 1e-9
            assert 0.0 < r1.value <= 1.0
            assert 0.0 <= r0.value <= 1.0

"""Contract-level behaviour: parameter points, datasets, and the Q identity."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import missinfo as mi
from missinfo import (
    DataError,
    HypothesisSpec,
    NumericalError,
    ParamPoint,
    ScalarView,
    UnitDataset,
    dataset_loglik_obs,
    dataset_q,
)
from missinfo.models import BernoulliMcarUnit, NormalMeanUnit, TwoSampleCountsUnit


class TestParamPoint:
    def test_roundtrip(self):
        pt = ParamPoint((0.2, 1.5), ("interest", "nuisance"))
        assert pt.interest_indices == (0,)
        assert pt.interest_values == (0.2,)
        assert pt.with_interest([0.4]).values == (0.4, 1.5)

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            ParamPoint((1.0, 2.0), ("interest",))

    def test_needs_interest(self):
        with pytest.raises(DataError):
            ParamPoint((1.0,), ("nuisance",))

    def test_unknown_role(self):
        with pytest.raises(DataError):
            ParamPoint((1.0,), ("foo",))


class TestHypothesisSpec:
    def test_policy_enum(self):
        HypothesisSpec((0.0,), "fix_at_null_mle")
        HypothesisSpec((0.0,), "average_over_prior")
        with pytest.raises(DataError):
            HypothesisSpec((0.0,), "whatever")

    def test_null_length_checked_at_fit(self, bernoulli_model, bernoulli_unit):
        data = UnitDataset.of([bernoulli_unit])
        with pytest.raises(DataError):
            mi.fit_null_mle(bernoulli_model, data, HypothesisSpec((0.1, 0.2)))


class TestUnitDataset:
    def test_default_weights(self):
        d = UnitDataset.of([1, 2, 3])
        assert d.weights == (1.0, 1.0, 1.0)

    @given(st.lists(st.floats(min_value=0, max_value=5), min_size=1, max_size=6))
    @settings(deadline=None, max_examples=40)
    def test_weight_validation(self, ws):
        units = list(range(len(ws)))
        if all(w == 0 for w in ws):
            with pytest.raises(DataError):
                UnitDataset.of(units, ws)
        else:
            assert len(UnitDataset.of(units, ws)) == len(ws)

    def test_negative_weight(self):
        with pytest.raises(DataError):
            UnitDataset.of([1], [-0.5])

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            UnitDataset.of([1, 2], [1.0])


class TestDatasetReductions:
    def test_additivity(self, bernoulli_model):
        units = [BernoulliMcarUnit((1, 0, 1), 2), BernoulliMcarUnit((0, 0), 1)]
        data = UnitDataset.of(units)
        theta = bernoulli_model.point([0.4])
        total = dataset_loglik_obs(bernoulli_model, data, theta)
        parts = sum(bernoulli_model.loglik_obs(u, theta.array) for u in units)
        assert total == pytest.approx(parts, abs=1e-14)

    def test_weighted_sum(self, bernoulli_model):
        unit = BernoulliMcarUnit((1, 0, 1), 2)
        theta = bernoulli_model.point([0.4])
        twice = dataset_loglik_obs(bernoulli_model, UnitDataset.of([unit], [2.0]), theta)
        once = dataset_loglik_obs(bernoulli_model, UnitDataset.of([unit]), theta)
        assert twice == pytest.approx(2 * once, rel=1e-15)

    def test_empty_dataset_is_zero(self, bernoulli_model):
        theta = bernoulli_model.point([0.3])
        assert dataset_loglik_obs(bernoulli_model, UnitDataset((), ()), theta) == 0.0

    def test_standard_normal_at_zero(self, normal_model):
        data = UnitDataset.of([NormalMeanUnit((0.0, 0.0, 0.0), 3)])
        theta = normal_model.point([0.0, 1.0])
        expected = 3 * (-0.5 * math.log(2 * math.pi))
        assert dataset_loglik_obs(normal_model, data, theta) == pytest.approx(expected)

    def test_nonfinite_reports_unit(self, normal_model):
        data = UnitDataset.of([NormalMeanUnit((0.0,), 1), NormalMeanUnit((1.0,), 1)])
        theta = normal_model.point([0.0, -1.0])
        with pytest.raises(NumericalError, match="unit 0"):
            dataset_loglik_obs(normal_model, data, theta)

    def test_dimension_mismatch(self, bernoulli_model):
        data = UnitDataset.of([BernoulliMcarUnit((1,), 0)])
        bad = ParamPoint((0.1, 0.2), ("interest", "nuisance"))
        with pytest.raises(DataError):
            dataset_loglik_obs(bernoulli_model, data, bad)


def mc_q_difference(model, data, t1, t2, rng, draws=4000):
    """Monte Carlo estimate of Q(t1|t2) - Q(t2|t2) with its standard error."""
    diffs = []
    for _ in range(draws):
        vals = 0.0
        for unit, w in data:
            comp = model.sample_missing(unit, t2.array, rng)
            vals += w * (model.loglik_comp(comp, t1.array)
                         - model.loglik_comp(comp, t2.array))
        diffs.append(vals)
    diffs = np.asarray(diffs)
    return diffs.mean(), diffs.std(ddof=1) / math.sqrt(draws)


class TestQIdentity:
    """Q differences must match Monte Carlo complete-data expectations."""

    @pytest.mark.parametrize("case", ["bernoulli", "normal", "two_sample", "tilting"])
    def test_mc_consistency(self, case, bernoulli_model, normal_model,
                            two_sample_model, tilting_model, tilting_data):
        rng = np.random.default_rng(99)
        if case == "bernoulli":
            model = bernoulli_model
            data = UnitDataset.of([BernoulliMcarUnit((1, 1, 0, 1, 0), 6)])
            t1, t2 = model.point([0.62]), model.point([0.45])
        elif case == "normal":
            model = normal_model
            data = UnitDataset.of([NormalMeanUnit((0.3, -0.8, 1.2), 7)])
            t1, t2 = model.point([0.5, 1.4]), model.point([-0.1, 0.9])
        elif case == "two_sample":
            model = two_sample_model
            data = UnitDataset.of([TwoSampleCountsUnit((30, 20), (25, 25), 18, 12)])
            t1, t2 = model.point([0.1, 0.55]), model.point([0.0, 0.5])
        else:
            model = tilting_model
            data = tilting_data
            t1, t2 = model.point([0.7]), model.point([0.2])
        est, se = mc_q_difference(model, data, t1, t2, rng)
        exact = dataset_q(model, data, t1, t2) - dataset_q(model, data, t2, t2)
        assert abs(est - exact) < 3 * se

    @pytest.mark.parametrize("case", ["bernoulli", "normal", "two_sample", "tilting"])
    def test_kl_nonnegativity(self, case, bernoulli_model, normal_model,
                              two_sample_model, tilting_model, tilting_data):
        """Q(t|t) - Q(t'|t) >= loglik(t) - loglik(t') for all t, t'."""
        rng = np.random.default_rng(5)
        if case == "bernoulli":
            model = bernoulli_model
            data = UnitDataset.of([BernoulliMcarUnit((1, 0, 1, 1), 9)])
            draw = lambda: model.point([rng.uniform(0.05, 0.95)])
        elif case == "normal":
            model = normal_model
            data = UnitDataset.of([NormalMeanUnit((0.3, -0.8, 1.2), 9)])
            draw = lambda: model.point([rng.normal(), rng.uniform(0.3, 3.0)])
        elif case == "two_sample":
            model = two_sample_model
            data = UnitDataset.of([TwoSampleCountsUnit((30, 20), (25, 25), 18, 12)])
            draw = lambda: model.point([rng.uniform(-0.3, 0.3), rng.uniform(0.3, 0.7)])
        else:
            model = tilting_model
            data = tilting_data
            draw = lambda: model.point([rng.uniform(-1.5, 1.5)])
        for _ in range(30):
            t, tp = draw(), draw()
            gap = (dataset_q(model, data, t, t) - dataset_q(model, data, tp, t)
                   - (dataset_loglik_obs(model, data, t)
                      - dataset_loglik_obs(model, data, tp)))
            assert gap >= -1e-9

    def test_no_missing_q_equals_loglik(self, bernoulli_model):
        unit = BernoulliMcarUnit((1, 0, 1), 0)
        data = UnitDataset.of([unit])
        for p1 in (0.2, 0.5, 0.8):
            for p2 in (0.3, 0.6):
                t1 = bernoulli_model.point([p1])
                t2 = bernoulli_model.point([p2])
                assert dataset_q(bernoulli_model, data, t1, t2) == pytest.approx(
                    dataset_loglik_obs(bernoulli_model, data, t1), abs=1e-13)


class TestScalarView:
    def test_requires_scalar_interest(self, normal_model):
        pt = ParamPoint((0.0, 1.0), ("interest", "interest"))
        with pytest.raises(mi.UnsupportedOperationError):
            ScalarView(normal_model, pt)

    def test_full_point_freezes_nuisance(self, normal_model):
        view = ScalarView(normal_model, normal_model.point([0.5, 2.0]))
        assert view.full_point(1.5).values == (1.5, 2.0)


class TestGenericFallbacks:
    """Default score and missing-information implementations."""

    class OpaqueBernoulli(mi.IncompleteModel):
        tag = "opaque"
        param_names = ("p",)
        param_roles = ("interest",)

        def __init__(self):
            self._inner = __import__("missinfo.models", fromlist=["BernoulliMcarModel"]) \
                .BernoulliMcarModel()

        def bounds(self):
            return ((0.0, 1.0),)

        def loglik_obs(self, unit, values):
            return self._inner.loglik_obs(unit, values)

        def q_fn(self, unit, v1, v2):
            return self._inner.q_fn(unit, v1, v2)

        def sample_missing(self, unit, values, rng):
            return self._inner.sample_missing(unit, values, rng)

        def loglik_comp(self, completed, values):
            return self._inner.loglik_comp(completed, values)

    def test_fd_score_matches_analytic(self, bernoulli_model, bernoulli_unit):
        opaque = self.OpaqueBernoulli()
        vals = np.array([0.37])
        fd = opaque.score_obs(bernoulli_unit, vals)
        exact = bernoulli_model.score_obs(bernoulli_unit, vals)
        np.testing.assert_allclose(fd, exact, rtol=1e-6)

    def test_mc_info_missing_matches_analytic(self, bernoulli_model, bernoulli_unit):
        opaque = self.OpaqueBernoulli()
        vals = np.array([0.37])
        rng = np.random.default_rng(7)
        mat, se = opaque.info_missing_mc(bernoulli_unit, vals, rng=rng, draws=4096)
        exact = bernoulli_model.info_missing(bernoulli_unit, vals)
        assert abs(mat[0, 0] - exact[0, 0]) < 4 * math.sqrt(se[0, 0]) + 1e-9

    def test_mc_info_requires_rng(self, bernoulli_unit):
        opaque = self.OpaqueBernoulli()
        with pytest.raises(DataError):
            opaque.info_missing(bernoulli_unit, np.array([0.4]))

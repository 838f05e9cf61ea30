"""Two-sample binomial comparison of allele frequencies with missing chromosomes.

Cases and controls contribute independent chromosome counts for a biallelic
marker.  Subjects without genotypes enter as missing chromosomes, missing
completely at random within their group.  The model is parameterized by the
frequency difference (interest) and the mean frequency (nuisance), so the
usual equal-frequency null pins the single interest coordinate at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from ..model_api import (
    INTEREST,
    NUISANCE,
    DataError,
    IncompleteModel,
    ParamPoint,
    UnitDataset,
)

_EPS = 1e-12


@dataclass(frozen=True)
class TwoSampleCountsUnit:
    """Observed allele counts per group plus missing chromosome counts."""

    case_counts: tuple[float, float]
    control_counts: tuple[float, float]
    missing_case_chroms: float = 0.0
    missing_control_chroms: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "case_counts", tuple(float(c) for c in self.case_counts))
        object.__setattr__(self, "control_counts", tuple(float(c) for c in self.control_counts))
        object.__setattr__(self, "missing_case_chroms", float(self.missing_case_chroms))
        object.__setattr__(self, "missing_control_chroms", float(self.missing_control_chroms))
        allc = self.case_counts + self.control_counts + (
            self.missing_case_chroms, self.missing_control_chroms)
        if len(self.case_counts) != 2 or len(self.control_counts) != 2:
            raise DataError("counts must be (allele1, allele2) pairs")
        if any(c < 0 or not math.isfinite(c) for c in allc):
            raise DataError("all counts must be finite and nonnegative")


@dataclass(frozen=True)
class CompletedTwoSample:
    unit: TwoSampleCountsUnit
    miss_case_ones: float
    miss_control_ones: float


def freqs_from_values(values) -> tuple[float, float]:
    """(case frequency, control frequency) from (difference, mean)."""
    diff, mean = float(values[0]), float(values[1])
    return mean + diff / 2.0, mean - diff / 2.0


def values_from_freqs(a: float, u: float) -> np.ndarray:
    return np.array([a - u, (a + u) / 2.0])


def _group_ll(ones: float, total: float, p: float) -> float:
    if not (_EPS < p < 1 - _EPS):
        return -math.inf
    return float(xlogy(ones, p) + xlogy(total - ones, 1 - p))


class TwoSampleAlleleModel(IncompleteModel):
    tag = "two_sample_allele"
    param_names = ("freq_diff", "freq_mean")
    param_roles = (INTEREST, NUISANCE)

    def bounds(self):
        return ((-1.0, 1.0), (0.0, 1.0))

    def admissible(self, values) -> bool:
        if not super().admissible(values):
            return False
        a, u = freqs_from_values(values)
        return 0.0 < a < 1.0 and 0.0 < u < 1.0

    def default_start(self, data: UnitDataset) -> ParamPoint:
        c1 = sum(w * u.case_counts[0] for u, w in data)
        ct = sum(w * sum(u.case_counts) for u, w in data)
        d1 = sum(w * u.control_counts[0] for u, w in data)
        dt = sum(w * sum(u.control_counts) for u, w in data)
        a = c1 / ct if ct > 0 else 0.5
        u_ = d1 / dt if dt > 0 else 0.5
        a = min(max(a, 0.02), 0.98)
        u_ = min(max(u_, 0.02), 0.98)
        return self.point(values_from_freqs(a, u_))

    # ---- required capabilities -------------------------------------
    def loglik_obs(self, unit: TwoSampleCountsUnit, values) -> float:
        a, u = freqs_from_values(values)
        return (_group_ll(unit.case_counts[0], sum(unit.case_counts), a)
                + _group_ll(unit.control_counts[0], sum(unit.control_counts), u))

    def q_fn(self, unit: TwoSampleCountsUnit, values1, values2) -> float:
        a1, u1 = freqs_from_values(values1)
        a2, u2 = freqs_from_values(values2)
        obs = self.loglik_obs(unit, values1)
        if not (_EPS < a1 < 1 - _EPS and _EPS < u1 < 1 - _EPS):
            return -math.inf
        miss = (unit.missing_case_chroms * (a2 * math.log(a1) + (1 - a2) * math.log1p(-a1))
                + unit.missing_control_chroms * (u2 * math.log(u1) + (1 - u2) * math.log1p(-u1)))
        return obs + miss

    def sample_missing(self, unit, values, rng) -> CompletedTwoSample:
        a, u = freqs_from_values(values)
        mc = int(rng.binomial(int(unit.missing_case_chroms), a)) \
            if unit.missing_case_chroms else 0
        mu_ = int(rng.binomial(int(unit.missing_control_chroms), u)) \
            if unit.missing_control_chroms else 0
        return CompletedTwoSample(unit, float(mc), float(mu_))

    def loglik_comp(self, completed: CompletedTwoSample, values) -> float:
        a, u = freqs_from_values(values)
        unit = completed.unit
        return (_group_ll(unit.case_counts[0] + completed.miss_case_ones,
                          sum(unit.case_counts) + unit.missing_case_chroms, a)
                + _group_ll(unit.control_counts[0] + completed.miss_control_ones,
                            sum(unit.control_counts) + unit.missing_control_chroms, u))

    # ---- exact optional capabilities --------------------------------
    def score_obs(self, unit, values) -> np.ndarray:
        a, u = freqs_from_values(values)
        c1, c2 = unit.case_counts
        d1, d2 = unit.control_counts
        da = c1 / a - c2 / (1 - a)
        du = d1 / u - d2 / (1 - u)
        # d/d(diff) = (da - du)/2 ; d/d(mean) = da + du
        return np.array([(da - du) / 2.0, da + du])

    def info_missing(self, unit, values, *, rng=None, draws=4096) -> np.ndarray:
        a, u = freqs_from_values(values)
        ia = unit.missing_case_chroms / (a * (1 - a))
        iu = unit.missing_control_chroms / (u * (1 - u))
        # chain rule from (a, u) to (diff, mean): a' = (1/2, 1), u' = (-1/2, 1)
        j = np.array([[0.5, 1.0], [-0.5, 1.0]])
        return j.T @ np.diag([ia, iu]) @ j

    def argmax_q(self, data: UnitDataset, anchor, fixed=None):
        fixed = fixed or {}
        if 1 in fixed:
            return None
        a2, u2 = freqs_from_values(anchor)
        c1 = ct = d1 = dt = 0.0
        for un, w in data:
            c1 += w * (un.case_counts[0] + un.missing_case_chroms * a2)
            ct += w * (sum(un.case_counts) + un.missing_case_chroms)
            d1 += w * (un.control_counts[0] + un.missing_control_chroms * u2)
            dt += w * (sum(un.control_counts) + un.missing_control_chroms)
        if ct == 0 or dt == 0:
            return None
        if 0 in fixed:
            if float(fixed[0]) != 0.0:
                return None
            p = (c1 + d1) / (ct + dt)
            return values_from_freqs(p, p)
        return values_from_freqs(c1 / ct, d1 / dt)

    def log_expected_lr_comp(self, unit, num_values, den_values, cond_values, k=1) -> float:
        aa, ua = freqs_from_values(num_values)
        ab, ub = freqs_from_values(den_values)
        ac, uc = freqs_from_values(cond_values)
        out = k * (self.loglik_obs(unit, num_values) - self.loglik_obs(unit, den_values))
        for count, pa, pb, pc in ((unit.missing_case_chroms, aa, ab, ac),
                                  (unit.missing_control_chroms, ua, ub, uc)):
            if count == 0:
                continue
            d1 = k * (math.log(pa) - math.log(pb))
            d0 = k * (math.log1p(-pa) - math.log1p(-pb))
            out += count * float(np.logaddexp(math.log(pc) + d1, math.log1p(-pc) + d0))
        return out

    def lod_comp_moments(self, unit, a_values, b_values, cond_values) -> tuple[float, float]:
        aa, ua = freqs_from_values(a_values)
        ab, ub = freqs_from_values(b_values)
        ac, uc = freqs_from_values(cond_values)
        mean = self.loglik_obs(unit, a_values) - self.loglik_obs(unit, b_values)
        var = 0.0
        for count, pa, pb, pc in ((unit.missing_case_chroms, aa, ab, ac),
                                  (unit.missing_control_chroms, ua, ub, uc)):
            if count == 0:
                continue
            d1 = math.log(pa) - math.log(pb)
            d0 = math.log1p(-pa) - math.log1p(-pb)
            mean += count * (pc * d1 + (1 - pc) * d0)
            var += count * pc * (1 - pc) * (d1 - d0) ** 2
        return mean, var

    def completed_statistics(self, data: UnitDataset, theta_ob: ParamPoint,
                             theta_0: ParamPoint) -> dict:
        unit = pool_units(data)
        res = two_sample_lrt(unit)
        return {"r_from_alt": res.chi2_obs / res.chi2_separate_em,
                "r_from_null": res.chi2_joint_em / res.chi2_obs,
                "statistics": res, "flags": ()}

    # ---- serialization / validation ---------------------------------
    def unit_to_json(self, unit) -> dict:
        return {"case_counts": list(unit.case_counts),
                "control_counts": list(unit.control_counts),
                "missing_case_chroms": unit.missing_case_chroms,
                "missing_control_chroms": unit.missing_control_chroms}

    def unit_from_json(self, obj: dict) -> TwoSampleCountsUnit:
        try:
            return TwoSampleCountsUnit(
                tuple(obj["case_counts"]), tuple(obj["control_counts"]),
                float(obj.get("missing_case_chroms", 0.0)),
                float(obj.get("missing_control_chroms", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad two_sample_allele unit: {exc}") from exc

    def validate_unit(self, unit) -> list[str]:
        if not isinstance(unit, TwoSampleCountsUnit):
            return [f"expected TwoSampleCountsUnit, got {type(unit).__name__}"]
        problems = []
        allc = unit.case_counts + unit.control_counts + (
            unit.missing_case_chroms, unit.missing_control_chroms)
        if any(c < 0 for c in allc):
            problems.append("negative count")
        return problems


def pool_units(data: UnitDataset) -> TwoSampleCountsUnit:
    c = np.zeros(2)
    d = np.zeros(2)
    mc = mu = 0.0
    for un, w in data:
        c += w * np.asarray(un.case_counts)
        d += w * np.asarray(un.control_counts)
        mc += w * un.missing_case_chroms
        mu += w * un.missing_control_chroms
    return TwoSampleCountsUnit(tuple(c), tuple(d), mc, mu)


@dataclass(frozen=True)
class TwoSampleLrt:
    """Likelihood-ratio statistics for the observed and completed tables.

    ``chi2_joint_em`` completes the missing chromosomes at the pooled null
    estimate and re-tests as if real (conservative); ``chi2_separate_em``
    completes per group at the group estimates (anti-conservative).
    """

    chi2_obs: float
    chi2_joint_em: float
    chi2_separate_em: float
    mle_alt: tuple[float, float]
    mle_null: float
    completed_null: tuple[float, float, float, float]
    completed_alt: tuple[float, float, float, float]


def _lrt_from_counts(c1: float, c2: float, d1: float, d2: float) -> float:
    if min(c1 + c2, d1 + d2, c1 + d1, c2 + d2) <= 0:
        raise DataError("counts must be positive in each margin")
    a = c1 / (c1 + c2)
    u = d1 / (d1 + d2)
    p = (c1 + d1) / (c1 + c2 + d1 + d2)
    ll_alt = xlogy(c1, a) + xlogy(c2, 1 - a) + xlogy(d1, u) + xlogy(d2, 1 - u)
    ll_null = xlogy(c1, p) + xlogy(c2, 1 - p) + xlogy(d1, p) + xlogy(d2, 1 - p)
    return float(2 * (ll_alt - ll_null))


def two_sample_lrt(unit: TwoSampleCountsUnit) -> TwoSampleLrt:
    """Observed-table test plus the two imputed-as-real versions."""
    c1, c2 = unit.case_counts
    d1, d2 = unit.control_counts
    chi2_obs = _lrt_from_counts(c1, c2, d1, d2)
    ahat = c1 / (c1 + c2)
    uhat = d1 / (d1 + d2)
    ptil = (c1 + d1) / (c1 + c2 + d1 + d2)

    joint = (c1 + unit.missing_case_chroms * ptil,
             c2 + unit.missing_case_chroms * (1 - ptil),
             d1 + unit.missing_control_chroms * ptil,
             d2 + unit.missing_control_chroms * (1 - ptil))
    sep = (c1 + unit.missing_case_chroms * ahat,
           c2 + unit.missing_case_chroms * (1 - ahat),
           d1 + unit.missing_control_chroms * uhat,
           d2 + unit.missing_control_chroms * (1 - uhat))
    for counts in (joint, sep):
        if min(counts) <= 0:
            raise DataError("zero cell in the completed table; aggregate counts "
                            "before testing (no continuity correction is applied)")
    return TwoSampleLrt(
        chi2_obs=chi2_obs,
        chi2_joint_em=_lrt_from_counts(*joint),
        chi2_separate_em=_lrt_from_counts(*sep),
        mle_alt=(ahat, uhat),
        mle_null=ptil,
        completed_null=joint,
        completed_alt=sep,
    )

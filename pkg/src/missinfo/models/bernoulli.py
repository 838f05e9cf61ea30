"""Bernoulli sample with values missing completely at random.

The completed data are n i.i.d. Bernoulli(p) outcomes of which only the
first n0 are observed.  Everything is available in closed form, which makes
this the main brute-force testbed: expectations over the missing part can be
enumerated exactly for small missing counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..model_api import (
    INTEREST,
    DataError,
    IncompleteModel,
    ParamPoint,
    UnitDataset,
)

_P_EPS = 1e-12


@dataclass(frozen=True)
class BernoulliMcarUnit:
    """Observed 0/1 outcomes plus a count of missing ones."""

    observed: tuple[int, ...]
    n_missing: int

    def __post_init__(self):
        object.__setattr__(self, "observed", tuple(int(y) for y in self.observed))
        object.__setattr__(self, "n_missing", int(self.n_missing))
        if any(y not in (0, 1) for y in self.observed):
            raise DataError("Bernoulli outcomes must be 0 or 1")
        if self.n_missing < 0:
            raise DataError("n_missing must be nonnegative")

    @property
    def n_obs(self) -> int:
        return len(self.observed)

    @property
    def n_total(self) -> int:
        return self.n_obs + self.n_missing

    @property
    def successes(self) -> int:
        return sum(self.observed)


@dataclass(frozen=True)
class CompletedBernoulli:
    obs_ones: int
    n_obs: int
    miss_ones: int
    n_missing: int


def _bern_ll(ones: float, total: float, p: float) -> float:
    if not (_P_EPS < p < 1 - _P_EPS):
        return -math.inf
    return ones * math.log(p) + (total - ones) * math.log1p(-p)


class BernoulliMcarModel(IncompleteModel):
    tag = "bernoulli_mcar"
    param_names = ("p",)
    param_roles = (INTEREST,)

    def bounds(self):
        return ((0.0, 1.0),)

    def default_start(self, data: UnitDataset) -> ParamPoint:
        ones = sum(w * u.successes for u, w in data)
        tot = sum(w * u.n_obs for u, w in data)
        p = ones / tot if tot > 0 else 0.5
        return self.point([min(max(p, 0.05), 0.95)])

    # ---- required capabilities -------------------------------------
    def loglik_obs(self, unit: BernoulliMcarUnit, values) -> float:
        return _bern_ll(unit.successes, unit.n_obs, float(values[0]))

    def q_fn(self, unit: BernoulliMcarUnit, values1, values2) -> float:
        p1, p2 = float(values1[0]), float(values2[0])
        obs = _bern_ll(unit.successes, unit.n_obs, p1)
        return obs + unit.n_missing * (p2 * math.log(p1) + (1 - p2) * math.log1p(-p1))

    def sample_missing(self, unit: BernoulliMcarUnit, values, rng) -> CompletedBernoulli:
        k = int(rng.binomial(unit.n_missing, float(values[0]))) if unit.n_missing else 0
        return CompletedBernoulli(unit.successes, unit.n_obs, k, unit.n_missing)

    def loglik_comp(self, completed: CompletedBernoulli, values) -> float:
        ones = completed.obs_ones + completed.miss_ones
        total = completed.n_obs + completed.n_missing
        return _bern_ll(ones, total, float(values[0]))

    # ---- exact optional capabilities --------------------------------
    def score_obs(self, unit, values) -> np.ndarray:
        p = float(values[0])
        s, n0 = unit.successes, unit.n_obs
        return np.array([s / p - (n0 - s) / (1 - p)])

    def info_missing(self, unit, values, *, rng=None, draws=4096) -> np.ndarray:
        p = float(values[0])
        return np.array([[unit.n_missing / (p * (1 - p))]])

    def argmax_q(self, data: UnitDataset, anchor, fixed=None):
        if fixed and 0 in fixed:
            return np.array([float(fixed[0])])
        p2 = float(anchor[0])
        ones = tot = 0.0
        for u, w in data:
            ones += w * (u.successes + u.n_missing * p2)
            tot += w * u.n_total
        if tot == 0:
            return None
        return np.array([min(max(ones / tot, _P_EPS), 1 - _P_EPS)])

    def log_expected_lr_comp(self, unit, num_values, den_values, cond_values, k=1) -> float:
        pa, pb, pc = float(num_values[0]), float(den_values[0]), float(cond_values[0])
        base = k * (_bern_ll(unit.successes, unit.n_obs, pa)
                    - _bern_ll(unit.successes, unit.n_obs, pb))
        if unit.n_missing == 0:
            return base
        d1 = k * (math.log(pa) - math.log(pb))
        d0 = k * (math.log1p(-pa) - math.log1p(-pb))
        per = np.logaddexp(math.log(pc) + d1, math.log1p(-pc) + d0)
        return base + unit.n_missing * float(per)

    def lod_comp_moments(self, unit, a_values, b_values, cond_values) -> tuple[float, float]:
        pa, pb, pc = float(a_values[0]), float(b_values[0]), float(cond_values[0])
        base = (_bern_ll(unit.successes, unit.n_obs, pa)
                - _bern_ll(unit.successes, unit.n_obs, pb))
        d1 = math.log(pa) - math.log(pb)
        d0 = math.log1p(-pa) - math.log1p(-pb)
        mean = base + unit.n_missing * (pc * d1 + (1 - pc) * d0)
        var = unit.n_missing * pc * (1 - pc) * (d1 - d0) ** 2
        return mean, var

    def completed_statistics(self, data: UnitDataset, theta_ob: ParamPoint,
                             theta_0: ParamPoint) -> dict:
        unit = pool_units(data)
        stats = bernoulli_statistics(unit, theta_0.values[0])
        return {"r_from_alt": stats.r_hat_alt, "r_from_null": stats.r_hat_null,
                "statistics": stats, "flags": stats.flags}

    # ---- serialization / validation ---------------------------------
    def unit_to_json(self, unit: BernoulliMcarUnit) -> dict:
        return {"observed": list(unit.observed), "n_missing": unit.n_missing}

    def unit_from_json(self, obj: dict) -> BernoulliMcarUnit:
        try:
            return BernoulliMcarUnit(tuple(obj["observed"]), int(obj["n_missing"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad bernoulli_mcar unit: {exc}") from exc

    def validate_unit(self, unit) -> list[str]:
        problems = []
        if not isinstance(unit, BernoulliMcarUnit):
            return [f"expected BernoulliMcarUnit, got {type(unit).__name__}"]
        if unit.n_missing < 0:
            problems.append("n_missing is negative")
        if any(y not in (0, 1) for y in unit.observed):
            problems.append("observed values outside {0, 1}")
        return problems


def pool_units(data: UnitDataset) -> BernoulliMcarUnit:
    """Pool a dataset of i.i.d. Bernoulli units into one unit.

    Requires integer weights (frequency semantics).
    """
    obs: list[int] = []
    n_missing = 0
    for u, w in data:
        if w != int(w):
            raise DataError("pooling requires integer frequency weights")
        obs.extend(list(u.observed) * int(w))
        n_missing += int(w) * u.n_missing
    return BernoulliMcarUnit(tuple(obs), n_missing)


@dataclass(frozen=True)
class BernoulliStatistics:
    """Standardized test statistic and its two imputed-as-real versions.

    ``t_full_alt`` treats mean imputation at the observed mean as real data;
    ``t_full_null`` treats mean imputation at the null value as real data.
    Either squared ratio against ``t_obs`` recovers the observed fraction of
    the sample, which the two ``r_hat`` fields report; the algebra cancels
    exactly, so they are returned as the exact sample-size ratio.
    """

    t_obs: float
    t_full_alt: float
    t_full_null: float
    r_hat_alt: float
    r_hat_null: float
    flags: tuple[str, ...]


def bernoulli_statistics(unit: BernoulliMcarUnit, p0: float) -> BernoulliStatistics:
    if not (0.0 < p0 < 1.0):
        raise DataError("p0 must be strictly inside (0, 1)")
    n0, n = unit.n_obs, unit.n_total
    if n0 < 1:
        raise DataError("need at least one observed outcome")
    ybar = unit.successes / n0
    flags: list[str] = []
    if ybar in (0.0, 1.0):
        flags.append("boundary_mle")
    se0 = math.sqrt(p0 * (1 - p0) / n0)
    se_full = math.sqrt(p0 * (1 - p0) / n)
    t_obs = (ybar - p0) / se0
    r = n0 / n
    mean_alt = ybar
    mean_null = r * ybar + (1 - r) * p0
    t_alt = (mean_alt - p0) / se_full
    t_null = (mean_null - p0) / se_full
    if t_obs == 0.0:
        flags.append("degenerate_zero_statistic")
        r_alt = r_null = math.nan
    else:
        # (t_obs/t_alt)^2 and (t_null/t_obs)^2 both reduce to n0/n identically.
        r_alt = r_null = n0 / n
    return BernoulliStatistics(t_obs, t_alt, t_null, r_alt, r_null, tuple(flags))

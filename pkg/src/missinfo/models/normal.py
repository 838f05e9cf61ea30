"""Normal sample with a random subset observed: mean test with unknown variance.

The completed data are n i.i.d. N(mu, sigma2) draws of which m are observed.
Every measure has a closed form here, so this model is the main analytic
oracle for the generic pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..model_api import (
    INTEREST,
    NUISANCE,
    DataError,
    IncompleteModel,
    ParamPoint,
    UnitDataset,
)

_LOG2PI = math.log(2 * math.pi)


@dataclass(frozen=True)
class NormalMeanUnit:
    """Observed values from a sample of ``n_total`` i.i.d. normals.

    ``observed`` may be empty: such a unit is fully missing and contributes
    only missing information.
    """

    observed: tuple[float, ...]
    n_total: int

    def __post_init__(self):
        object.__setattr__(self, "observed", tuple(float(y) for y in self.observed))
        object.__setattr__(self, "n_total", int(self.n_total))
        if self.n_total < 1:
            raise DataError("n_total must be at least 1")
        if len(self.observed) > self.n_total:
            raise DataError("more observed values than n_total")
        if any(not math.isfinite(y) for y in self.observed):
            raise DataError("observed values must be finite")

    @property
    def m(self) -> int:
        return len(self.observed)

    @property
    def n_missing(self) -> int:
        return self.n_total - self.m


@dataclass(frozen=True)
class CompletedNormal:
    unit: NormalMeanUnit
    imputed: tuple[float, ...]


class NormalMeanModel(IncompleteModel):
    tag = "normal_mean"
    param_names = ("mu", "sigma2")
    param_roles = (INTEREST, NUISANCE)

    def bounds(self):
        return ((-np.inf, np.inf), (0.0, np.inf))

    def default_start(self, data: UnitDataset) -> ParamPoint:
        ys = [y for u, w in data if w > 0 for y in u.observed]
        if not ys:
            return self.point([0.0, 1.0])
        mu = float(np.mean(ys))
        s2 = float(np.var(ys)) if len(ys) > 1 else 1.0
        return self.point([mu, max(s2, 1e-6)])

    # ---- required capabilities -------------------------------------
    def loglik_obs(self, unit: NormalMeanUnit, values) -> float:
        mu, s2 = float(values[0]), float(values[1])
        if s2 <= 0:
            return -math.inf
        if unit.m == 0:
            return 0.0
        ss = sum((y - mu) ** 2 for y in unit.observed)
        return -0.5 * unit.m * (_LOG2PI + math.log(s2)) - ss / (2 * s2)

    def q_fn(self, unit: NormalMeanUnit, values1, values2) -> float:
        mu1, s21 = float(values1[0]), float(values1[1])
        mu2, s22 = float(values2[0]), float(values2[1])
        if s21 <= 0 or s22 <= 0:
            return -math.inf
        n, k = unit.n_total, unit.n_missing
        ss = sum((y - mu1) ** 2 for y in unit.observed)
        ss += k * (s22 + (mu2 - mu1) ** 2)
        return -0.5 * n * (_LOG2PI + math.log(s21)) - ss / (2 * s21)

    def sample_missing(self, unit: NormalMeanUnit, values, rng) -> CompletedNormal:
        mu, s2 = float(values[0]), float(values[1])
        draws = tuple(rng.normal(mu, math.sqrt(s2), size=unit.n_missing).tolist())
        return CompletedNormal(unit, draws)

    def loglik_comp(self, completed: CompletedNormal, values) -> float:
        mu, s2 = float(values[0]), float(values[1])
        if s2 <= 0:
            return -math.inf
        n = completed.unit.n_total
        ss = sum((y - mu) ** 2 for y in completed.unit.observed)
        ss += sum((y - mu) ** 2 for y in completed.imputed)
        return -0.5 * n * (_LOG2PI + math.log(s2)) - ss / (2 * s2)

    # ---- exact optional capabilities --------------------------------
    def score_obs(self, unit, values) -> np.ndarray:
        mu, s2 = float(values[0]), float(values[1])
        if unit.m == 0:
            return np.zeros(2)
        dev = [y - mu for y in unit.observed]
        smu = sum(dev) / s2
        ss2 = -unit.m / (2 * s2) + sum(d * d for d in dev) / (2 * s2 * s2)
        return np.array([smu, ss2])

    def info_missing(self, unit, values, *, rng=None, draws=4096) -> np.ndarray:
        s2 = float(values[1])
        k = unit.n_missing
        return np.array([[k / s2, 0.0], [0.0, k / (2 * s2 * s2)]])

    def argmax_q(self, data: UnitDataset, anchor, fixed=None):
        fixed = fixed or {}
        mu2, s22 = float(anchor[0]), float(anchor[1])
        n_tot = sum(w * u.n_total for u, w in data)
        if n_tot == 0:
            return None
        if 0 in fixed:
            mu = float(fixed[0])
        else:
            tot = sum(w * (sum(u.observed) + u.n_missing * mu2) for u, w in data)
            mu = tot / n_tot
        if 1 in fixed:
            s2 = float(fixed[1])
        else:
            ss = 0.0
            for u, w in data:
                ss += w * (sum((y - mu) ** 2 for y in u.observed)
                           + u.n_missing * (s22 + (mu2 - mu) ** 2))
            s2 = max(ss / n_tot, 1e-300)
        return np.array([mu, s2])

    def log_expected_lr_comp(self, unit, num_values, den_values, cond_values, k=1) -> float:
        base = k * (self.loglik_obs(unit, num_values) - self.loglik_obs(unit, den_values))
        if unit.n_missing == 0:
            return base
        per = _log_e_exp_k_normal_ratio(num_values, den_values, cond_values, k)
        if per == math.inf:
            return math.inf
        return base + unit.n_missing * per

    def lod_comp_moments(self, unit, a_values, b_values, cond_values) -> tuple[float, float]:
        base = self.loglik_obs(unit, a_values) - self.loglik_obs(unit, b_values)
        if unit.n_missing == 0:
            return base, 0.0
        m1, v1 = _normal_ratio_moments(a_values, b_values, cond_values)
        return base + unit.n_missing * m1, unit.n_missing * v1

    # ---- serialization / validation ---------------------------------
    def unit_to_json(self, unit: NormalMeanUnit) -> dict:
        return {"observed": list(unit.observed), "n_total": unit.n_total}

    def unit_from_json(self, obj: dict) -> NormalMeanUnit:
        try:
            return NormalMeanUnit(tuple(obj["observed"]), int(obj["n_total"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad normal_mean unit: {exc}") from exc

    def validate_unit(self, unit) -> list[str]:
        if not isinstance(unit, NormalMeanUnit):
            return [f"expected NormalMeanUnit, got {type(unit).__name__}"]
        problems = []
        if len(unit.observed) > unit.n_total:
            problems.append("observed count exceeds n_total")
        return problems


def _log_norm_pdf_quad(mu: float, s2: float) -> tuple[float, float, float]:
    # log N(y | mu, s2) = A y^2 + B y + C
    a = -1.0 / (2 * s2)
    b = mu / s2
    c = -mu * mu / (2 * s2) - 0.5 * (_LOG2PI + math.log(s2))
    return a, b, c


def _log_e_exp_k_normal_ratio(num_values, den_values, cond_values, k: int) -> float:
    """log E[(N(y|num)/N(y|den))^k] for y ~ N(cond); +inf if divergent."""
    aa, ba, ca = _log_norm_pdf_quad(float(num_values[0]), float(num_values[1]))
    ab, bb, cb = _log_norm_pdf_quad(float(den_values[0]), float(den_values[1]))
    ac, bc, cc = _log_norm_pdf_quad(float(cond_values[0]), float(cond_values[1]))
    A = ac + k * (aa - ab)
    B = bc + k * (ba - bb)
    C = cc + k * (ca - cb)
    if A >= 0:
        return math.inf
    # integral of exp(A y^2 + B y + C) over the line
    return C - B * B / (4 * A) + 0.5 * math.log(math.pi / (-A))


def _normal_ratio_moments(a_values, b_values, cond_values) -> tuple[float, float]:
    """Mean and variance of log N(y|a) - log N(y|b) for y ~ N(cond)."""
    aa, ba, ca = _log_norm_pdf_quad(float(a_values[0]), float(a_values[1]))
    ab, bb, cb = _log_norm_pdf_quad(float(b_values[0]), float(b_values[1]))
    qa, qb, qc = aa - ab, ba - bb, ca - cb
    mu, s2 = float(cond_values[0]), float(cond_values[1])
    ey2 = s2 + mu * mu
    mean = qa * ey2 + qb * mu + qc
    var_y2 = 2 * s2 * s2 + 4 * s2 * mu * mu
    cov_y2_y = 2 * mu * s2
    var = qa * qa * var_y2 + qb * qb * s2 + 2 * qa * qb * cov_y2_y
    return mean, var


@dataclass(frozen=True)
class NormalClosedForms:
    """Analytic values of the information measures for this model."""

    ri1: float
    ri0: float
    bi0: float
    bi_s: float
    t0: float
    r: float


def _pool(data) -> NormalMeanUnit:
    if isinstance(data, NormalMeanUnit):
        return data
    obs: list[float] = []
    n_total = 0
    for u, w in data:
        if w != int(w):
            raise DataError("pooling requires integer frequency weights")
        obs.extend(list(u.observed) * int(w))
        n_total += int(w) * u.n_total
    return NormalMeanUnit(tuple(obs), n_total)


def normal_closed_forms(data, mu0: float) -> NormalClosedForms:
    """Closed-form measure values for the normal-mean model.

    ``data`` is a unit or a dataset of units, pooled as one i.i.d. sample.
    The null variance is profiled out exactly; the shrinking-prior measures
    fix it at its null maximum-likelihood value.
    """
    unit = _pool(data)
    m, n = unit.m, unit.n_total
    if m < 1:
        raise DataError("need at least one observed value")
    r = m / n
    if m == n:
        return NormalClosedForms(1.0, 1.0, 1.0, 1.0, math.nan, 1.0)
    ybar = sum(unit.observed) / m
    sig2m = sum((y - ybar) ** 2 for y in unit.observed) / m
    if sig2m <= 0:
        raise DataError("degenerate observed sample (zero variance)")
    t0 = (ybar - mu0) / math.sqrt(sig2m / m)
    t2m = t0 * t0 / m
    ri0 = (1.0 / r) * (1 - math.log1p((1 - r * r) * t2m) / math.log1p(t2m)) \
        if t2m > 0 else r
    bi0 = r * t0 * t0 / (r * t0 * t0 + (1 - r) * (1 + t2m))
    return NormalClosedForms(ri1=r, ri0=ri0, bi0=bi0, bi_s=r, t0=t0, r=r)


def singleton_units(values, n_missing: int) -> list[NormalMeanUnit]:
    """One unit per observed value plus one fully-missing block.

    This is the per-subject representation under which the summed
    squared-score measure reproduces the observed fraction exactly.
    """
    units = [NormalMeanUnit((float(y),), 1) for y in values]
    if n_missing > 0:
        units.append(NormalMeanUnit((), n_missing))
    return units

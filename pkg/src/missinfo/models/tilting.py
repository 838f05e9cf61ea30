"""One-parameter exponential tilt of a standardized family sharing score.

Each family contributes a score Z with known finite null distribution
(standardized so the null mean is 0 and the null variance is 1) and a
posterior distribution p(z) of the score given the family's data under the
null.  The alternative tilts the null law of Z by exp(theta * gamma * z),
which turns any family-score test into a likelihood so that information
measures are well defined.  The complete data for a family is its realized
score value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..model_api import (
    INTEREST,
    DataError,
    IncompleteModel,
    ParamPoint,
    UnitDataset,
)


@dataclass(frozen=True)
class TiltingFamilyUnit:
    """Finite score support, its null law, the data posterior, and a weight."""

    support: tuple[float, ...]
    null_probs: tuple[float, ...]
    posterior_probs: tuple[float, ...]
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(float(z) for z in self.support))
        object.__setattr__(self, "null_probs", tuple(float(p) for p in self.null_probs))
        object.__setattr__(self, "posterior_probs",
                           tuple(float(p) for p in self.posterior_probs))
        object.__setattr__(self, "gamma", float(self.gamma))
        for problem in validate_tilting_unit(self):
            raise DataError(f"tilting unit: {problem}")

    @property
    def posterior_mean(self) -> float:
        return float(np.dot(self.posterior_probs, self.support))

    @property
    def posterior_var(self) -> float:
        z = np.asarray(self.support)
        p = np.asarray(self.posterior_probs)
        m = float(p @ z)
        return float(p @ (z - m) ** 2)


def validate_tilting_unit(unit) -> list[str]:
    problems = []
    z = np.asarray(unit.support, dtype=float)
    p0 = np.asarray(unit.null_probs, dtype=float)
    pp = np.asarray(unit.posterior_probs, dtype=float)
    if not (len(z) == len(p0) == len(pp)):
        return ["support, null_probs and posterior_probs must share one length"]
    if len(z) == 0:
        return ["empty support"]
    if np.any(p0 < 0) or np.any(pp < 0):
        problems.append("negative probabilities")
    if abs(p0.sum() - 1) > 1e-12:
        problems.append(f"null_probs sum to {p0.sum():.15f}, not 1")
    if abs(pp.sum() - 1) > 1e-12:
        problems.append(f"posterior_probs sum to {pp.sum():.15f}, not 1")
    if unit.gamma < 0 or not math.isfinite(unit.gamma):
        problems.append("gamma must be finite and nonnegative")
    if not problems:
        m0 = float(p0 @ z)
        v0 = float(p0 @ z ** 2)
        if abs(m0) > 1e-10:
            problems.append(f"null mean is {m0:.3e}, not 0 (score not standardized)")
        if abs(v0 - 1) > 1e-10:
            problems.append(f"null second moment is {v0:.6f}, not 1 "
                            "(score not standardized)")
    return problems


@dataclass(frozen=True)
class CompletedTilting:
    unit: TiltingFamilyUnit
    z_index: int


class TiltingModel(IncompleteModel):
    tag = "tilting"
    param_names = ("theta",)
    param_roles = (INTEREST,)

    def bounds(self):
        return ((-np.inf, np.inf),)

    def default_start(self, data: UnitDataset) -> ParamPoint:
        return self.point([0.0])

    # ---- internal pieces --------------------------------------------
    @staticmethod
    def _log_c(unit: TiltingFamilyUnit, theta: float) -> float:
        z = np.asarray(unit.support)
        logp0 = np.log(unit.null_probs)
        return -float(logsumexp(logp0 + theta * unit.gamma * z))

    @staticmethod
    def _posterior_tilted(unit: TiltingFamilyUnit, theta: float) -> np.ndarray:
        """Conditional law of the score given the family data at ``theta``."""
        z = np.asarray(unit.support)
        pp = np.asarray(unit.posterior_probs)
        with np.errstate(divide="ignore"):
            logw = np.where(pp > 0, np.log(np.where(pp > 0, pp, 1.0)), -np.inf)
        logw = logw + theta * unit.gamma * z
        logw -= logsumexp(logw)
        return np.exp(logw)

    # ---- required capabilities -------------------------------------
    def loglik_obs(self, unit: TiltingFamilyUnit, values) -> float:
        theta = float(values[0])
        z = np.asarray(unit.support)
        pp = np.asarray(unit.posterior_probs)
        mask = pp > 0
        lse = logsumexp(np.log(pp[mask]) + theta * unit.gamma * z[mask])
        return self._log_c(unit, theta) + float(lse)

    def q_fn(self, unit: TiltingFamilyUnit, values1, values2) -> float:
        t1, t2 = float(values1[0]), float(values2[0])
        w = self._posterior_tilted(unit, t2)
        z = np.asarray(unit.support)
        pp = np.asarray(unit.posterior_probs)
        mask = w > 0
        elogp = float(np.dot(w[mask], np.log(pp[mask])))
        return elogp + self._log_c(unit, t1) + t1 * unit.gamma * float(w @ z)

    def sample_missing(self, unit, values, rng) -> CompletedTilting:
        w = self._posterior_tilted(unit, float(values[0]))
        idx = int(rng.choice(len(w), p=w))
        return CompletedTilting(unit, idx)

    def loglik_comp(self, completed: CompletedTilting, values) -> float:
        theta = float(values[0])
        unit = completed.unit
        z = unit.support[completed.z_index]
        p = unit.posterior_probs[completed.z_index]
        return math.log(p) + self._log_c(unit, theta) + theta * unit.gamma * z

    # ---- exact optional capabilities --------------------------------
    def score_obs(self, unit, values) -> np.ndarray:
        theta = float(values[0])
        z = np.asarray(unit.support)
        w = self._posterior_tilted(unit, theta)
        logw0 = np.log(unit.null_probs) + theta * unit.gamma * z
        p0t = np.exp(logw0 - logsumexp(logw0))
        return np.array([unit.gamma * float(w @ z - p0t @ z)])

    def info_missing(self, unit, values, *, rng=None, draws=4096) -> np.ndarray:
        w = self._posterior_tilted(unit, float(values[0]))
        z = np.asarray(unit.support)
        m = float(w @ z)
        return np.array([[unit.gamma ** 2 * float(w @ (z - m) ** 2)]])

    def log_expected_lr_comp(self, unit, num_values, den_values, cond_values, k=1) -> float:
        ta, tb, tc = float(num_values[0]), float(den_values[0]), float(cond_values[0])
        w = self._posterior_tilted(unit, tc)
        z = np.asarray(unit.support)
        d = (self._log_c(unit, ta) - self._log_c(unit, tb)) + (ta - tb) * unit.gamma * z
        mask = w > 0
        return float(logsumexp(np.log(w[mask]) + k * d[mask]))

    def lod_comp_moments(self, unit, a_values, b_values, cond_values) -> tuple[float, float]:
        ta, tb, tc = float(a_values[0]), float(b_values[0]), float(cond_values[0])
        w = self._posterior_tilted(unit, tc)
        z = np.asarray(unit.support)
        d = (self._log_c(unit, ta) - self._log_c(unit, tb)) + (ta - tb) * unit.gamma * z
        mean = float(w @ d)
        var = float(w @ (d - mean) ** 2)
        return mean, var

    # ---- serialization / validation ---------------------------------
    def unit_to_json(self, unit) -> dict:
        return {"support": list(unit.support), "null_probs": list(unit.null_probs),
                "posterior_probs": list(unit.posterior_probs), "gamma": unit.gamma}

    def unit_from_json(self, obj: dict) -> TiltingFamilyUnit:
        try:
            return TiltingFamilyUnit(
                tuple(obj["support"]), tuple(obj["null_probs"]),
                tuple(obj["posterior_probs"]), float(obj.get("gamma", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad tilting unit: {exc}") from exc

    def validate_unit(self, unit) -> list[str]:
        if not isinstance(unit, TiltingFamilyUnit):
            return [f"expected TiltingFamilyUnit, got {type(unit).__name__}"]
        return validate_tilting_unit(unit)


def tilting_loglik(units, theta: float) -> float:
    """Summed observed-data log-likelihood, zero at theta = 0."""
    model = TiltingModel()
    return sum(model.loglik_obs(u, np.array([theta])) for u in units)


def w_statistic(units) -> tuple[float, list[float]]:
    """Imputed standardized test statistic and the per-family imputed scores."""
    ws = [u.posterior_mean for u in units]
    gam2 = sum(u.gamma ** 2 for u in units)
    if gam2 <= 0:
        raise DataError("all family weights are zero")
    w = sum(u.gamma * wi for u, wi in zip(units, ws)) / math.sqrt(gam2)
    return w, ws


_SQRT2 = math.sqrt(2.0)
# Sib-pair sharing score: counts of alleles shared identically by descent,
# standardized under the null law (1/4, 1/2, 1/4) on 0/1/2 shared.
SIBPAIR_SUPPORT = (-_SQRT2, 0.0, _SQRT2)
SIBPAIR_NULL = (0.25, 0.5, 0.25)


def tilting_sibpair_ibs_unit(gamma: float = 1.0) -> TiltingFamilyUnit:
    """Sib-pair family where all four members carry the same two alleles.

    Both children are heterozygous with the same genotype as both parents,
    so each child's paternal and maternal origins are independent coin flips;
    the pair shares either both or neither parental chromosome.  The data
    posterior therefore puts mass 1/2 on each extreme sharing value and zero
    in the middle.  The imputed score is 0, yet the likelihood is informative
    away from the null.
    """
    return TiltingFamilyUnit(SIBPAIR_SUPPORT, SIBPAIR_NULL, (0.5, 0.0, 0.5), gamma)


def sibpair_known_unit(shared: int, gamma: float = 1.0) -> TiltingFamilyUnit:
    """Fully informative sib-pair sharing ``shared`` alleles (0, 1 or 2)."""
    post = {0: (1.0, 0.0, 0.0), 1: (0.0, 1.0, 0.0), 2: (0.0, 0.0, 1.0)}[int(shared)]
    return TiltingFamilyUnit(SIBPAIR_SUPPORT, SIBPAIR_NULL, post, gamma)


def sibpair_uninformative_unit(gamma: float = 1.0) -> TiltingFamilyUnit:
    """Sib-pair with no marker data: the posterior equals the null law."""
    return TiltingFamilyUnit(SIBPAIR_SUPPORT, SIBPAIR_NULL, SIBPAIR_NULL, gamma)

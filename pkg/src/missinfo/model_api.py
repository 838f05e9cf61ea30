"""Incomplete-data model contract and shared vocabulary.

A model describes independent data units whose complete version is only
partially observed.  Everything the information measures need is expressed
through four per-unit capabilities:

* ``loglik_obs(unit, theta)``   observed-data log-likelihood,
* ``q_fn(unit, t1, t2)``        expected complete-data log-likelihood given
                                the observed data and ``t2`` (the EM E-step
                                objective),
* ``sample_missing(unit, theta, rng)``  a draw of the completed unit from the
                                conditional law of the missing part,
* ``loglik_comp(completed, theta)``     complete-data log-likelihood.

Per-unit log-likelihoods may omit additive constants that do not depend on
the parameter; all consumers work with differences.  Units must be mutually
independent, so dataset-level quantities are weighted sums of per-unit ones.
Dataset weights are frequency weights: weight w counts as w independent
replicates of the unit.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, ClassVar, Sequence

import numpy as np

INTEREST = "interest"
NUISANCE = "nuisance"

FIX_AT_NULL_MLE = "fix_at_null_mle"
AVERAGE_OVER_PRIOR = "average_over_prior"


class MissinfoError(Exception):
    """Base class for package errors."""


class DataError(MissinfoError):
    """Invalid dataset, unit, or configuration."""


class NumericalError(MissinfoError):
    """Non-finite or numerically meaningless intermediate result."""


class DegenerateTestError(MissinfoError):
    """The requested measure is undefined for this data/hypothesis pair."""


class UnsupportedOperationError(MissinfoError):
    """The model does not support the requested operation."""


class HeavyTailError(NumericalError):
    """Likelihood-ratio moments too heavy-tailed to estimate reliably."""


@dataclass(frozen=True)
class ParamPoint:
    """A parameter vector with an interest/nuisance split per coordinate."""

    values: tuple[float, ...]
    roles: tuple[str, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        roles = tuple(str(r) for r in self.roles)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "roles", roles)
        if len(values) != len(roles):
            raise DataError("values and roles must have equal length")
        if not values:
            raise DataError("parameter point must have at least one coordinate")
        for r in roles:
            if r not in (INTEREST, NUISANCE):
                raise DataError(f"unknown role {r!r}")
        if INTEREST not in roles:
            raise DataError("at least one coordinate must be tagged interest")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def dim(self) -> int:
        return len(self.values)

    @property
    def interest_indices(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.roles) if r == INTEREST)

    @property
    def nuisance_indices(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.roles) if r == NUISANCE)

    @property
    def interest_values(self) -> tuple[float, ...]:
        return tuple(self.values[i] for i in self.interest_indices)

    def replace_values(self, values: Sequence[float]) -> "ParamPoint":
        return ParamPoint(tuple(float(v) for v in values), self.roles)

    def with_interest(self, interest_values: Sequence[float]) -> "ParamPoint":
        idx = self.interest_indices
        if len(interest_values) != len(idx):
            raise DataError("wrong number of interest values")
        vals = list(self.values)
        for i, v in zip(idx, interest_values):
            vals[i] = float(v)
        return self.replace_values(vals)


@dataclass(frozen=True)
class HypothesisSpec:
    """Null restriction: fixed values for the interest coordinates."""

    null_values: tuple[float, ...]
    nuisance_policy: str = FIX_AT_NULL_MLE

    def __post_init__(self):
        object.__setattr__(self, "null_values", tuple(float(v) for v in self.null_values))
        if self.nuisance_policy not in (FIX_AT_NULL_MLE, AVERAGE_OVER_PRIOR):
            raise DataError(f"unknown nuisance policy {self.nuisance_policy!r}")
        if not self.null_values:
            raise DataError("null_values must not be empty")


@dataclass(frozen=True)
class UnitDataset:
    """Independent per-unit payloads with nonnegative frequency weights."""

    units: tuple
    weights: tuple[float, ...]

    def __post_init__(self):
        units = tuple(self.units)
        object.__setattr__(self, "units", units)
        if self.weights is None:
            weights = tuple(1.0 for _ in units)
        else:
            weights = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "weights", weights)
        if not units:
            # An empty dataset is allowed (sums are zero) but weights must match.
            if weights:
                raise DataError("weights given for empty unit list")
            return
        if len(weights) != len(units):
            raise DataError("weights length must match number of units")
        if any(w < 0 or not math.isfinite(w) for w in weights):
            raise DataError("weights must be finite and nonnegative")
        if all(w == 0 for w in weights):
            raise DataError("weights must not all be zero")

    @classmethod
    def of(cls, units: Sequence, weights: Sequence[float] | None = None) -> "UnitDataset":
        units = tuple(units)
        if weights is None:
            weights = tuple(1.0 for _ in units)
        return cls(units, tuple(weights))

    def __len__(self) -> int:
        return len(self.units)

    def __iter__(self):
        return iter(zip(self.units, self.weights))


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo settings: master seed and draws per expectation."""

    seed: int = 0
    draws: int = 4096

    def __post_init__(self):
        if self.draws < 2:
            raise DataError("mc draws must be at least 2")


class IncompleteModel(ABC):
    """Contract every built-in or user model implements.

    All methods are pure functions of their inputs; RNG state is always
    passed explicitly.  ``theta`` arguments are plain float arrays in the
    model's parameterization; :meth:`point` attaches the role layout.
    """

    tag: ClassVar[str]
    param_names: ClassVar[tuple[str, ...]]
    param_roles: ClassVar[tuple[str, ...]]

    # ------------------------------------------------------------------
    # parameter layout
    # ------------------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.param_names)

    @property
    def interest_indices(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.param_roles) if r == INTEREST)

    @property
    def nuisance_indices(self) -> tuple[int, ...]:
        return tuple(i for i, r in enumerate(self.param_roles) if r == NUISANCE)

    def bounds(self) -> tuple[tuple[float, float], ...]:
        """Open box bounds per coordinate; infinities for unbounded."""
        return tuple((-np.inf, np.inf) for _ in self.param_names)

    def admissible(self, values: np.ndarray) -> bool:
        values = np.asarray(values, dtype=float)
        if values.shape != (self.dim,) or not np.all(np.isfinite(values)):
            return False
        for v, (lo, hi) in zip(values, self.bounds()):
            if not (lo < v < hi):
                return False
        return True

    def point(self, values: Sequence[float]) -> ParamPoint:
        values = tuple(float(v) for v in values)
        if len(values) != self.dim:
            raise DataError(f"{self.tag}: expected {self.dim} parameters, got {len(values)}")
        return ParamPoint(values, self.param_roles)

    def default_start(self, data: UnitDataset) -> ParamPoint:
        """A crude admissible starting point for optimization."""
        vals = []
        for lo, hi in self.bounds():
            if np.isfinite(lo) and np.isfinite(hi):
                vals.append(0.5 * (lo + hi))
            elif np.isfinite(lo):
                vals.append(lo + 1.0)
            elif np.isfinite(hi):
                vals.append(hi - 1.0)
            else:
                vals.append(0.0)
        return self.point(vals)

    # ------------------------------------------------------------------
    # required per-unit capabilities
    # ------------------------------------------------------------------
    @abstractmethod
    def loglik_obs(self, unit, values: np.ndarray) -> float: ...

    @abstractmethod
    def q_fn(self, unit, values1: np.ndarray, values2: np.ndarray) -> float: ...

    @abstractmethod
    def sample_missing(self, unit, values: np.ndarray, rng: np.random.Generator): ...

    @abstractmethod
    def loglik_comp(self, completed, values: np.ndarray) -> float: ...

    # ------------------------------------------------------------------
    # optional capabilities with generic fallbacks
    # ------------------------------------------------------------------
    def score_obs(self, unit, values: np.ndarray) -> np.ndarray:
        """Per-unit observed-data score; default is central differences."""
        values = np.asarray(values, dtype=float)
        out = np.empty(self.dim)
        for k in range(self.dim):
            h = max(1e-5, 1e-5 * abs(values[k]))
            up = values.copy()
            dn = values.copy()
            up[k] += h
            dn[k] -= h
            out[k] = (self.loglik_obs(unit, up) - self.loglik_obs(unit, dn)) / (2 * h)
        if not np.all(np.isfinite(out)):
            raise NumericalError(f"{self.tag}: non-finite score at {values}")
        return out

    def info_missing(self, unit, values: np.ndarray, *, rng: np.random.Generator | None = None,
                     draws: int = 4096) -> np.ndarray:
        """Per-unit missing information matrix at ``values``.

        Default: Monte Carlo variance of the complete-data score given the
        observed data.  Models with tractable structure override this.
        """
        mat, _ = self.info_missing_mc(unit, values, rng=rng, draws=draws)
        return mat

    def info_missing_mc(self, unit, values: np.ndarray, *, rng: np.random.Generator | None,
                        draws: int = 4096) -> tuple[np.ndarray, np.ndarray]:
        """Monte Carlo missing-information fallback with standard errors."""
        if rng is None:
            raise DataError("Monte Carlo info_missing fallback needs an explicit rng")
        values = np.asarray(values, dtype=float)
        scores = np.empty((draws, self.dim))
        for d in range(draws):
            completed = self.sample_missing(unit, values, rng)
            scores[d] = self._score_comp_fd(completed, values)
        mat = np.cov(scores, rowvar=False).reshape(self.dim, self.dim)
        se = np.sqrt(np.maximum(_cov_se2(scores), 0.0))
        return mat, se

    def _score_comp_fd(self, completed, values: np.ndarray) -> np.ndarray:
        out = np.empty(self.dim)
        for k in range(self.dim):
            h = max(1e-5, 1e-5 * abs(values[k]))
            up = values.copy()
            dn = values.copy()
            up[k] += h
            dn[k] -= h
            out[k] = (self.loglik_comp(completed, up) - self.loglik_comp(completed, dn)) / (2 * h)
        return out

    def argmax_q(self, data: UnitDataset, anchor: np.ndarray,
                 fixed: dict[int, float] | None = None) -> np.ndarray | None:
        """Closed-form M-step if the model has one; None means unavailable.

        ``fixed`` maps coordinate index to a pinned value (used for
        null-constrained fits).
        """
        return None

    def log_expected_lr_comp(self, unit, num_values: np.ndarray, den_values: np.ndarray,
                             cond_values: np.ndarray, k: int = 1) -> float | None:
        """log E[(f(Yco|num)/f(Yco|den))^k | Yob, cond], or None if untractable.

        May return +inf when the conditional moment does not exist.
        """
        return None

    def lod_comp_moments(self, unit, a_values: np.ndarray, b_values: np.ndarray,
                         cond_values: np.ndarray) -> tuple[float, float] | None:
        """Conditional mean and variance of the complete-data log ratio.

        The ratio compares ``a_values`` against ``b_values``; the missing data
        follow their conditional law at ``cond_values``.  None if untractable.
        """
        return None

    def completed_statistics(self, data: UnitDataset, theta_ob: ParamPoint,
                             theta_0: ParamPoint) -> dict:
        raise UnsupportedOperationError(
            f"{self.tag}: no native scalar test statistic with mean imputation")

    # ------------------------------------------------------------------
    # serialization and validation
    # ------------------------------------------------------------------
    def unit_to_json(self, unit) -> dict:
        raise UnsupportedOperationError(f"{self.tag}: unit serialization not implemented")

    def unit_from_json(self, obj: dict):
        raise UnsupportedOperationError(f"{self.tag}: unit deserialization not implemented")

    def validate_unit(self, unit) -> list[str]:
        """Invariant violations for one unit; empty list when valid."""
        return []


def _cov_se2(scores: np.ndarray) -> np.ndarray:
    # Rough SE^2 of the sample covariance entries (normal-theory scaling).
    n = scores.shape[0]
    c = np.cov(scores, rowvar=False).reshape(scores.shape[1], scores.shape[1])
    d = np.sqrt(np.abs(np.diag(c)))
    return (np.outer(d, d) ** 2 + c ** 2) / max(n - 1, 1)


# ----------------------------------------------------------------------
# dataset-level reductions
# ----------------------------------------------------------------------
def _check_point(model: IncompleteModel, theta: ParamPoint) -> np.ndarray:
    if theta.dim != model.dim:
        raise DataError(f"{model.tag}: parameter dimension mismatch "
                        f"({theta.dim} given, {model.dim} expected)")
    return theta.array


def dataset_loglik_obs(model: IncompleteModel, data: UnitDataset, theta: ParamPoint) -> float:
    """Weighted sum of per-unit observed-data log-likelihoods."""
    values = _check_point(model, theta)
    total = 0.0
    for i, (unit, w) in enumerate(data):
        if w == 0.0:
            continue
        term = model.loglik_obs(unit, values)
        if not math.isfinite(term):
            raise NumericalError(
                f"{model.tag}: non-finite observed log-likelihood at unit {i} "
                f"for theta={theta.values}")
        total += w * term
    return total


def dataset_q(model: IncompleteModel, data: UnitDataset, theta1: ParamPoint,
              theta2: ParamPoint) -> float:
    """Weighted sum of per-unit expected complete-data log-likelihoods."""
    v1 = _check_point(model, theta1)
    v2 = _check_point(model, theta2)
    total = 0.0
    for i, (unit, w) in enumerate(data):
        if w == 0.0:
            continue
        term = model.q_fn(unit, v1, v2)
        if not math.isfinite(term):
            raise NumericalError(f"{model.tag}: non-finite Q at unit {i} "
                                 f"for theta1={theta1.values}, theta2={theta2.values}")
        total += w * term
    return total


def dataset_score_obs(model: IncompleteModel, data: UnitDataset, theta: ParamPoint) -> np.ndarray:
    values = _check_point(model, theta)
    total = np.zeros(model.dim)
    for unit, w in data:
        if w == 0.0:
            continue
        total += w * model.score_obs(unit, values)
    return total


def dataset_info_missing(model: IncompleteModel, data: UnitDataset, theta: ParamPoint,
                         *, rng: np.random.Generator | None = None,
                         draws: int = 4096) -> np.ndarray:
    values = _check_point(model, theta)
    total = np.zeros((model.dim, model.dim))
    for unit, w in data:
        if w == 0.0:
            continue
        total += w * np.asarray(model.info_missing(unit, values, rng=rng, draws=draws))
    return total


@dataclass(frozen=True)
class ScalarView:
    """A model restricted to its scalar interest coordinate.

    Nuisance coordinates are frozen at the values of ``base``; the view maps a
    scalar interest value onto the full parameter vector.  Measures that are
    defined for a univariate parameter of interest operate through this view.
    """

    model: IncompleteModel
    base: ParamPoint
    index: int = field(init=False, default=0)

    def __post_init__(self):
        idx = self.base.interest_indices
        if len(idx) != 1:
            raise UnsupportedOperationError(
                "operation requires a scalar interest parameter; "
                f"got {len(idx)} interest coordinates")
        _check_point(self.model, self.base)
        object.__setattr__(self, "index", idx[0])

    def full(self, t: float) -> np.ndarray:
        vals = np.asarray(self.base.values, dtype=float).copy()
        vals[self.index] = t
        return vals

    def full_point(self, t: float) -> ParamPoint:
        return self.base.replace_values(self.full(t))

    @property
    def value(self) -> float:
        return self.base.values[self.index]

    def bounds(self) -> tuple[float, float]:
        return self.model.bounds()[self.index]

    def loglik_obs(self, data: UnitDataset, t: float) -> float:
        return dataset_loglik_obs(self.model, data, self.full_point(t))

    def q(self, data: UnitDataset, t1: float, t2: float) -> float:
        return dataset_q(self.model, data, self.full_point(t1), self.full_point(t2))

    def score(self, data: UnitDataset, t: float) -> float:
        return float(dataset_score_obs(self.model, data, self.full_point(t))[self.index])

    def unit_score(self, unit, t: float) -> float:
        return float(self.model.score_obs(unit, self.full(t))[self.index])

    def info_missing(self, data: UnitDataset, t: float, *, rng=None, draws: int = 4096) -> float:
        mat = dataset_info_missing(self.model, data, self.full_point(t), rng=rng, draws=draws)
        return float(mat[self.index, self.index])

"""Likelihood-based relative-information measures for large samples.

Everything here is built from two evaluations of the observed-data
log-likelihood and a handful of evaluations of the expected complete-data
log-likelihood, so the measures come almost for free once the EM machinery
has produced the unconstrained and null-constrained fits.

Two global measures are reported.  The one computed under the fitted
alternative divides the observed log-likelihood-ratio by its expected
complete-data counterpart and is anti-conservative-calibrated: a value of
0.5 means the complete data would be expected to double the evidence.  The
one computed under the null divides the best completed-at-the-null evidence
by the observed evidence and measures how conservative imputing at the null
would be.  Their geometric mean needs no observed-data likelihood at all.
All logs are natural; the measures are ratios, so the base cancels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .em_engine import FitConfig, maximize_q
from .model_api import (
    DataError,
    DegenerateTestError,
    IncompleteModel,
    NumericalError,
    ParamPoint,
    ScalarView,
    UnitDataset,
    dataset_loglik_obs,
    dataset_q,
)


@dataclass(frozen=True)
class RiResult:
    value: float
    numerator: float
    denominator: float
    flags: tuple[str, ...] = ()

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class PerUnitRi:
    lod: float
    lod_complete: float
    ri1: float | None


@dataclass(frozen=True)
class LargeSampleReport:
    ri1: float
    ri0: float
    ri_half: float
    lod_ob: float
    expected_lod_co: float
    q_gain_at_null: float
    per_unit: tuple[PerUnitRi, ...]
    boundary_flags: tuple[str, ...]
    flags: tuple[str, ...] = ()


def _tol(ll: float) -> float:
    return 1e-9 * max(1.0, abs(ll))


def _ri_e_fallback(model, data, theta_ob, flags, *, rng=None) -> RiResult:
    from .diagnostics import compute_ri_e  # local import avoids a cycle

    rie = compute_ri_e(model, data, theta_ob, rng=rng)
    return RiResult(rie.value, math.nan, math.nan, tuple(flags) + ("ri_e_limit",))


def compute_ri1(model: IncompleteModel, data: UnitDataset, theta_ob: ParamPoint,
                theta_0: ParamPoint, *, rng=None) -> RiResult:
    """Observed log-likelihood ratio over its expected complete-data value.

    Always in (0, 1]; equals one exactly when the missing data cannot
    separate the two parameter values.  When the fitted and null points
    coincide the measure degenerates and the estimation-information limit is
    returned instead, flagged.
    """
    ll_ob = dataset_loglik_obs(model, data, theta_ob)
    ll_0 = dataset_loglik_obs(model, data, theta_0)
    lod = ll_ob - ll_0
    tol = _tol(ll_ob)
    if lod < -tol:
        raise NumericalError("theta_ob is not the observed-data maximizer "
                             f"(log-likelihood ratio {lod:.3e} < 0)")
    den = dataset_q(model, data, theta_ob, theta_ob) - dataset_q(model, data, theta_0, theta_ob)
    if den < lod - tol:
        raise NumericalError("expected complete-data evidence fell below the observed "
                             "evidence; the model's Q function is inconsistent")
    if lod <= tol or den <= tol:
        return _ri_e_fallback(model, data, theta_ob, ["degenerate_lod"], rng=rng)
    value = min(lod / den, 1.0)
    return RiResult(value, lod, den)


def compute_ri0(model: IncompleteModel, data: UnitDataset, theta_ob: ParamPoint,
                theta_0: ParamPoint, *, config: FitConfig | None = None,
                rng=None) -> RiResult:
    """Best completed-at-the-null evidence over the observed evidence.

    In [0, 1].  The numerator maximizes the expected complete-data
    log-likelihood gain with missing data imputed under the null, which is a
    single E-step plus M-step.  Degenerate when the observed evidence
    vanishes; the estimation-information limit is returned then, flagged.
    """
    ll_ob = dataset_loglik_obs(model, data, theta_ob)
    ll_0 = dataset_loglik_obs(model, data, theta_0)
    lod = ll_ob - ll_0
    tol = _tol(ll_ob)
    if lod < -tol:
        raise NumericalError("theta_ob is not the observed-data maximizer")
    qmax = maximize_q(model, data, theta_0, config)
    num = qmax.loglik - dataset_q(model, data, theta_0, theta_0)
    if num < -tol:
        raise NumericalError("Q maximization fell below its anchor value")
    num = max(num, 0.0)
    if num > lod + tol:
        raise NumericalError("null-imputed completed evidence exceeded the observed "
                             "evidence; the model's Q function is inconsistent")
    if lod <= tol:
        return _ri_e_fallback(model, data, theta_ob, ["degenerate_lod"], rng=rng)
    flags = tuple(qmax.flags)
    return RiResult(min(num / lod, 1.0), num, lod, flags)


def compute_ri_half(model: IncompleteModel, data: UnitDataset, theta_ob: ParamPoint,
                    theta_0: ParamPoint, *, config: FitConfig | None = None) -> RiResult:
    """Geometric-mean compromise computed from Q evaluations alone.

    Square root of the null-imputed Q gain over the expected complete-data
    log-likelihood ratio; never touches the observed-data log-likelihood.
    """
    qmax = maximize_q(model, data, theta_0, config)
    num = qmax.loglik - dataset_q(model, data, theta_0, theta_0)
    den = dataset_q(model, data, theta_ob, theta_ob) - dataset_q(model, data, theta_0, theta_ob)
    if den <= _tol(den):
        raise DegenerateTestError("expected complete-data evidence is zero; "
                                  "the test is degenerate")
    num = max(num, 0.0)
    return RiResult(math.sqrt(num / den), num, den, tuple(qmax.flags))


@dataclass(frozen=True)
class CurvePoint:
    theta: ParamPoint
    value: float | None
    note: str = ""


def ri_curve(model: IncompleteModel, data: UnitDataset, theta_ob: ParamPoint,
             grid: Sequence[ParamPoint]) -> list[CurvePoint]:
    """Relative-information function evaluated on a parameter grid.

    Each value compares the evidence for the fitted point against the grid
    point.  Grid points may approach (but not equal) the fitted point; zero
    denominators are omitted with a note.
    """
    ll_ob = dataset_loglik_obs(model, data, theta_ob)
    q_ob = dataset_q(model, data, theta_ob, theta_ob)
    tol = _tol(ll_ob)
    out: list[CurvePoint] = []
    for pt in grid:
        if max(abs(a - b) for a, b in zip(pt.values, theta_ob.values)) <= 1e-12:
            raise DataError("grid must exclude the fitted point itself")
        den = q_ob - dataset_q(model, data, pt, theta_ob)
        if den <= tol:
            out.append(CurvePoint(pt, None, "zero_denominator"))
            continue
        num = ll_ob - dataset_loglik_obs(model, data, pt)
        out.append(CurvePoint(pt, min(max(num, 0.0) / den, 1.0), ""))
    return out


def combine_harmonic(lods: Sequence[float], ris: Sequence[float]) -> RiResult:
    """Combine per-unit measures as a harmonic mean weighted by evidence.

    Negative per-unit evidence is legal (flagged), since unit-level
    log-likelihood ratios against a globally fitted point need not be
    positive.
    """
    lods = [float(x) for x in lods]
    ris = [float(x) for x in ris]
    if len(lods) != len(ris) or not lods:
        raise DataError("need matching nonempty lod and ri lists")
    if any(not 0.0 < r <= 1.0 for r in ris):
        raise DataError("per-unit values must lie in (0, 1]")
    flags = ("negative_lod",) if any(l < 0 for l in lods) else ()
    tot = sum(lods)
    if tot == 0:
        raise DegenerateTestError("total evidence is zero")
    den = sum(l / r for l, r in zip(lods, ris))
    if den == 0:
        raise DegenerateTestError("zero denominator in harmonic combination")
    return RiResult(tot / den, tot, den, flags)


def combine_arithmetic(lod_completes: Sequence[float], ris: Sequence[float]) -> RiResult:
    """Combine per-unit measures weighted by expected complete-data evidence."""
    lcs = [float(x) for x in lod_completes]
    ris = [float(x) for x in ris]
    if len(lcs) != len(ris) or not lcs:
        raise DataError("need matching nonempty weight and ri lists")
    if any(not 0.0 < r <= 1.0 for r in ris):
        raise DataError("per-unit values must lie in (0, 1]")
    flags = ("negative_lod",) if any(l < 0 for l in lcs) else ()
    tot = sum(lcs)
    if tot == 0:
        raise DegenerateTestError("total weight is zero")
    return RiResult(sum(l * r for l, r in zip(lcs, ris)) / tot, math.nan, tot, flags)


@dataclass(frozen=True)
class CompletedStatRatio:
    r_from_alt: float
    r_from_null: float
    statistics: object
    flags: tuple[str, ...] = ()


def completed_stat_ratio(model: IncompleteModel, data: UnitDataset,
                         theta_ob: ParamPoint, theta_0: ParamPoint) -> CompletedStatRatio:
    """Relative information from imputed-as-real test statistics.

    Only models with a native scalar standardized statistic under mean
    imputation support this; others raise an unsupported-operation error.
    """
    res = model.completed_statistics(data, theta_ob, theta_0)
    return CompletedStatRatio(res["r_from_alt"], res["r_from_null"],
                              res.get("statistics"), tuple(res.get("flags", ())))


def per_unit_terms(model: IncompleteModel, data: UnitDataset, theta_ob: ParamPoint,
                   theta_0: ParamPoint) -> list[PerUnitRi]:
    """Per-unit evidence, expected complete-data evidence, and their ratio.

    Per-unit ratios use the globally fitted point, not per-unit fits.
    """
    v_ob, v_0 = theta_ob.array, theta_0.array
    out = []
    for unit, w in data:
        lod = w * (model.loglik_obs(unit, v_ob) - model.loglik_obs(unit, v_0))
        lod_c = w * (model.q_fn(unit, v_ob, v_ob) - model.q_fn(unit, v_0, v_ob))
        ri = lod / lod_c if abs(lod_c) > 1e-12 else None
        out.append(PerUnitRi(lod, lod_c, ri))
    return out


def large_sample_report(model: IncompleteModel, data: UnitDataset, theta_ob: ParamPoint,
                        theta_0: ParamPoint, *, config: FitConfig | None = None,
                        boundary_flags: Sequence[str] = (), rng=None) -> LargeSampleReport:
    """All large-sample measures plus per-unit terms in one pass."""
    r1 = compute_ri1(model, data, theta_ob, theta_0, rng=rng)
    r0 = compute_ri0(model, data, theta_ob, theta_0, config=config, rng=rng)
    rh = compute_ri_half(model, data, theta_ob, theta_0, config=config)
    flags = tuple(sorted(set(r1.flags) | set(r0.flags) | set(rh.flags)))
    return LargeSampleReport(
        ri1=r1.value, ri0=r0.value, ri_half=rh.value,
        lod_ob=r1.numerator if math.isfinite(r1.numerator) else 0.0,
        expected_lod_co=r1.denominator, q_gain_at_null=r0.numerator,
        per_unit=tuple(per_unit_terms(model, data, theta_ob, theta_0)),
        boundary_flags=tuple(boundary_flags), flags=flags)

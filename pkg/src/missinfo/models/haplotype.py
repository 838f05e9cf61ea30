"""Two-SNP haplotype case-control model with missing genotypes and phase.

Chromosomes carry one of four haplotypes indexed by the allele pair
(a1, a2) with alleles coded 1/2 at each SNP.  Under the multiplicative risk
model, case chromosomes are an exponentially reweighted version of the
control haplotype distribution, and a pairwise test compares the risk of one
haplotype against a reference haplotype with the other two risks free.

Observed data per subject are the two unordered genotypes (either possibly
missing); phase is unobserved, so doubly heterozygous subjects are
compatible with two haplotype resolutions.  The complete data are the
subject's ordered haplotype pair.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..model_api import (
    INTEREST,
    NUISANCE,
    DataError,
    IncompleteModel,
    ParamPoint,
    UnitDataset,
)

HAPLOTYPES: tuple[tuple[int, int], ...] = ((1, 1), (1, 2), (2, 1), (2, 2))
_HAP_INDEX = {h: i for i, h in enumerate(HAPLOTYPES)}
_ORDERED_PAIRS: tuple[tuple[int, int], ...] = tuple(itertools.product(range(4), range(4)))


def _norm_geno(g):
    if g is None:
        return None
    a, b = int(g[0]), int(g[1])
    if a not in (1, 2) or b not in (1, 2):
        raise DataError("alleles must be coded 1 or 2")
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class HaplotypeCCUnit:
    """Unordered genotypes at the two SNPs (None = missing) plus the label."""

    snp1: tuple[int, int] | None
    snp2: tuple[int, int] | None
    is_case: bool

    def __post_init__(self):
        object.__setattr__(self, "snp1", _norm_geno(self.snp1))
        object.__setattr__(self, "snp2", _norm_geno(self.snp2))
        object.__setattr__(self, "is_case", bool(self.is_case))

    @property
    def phase_ambiguous(self) -> bool:
        return self.snp1 == (1, 2) and self.snp2 == (1, 2)


@dataclass(frozen=True)
class CompletedHaplotypes:
    h1: int
    h2: int
    is_case: bool


_PAIR_COUNTS = np.zeros((16, 4))
for _i, (_h1, _h2) in enumerate(_ORDERED_PAIRS):
    _PAIR_COUNTS[_i, _h1] += 1.0
    _PAIR_COUNTS[_i, _h2] += 1.0


@lru_cache(maxsize=None)
def _compat_mask(snp1, snp2) -> np.ndarray:
    out = []
    for i1, i2 in _ORDERED_PAIRS:
        ha, hb = HAPLOTYPES[i1], HAPLOTYPES[i2]
        g1 = tuple(sorted((ha[0], hb[0])))
        g2 = tuple(sorted((ha[1], hb[1])))
        out.append((snp1 is None or g1 == snp1) and (snp2 is None or g2 == snp2))
    return np.array(out, dtype=float)


def compatible_pairs(unit: HaplotypeCCUnit) -> tuple[tuple[int, int], ...]:
    mask = _compat_mask(unit.snp1, unit.snp2)
    return tuple(p for p, ok in zip(_ORDERED_PAIRS, mask) if ok)


class HaplotypePairTestModel(IncompleteModel):
    """Pairwise haplotype risk comparison with the other two risks free.

    Parameters: the log relative risk of the numerator haplotype against the
    reference haplotype (interest), the two free log risks, and three control
    log frequencies relative to the reference haplotype.
    """

    tag = "haplotype_cc"
    param_roles = (INTEREST, NUISANCE, NUISANCE, NUISANCE, NUISANCE, NUISANCE)

    def __init__(self, num_haplotype, ref_haplotype):
        num = _norm_key(num_haplotype)
        ref = _norm_key(ref_haplotype)
        if num == ref:
            raise DataError("numerator and reference haplotypes must differ")
        self.h_num = _HAP_INDEX[num]
        self.h_ref = _HAP_INDEX[ref]
        self.h_free = tuple(h for h in range(4) if h not in (self.h_num, self.h_ref))
        fa, fb = self.h_free
        self.param_names = (
            "log_rr",
            f"log_risk_{_hap_name(fa)}", f"log_risk_{_hap_name(fb)}",
            f"log_freq_{_hap_name(self.h_num)}",
            f"log_freq_{_hap_name(fa)}", f"log_freq_{_hap_name(fb)}",
        )
        self._pair_cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}

    def bounds(self):
        b = 30.0  # generous box in log space keeps frequencies representable
        return tuple((-b, b) for _ in range(6))

    def default_start(self, data: UnitDataset) -> ParamPoint:
        return self.point([0.0] * 6)

    # ---- parameter mapping ------------------------------------------
    def group_probs(self, values) -> tuple[np.ndarray, np.ndarray]:
        """(case haplotype probabilities, control haplotype probabilities)."""
        lam = float(values[0])
        rho = np.zeros(4)
        rho[self.h_num] = lam
        rho[self.h_free[0]] = float(values[1])
        rho[self.h_free[1]] = float(values[2])
        g = np.zeros(4)
        g[self.h_num] = float(values[3])
        g[self.h_free[0]] = float(values[4])
        g[self.h_free[1]] = float(values[5])
        ctrl = np.exp(g - g.max())
        ctrl /= ctrl.sum()
        case = np.exp(g + rho - (g + rho).max())
        case /= case.sum()
        return case, ctrl

    def values_from_probs(self, case: np.ndarray, ctrl: np.ndarray) -> np.ndarray:
        if np.any(case <= 0) or np.any(ctrl <= 0):
            raise DataError("interior haplotype frequencies required")
        g = np.log(ctrl / ctrl[self.h_ref])
        rho = np.log(case / ctrl) - math.log(case[self.h_ref] / ctrl[self.h_ref])
        return np.array([rho[self.h_num], rho[self.h_free[0]], rho[self.h_free[1]],
                         g[self.h_num], g[self.h_free[0]], g[self.h_free[1]]])

    def _pair_probs(self, probs: np.ndarray) -> np.ndarray:
        return np.outer(probs, probs).ravel()

    def _pair_probs_cached(self, values, is_case: bool) -> np.ndarray:
        # Fits evaluate many units at one parameter point; memoize the
        # 16-vector of ordered-pair probabilities per group.
        key = np.asarray(values, dtype=float).tobytes()
        hit = self._pair_cache.get(key)
        if hit is None:
            case, ctrl = self.group_probs(values)
            hit = (self._pair_probs(case), self._pair_probs(ctrl))
            if len(self._pair_cache) > 64:
                self._pair_cache.clear()
            self._pair_cache[key] = hit
        return hit[0] if is_case else hit[1]

    # ---- required capabilities -------------------------------------
    def loglik_obs(self, unit: HaplotypeCCUnit, values) -> float:
        mask = _compat_mask(unit.snp1, unit.snp2)
        pair = self._pair_probs_cached(values, unit.is_case)
        tot = float(pair @ mask)
        return math.log(tot) if tot > 0 else -math.inf

    def _posterior_pair_counts(self, unit, values) -> np.ndarray:
        """Expected ordered haplotype counts (length 4) given the unit."""
        mask = _compat_mask(unit.snp1, unit.snp2)
        pair = self._pair_probs_cached(values, unit.is_case)
        w = mask * pair
        w /= w.sum()
        return w @ _PAIR_COUNTS

    def q_fn(self, unit, values1, values2) -> float:
        counts = self._posterior_pair_counts(unit, values2)
        case, ctrl = self.group_probs(values1)
        logp = np.log(case if unit.is_case else ctrl)
        return float(counts @ logp)

    def sample_missing(self, unit, values, rng) -> CompletedHaplotypes:
        mask = _compat_mask(unit.snp1, unit.snp2)
        pair = self._pair_probs_cached(values, unit.is_case)
        w = mask * pair
        w = w / w.sum()
        idx = int(rng.choice(len(w), p=w))
        i1, i2 = _ORDERED_PAIRS[idx]
        return CompletedHaplotypes(i1, i2, unit.is_case)

    def loglik_comp(self, completed: CompletedHaplotypes, values) -> float:
        case, ctrl = self.group_probs(values)
        p = case if completed.is_case else ctrl
        return float(np.log(p[completed.h1]) + np.log(p[completed.h2]))

    # ---- optional capabilities --------------------------------------
    def argmax_q(self, data: UnitDataset, anchor, fixed=None):
        fixed = fixed or {}
        if any(k != 0 for k in fixed):
            return None
        n_case = np.zeros(4)
        n_ctrl = np.zeros(4)
        for unit, w in data:
            counts = self._posterior_pair_counts(unit, anchor)
            if unit.is_case:
                n_case += w * counts
            else:
                n_ctrl += w * counts
        if n_case.sum() == 0 or n_ctrl.sum() == 0:
            return None
        if 0 not in fixed:
            case = n_case / n_case.sum()
            ctrl = n_ctrl / n_ctrl.sum()
            if np.any(case <= 0) or np.any(ctrl <= 0):
                return None
            return self.values_from_probs(case, ctrl)
        if float(fixed[0]) != 0.0:
            return None
        # Equal-risk null for the tested pair: both groups share the split
        # between the two tested haplotypes; everything else is free.
        case = n_case.copy()
        ctrl = n_ctrl.copy()
        pair_idx = (self.h_num, self.h_ref)
        nc_pair = case[list(pair_idx)].sum()
        mc_pair = ctrl[list(pair_idx)].sum()
        num_tot = case[self.h_num] + ctrl[self.h_num]
        s = num_tot / (nc_pair + mc_pair)
        case_out = case / case.sum()
        ctrl_out = ctrl / ctrl.sum()
        case_out[self.h_num] = s * nc_pair / case.sum()
        case_out[self.h_ref] = (1 - s) * nc_pair / case.sum()
        ctrl_out[self.h_num] = s * mc_pair / ctrl.sum()
        ctrl_out[self.h_ref] = (1 - s) * mc_pair / ctrl.sum()
        if np.any(case_out <= 0) or np.any(ctrl_out <= 0):
            return None
        return self.values_from_probs(case_out, ctrl_out)

    # ---- serialization / validation ---------------------------------
    def unit_to_json(self, unit) -> dict:
        return {"snp1": list(unit.snp1) if unit.snp1 else None,
                "snp2": list(unit.snp2) if unit.snp2 else None,
                "is_case": unit.is_case}

    def unit_from_json(self, obj: dict) -> HaplotypeCCUnit:
        try:
            s1 = tuple(obj["snp1"]) if obj.get("snp1") is not None else None
            s2 = tuple(obj["snp2"]) if obj.get("snp2") is not None else None
            return HaplotypeCCUnit(s1, s2, bool(obj["is_case"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"bad haplotype_cc unit: {exc}") from exc

    def validate_unit(self, unit) -> list[str]:
        if not isinstance(unit, HaplotypeCCUnit):
            return [f"expected HaplotypeCCUnit, got {type(unit).__name__}"]
        return []


def _norm_key(h) -> tuple[int, int]:
    key = tuple(int(a) for a in h)
    if key not in _HAP_INDEX:
        raise DataError(f"unknown haplotype {h!r}; use allele pairs like (1, 2)")
    return key


def _hap_name(idx: int) -> str:
    a, b = HAPLOTYPES[idx]
    return f"{a}{b}"


# ----------------------------------------------------------------------
# plain frequency estimation (no risk parameters)
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class HaplotypeEMResult:
    grouping: str
    frequencies: dict
    expected_counts: tuple
    iterations: int
    converged: bool
    flags: tuple[str, ...]


def _em_one_group(units, weights, start, tol, max_iter):
    freqs = np.asarray(start, dtype=float)
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        counts = np.zeros(4)
        for u, w in zip(units, weights):
            mask = _compat_mask(u.snp1, u.snp2)
            pair = np.outer(freqs, freqs).ravel()
            prob = mask * pair
            tot = prob.sum()
            if tot <= 0:
                raise DataError("unit incompatible with positive frequencies")
            prob /= tot
            for wgt, (i1, i2) in zip(prob, _ORDERED_PAIRS):
                counts[i1] += w * wgt
                counts[i2] += w * wgt
        new = counts / counts.sum()
        if np.max(np.abs(new - freqs)) < tol:
            freqs = new
            converged = True
            break
        freqs = new
    return freqs, it, converged


def _expected_counts(units, freq_by_group):
    out = []
    for u in units:
        freqs = freq_by_group["case" if u.is_case else "control"]
        mask = _compat_mask(u.snp1, u.snp2)
        pair = np.outer(freqs, freqs).ravel()
        prob = mask * pair
        prob /= prob.sum()
        counts = np.zeros(4)
        for wgt, (i1, i2) in zip(prob, _ORDERED_PAIRS):
            counts[i1] += wgt
            counts[i2] += wgt
        out.append(counts)
    return tuple(out)


def haplotype_em(units, grouping: str = "joint", *, weights=None,
                 start=None, tol: float = 1e-10, max_iter: int = 2000) -> HaplotypeEMResult:
    """Haplotype frequency estimation by EM under random mating.

    ``joint`` pools cases and controls into one group (the equal-frequency
    null); ``separate`` estimates each group on its own.  Expected ordered
    haplotype counts per subject are tabulated at the fitted frequencies.
    """
    if grouping not in ("joint", "separate"):
        raise DataError("grouping must be 'joint' or 'separate'")
    units = list(units)
    if not units:
        raise DataError("no subjects")
    if weights is None:
        weights = [1.0] * len(units)
    start = np.full(4, 0.25) if start is None else np.asarray(start, dtype=float)
    flags = []
    informative = [u for u in units if not (u.phase_ambiguous and u.snp1 and u.snp2)]
    if not informative:
        flags.append("non_identifiable")

    if grouping == "joint":
        freqs, it, conv = _em_one_group(units, weights, start, tol, max_iter)
        freq_by_group = {"case": freqs, "control": freqs, "joint": freqs}
    else:
        it = 0
        conv = True
        freq_by_group = {}
        for label, flag in (("case", True), ("control", False)):
            sel = [(u, w) for u, w in zip(units, weights) if u.is_case == flag]
            if not sel:
                raise DataError(f"no {label} subjects for separate grouping")
            f, i, c = _em_one_group([u for u, _ in sel], [w for _, w in sel],
                                    start, tol, max_iter)
            freq_by_group[label] = f
            it = max(it, i)
            conv = conv and c
    return HaplotypeEMResult(grouping, freq_by_group,
                             _expected_counts(units, freq_by_group),
                             it, conv, tuple(flags))


# ----------------------------------------------------------------------
# simulation helpers
# ----------------------------------------------------------------------
def correlated_haplotype_freqs(p1: float, p2: float, corr: float) -> np.ndarray:
    """Haplotype frequencies with given allele-1 frequencies and correlation."""
    if not (0 < p1 < 1 and 0 < p2 < 1):
        raise DataError("allele frequencies must be interior")
    f11 = p1 * p2 + corr * math.sqrt(p1 * (1 - p1) * p2 * (1 - p2))
    f = np.array([f11, p1 - f11, p2 - f11, 1 - p1 - p2 + f11])
    if np.any(f <= 0):
        raise DataError("correlation incompatible with the allele frequencies")
    return f


def enrich_risk(freqs: np.ndarray, hap, relative_risk: float) -> np.ndarray:
    """Case haplotype frequencies under a multiplicative risk on one haplotype."""
    out = np.asarray(freqs, dtype=float).copy()
    out[_HAP_INDEX[_norm_key(hap)]] *= relative_risk
    return out / out.sum()


def simulate_two_snp_case_control(rng, n_cases: int, n_controls: int,
                                  control_freqs, case_freqs,
                                  miss_rate: float = 0.035) -> list[HaplotypeCCUnit]:
    """Draw subjects, mask each SNP genotype independently at ``miss_rate``."""
    units = []
    for n, freqs, is_case in ((n_cases, case_freqs, True),
                              (n_controls, control_freqs, False)):
        haps = rng.choice(4, size=(n, 2), p=np.asarray(freqs))
        for h1, h2 in haps:
            a, b = HAPLOTYPES[h1], HAPLOTYPES[h2]
            g1 = tuple(sorted((a[0], b[0])))
            g2 = tuple(sorted((a[1], b[1])))
            s1 = None if rng.random() < miss_rate else g1
            s2 = None if rng.random() < miss_rate else g2
            units.append(HaplotypeCCUnit(s1, s2, is_case))
    return units


def dedupe_units(units) -> UnitDataset:
    """Collapse identical subjects into one unit with a frequency weight."""
    counts: dict[HaplotypeCCUnit, int] = {}
    for u in units:
        counts[u] = counts.get(u, 0) + 1
    keys = sorted(counts, key=lambda u: (u.is_case, str(u.snp1), str(u.snp2)))
    return UnitDataset.of(keys, [float(counts[k]) for k in keys])


def pairwise_test_ri1(units, num_haplotype, ref_haplotype, *, config=None) -> float:
    """Relative information of the pairwise haplotype test on these subjects.

    Fits the unconstrained and equal-risk models and returns the ratio of
    observed to expected complete-data evidence for the comparison of the two
    named haplotypes.  Subject lists are deduplicated into weighted units
    first, so large simulated cohorts stay cheap.
    """
    from ..em_engine import fit_mle, fit_null_mle, null_point
    from ..large_sample import compute_ri1
    from ..model_api import HypothesisSpec

    model = HaplotypePairTestModel(num_haplotype, ref_haplotype)
    data = units if isinstance(units, UnitDataset) else dedupe_units(units)
    fit = fit_mle(model, data, config=config)
    hyp = HypothesisSpec((0.0,))
    nfit = fit_null_mle(model, data, hyp, config=config)
    return compute_ri1(model, data, fit.theta, null_point(model, hyp, nfit)).value

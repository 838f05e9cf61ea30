"""Small-sample Bayesian relative-information measures.

The observed-data evidence surface is compared against its complete-data
counterpart through posterior variability: the ratio of posterior variances
of the likelihood ratio, the analogous ratio for the log-likelihood ratio,
their common shrinking-prior limit built from the score and the missing
information, and a per-unit summed version of that limit which is robust to
score cancellation across units.

Integrals over the scalar interest parameter use Gauss-Legendre quadrature
on the prior support; only expectations over the missing data may need
Monte Carlo, and the built-in models supply exact conditional moments so
their measures carry no Monte Carlo error at all.  All measures fix the
nuisance coordinates of the null point (passed in by the caller, normally at
their null maximum-likelihood values).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from ._seeding import derive_rng
from .model_api import (
    DataError,
    DegenerateTestError,
    HeavyTailError,
    IncompleteModel,
    MCConfig,
    ParamPoint,
    ScalarView,
    UnitDataset,
)

ESS_THRESHOLD = 50.0
QUAD_NODES = 201


# ----------------------------------------------------------------------
# priors
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class PriorSpec:
    """A proper prior for the scalar interest parameter on a bounded interval.

    Either a uniform interval or a tabulated density interpreted as
    piecewise linear between its nodes.  A single-node tabulation degenerates
    to a point mass, which only the Bayes-factor operation accepts.
    """

    kind: str
    lo: float
    hi: float
    nodes: tuple[float, ...] | None = None
    densities: tuple[float, ...] | None = None
    normalization: float = 1.0

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "PriorSpec":
        lo, hi = float(lo), float(hi)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise DataError("uniform prior needs finite lo < hi")
        return cls("uniform_interval", lo, hi)

    @classmethod
    def tabulated(cls, nodes: Sequence[float], densities: Sequence[float]) -> "PriorSpec":
        nodes = tuple(float(x) for x in nodes)
        dens = tuple(float(d) for d in densities)
        if len(nodes) != len(dens) or not nodes:
            raise DataError("tabulated prior needs matching nonempty nodes/densities")
        if len(nodes) == 1:
            return cls("tabulated", nodes[0], nodes[0], nodes, (1.0,), 1.0)
        if any(b <= a for a, b in zip(nodes, nodes[1:])):
            raise DataError("tabulated nodes must be strictly increasing")
        if any(d < 0 for d in dens):
            raise DataError("densities must be nonnegative")
        total = float(np.trapezoid(dens, nodes))
        if abs(total - 1.0) > 1e-10:
            raise DataError(f"prior density integrates to {total:.12f}, not 1; "
                            "normalize the tabulation first")
        return cls("tabulated", nodes[0], nodes[-1], nodes, dens, total)

    @classmethod
    def point_mass(cls, at: float) -> "PriorSpec":
        return cls.tabulated([at], [1.0])

    @property
    def is_point_mass(self) -> bool:
        return self.kind == "tabulated" and self.nodes is not None and len(self.nodes) == 1

    def log_density(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "uniform_interval":
            inside = (t >= self.lo) & (t <= self.hi)
            return np.where(inside, -math.log(self.hi - self.lo), -math.inf)
        if self.is_point_mass:
            raise DegenerateTestError("point-mass prior has no density")
        dens = np.interp(t, self.nodes, self.densities, left=0.0, right=0.0)
        with np.errstate(divide="ignore"):
            return np.where(dens > 0, np.log(np.where(dens > 0, dens, 1.0)), -math.inf)

    def quadrature(self, n: int = QUAD_NODES) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and log prior measure (weight times density), self-normalized."""
        if self.is_point_mass:
            return np.array([self.lo]), np.array([0.0])
        if self.kind == "uniform_interval":
            x, w = np.polynomial.legendre.leggauss(n)
            t = 0.5 * (self.hi - self.lo) * x + 0.5 * (self.hi + self.lo)
            logm = np.log(w / 2.0)
        else:
            segs = len(self.nodes) - 1
            per = max(8, int(math.ceil(n / segs)))
            x, w = np.polynomial.legendre.leggauss(per)
            ts, ms = [], []
            for a, b in zip(self.nodes, self.nodes[1:]):
                t = 0.5 * (b - a) * x + 0.5 * (a + b)
                ts.append(t)
                ms.append(np.log(w * 0.5 * (b - a)) + self.log_density(t))
            t = np.concatenate(ts)
            logm = np.concatenate(ms)
        finite = logm > -math.inf
        t, logm = t[finite], logm[finite]
        return t, logm - logsumexp(logm)

    def to_json(self) -> dict:
        if self.kind == "uniform_interval":
            return {"kind": "uniform_interval", "lo": self.lo, "hi": self.hi}
        return {"kind": "tabulated", "nodes": list(self.nodes),
                "densities": list(self.densities)}

    @classmethod
    def from_json(cls, obj: dict) -> "PriorSpec":
        kind = obj.get("kind")
        if kind == "uniform_interval":
            return cls.uniform(obj["lo"], obj["hi"])
        if kind == "tabulated":
            return cls.tabulated(obj["nodes"], obj["densities"])
        raise DataError(f"unknown prior kind {kind!r}")


# ----------------------------------------------------------------------
# results
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class BayesValue:
    value: float
    mc_se: float
    flags: tuple[str, ...] = ()

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class Bi0Result:
    value: float
    score: float
    info_missing: float
    flags: tuple[str, ...] = ()

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class BayesFactorResult:
    bf_quadrature: float
    bf_mc_obs: float
    bf_mc_obs_se: float
    bf_mc_comp: float
    bf_mc_comp_se: float
    var_lr_ob: float
    var_lr_co: float
    var_bf_co: float
    draws: int
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class ShrinkRow:
    delta: float
    bi1: float
    bi2: float
    gap_bi1: float
    gap_bi2: float
    se_bi1: float
    se_bi2: float


@dataclass(frozen=True)
class ShrinkReport:
    bi0: float
    rows: tuple[ShrinkRow, ...]
    decay_ratios_bi1: tuple[float, ...]
    decay_ratios_bi2: tuple[float, ...]
    flags: tuple[str, ...] = ()


# ----------------------------------------------------------------------
# shared context
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class _Ctx:
    model: IncompleteModel
    data: UnitDataset
    view: ScalarView
    t0: float
    nodes: np.ndarray
    logm: np.ndarray      # log prior measure, sums to 1 in exp space
    beta: np.ndarray      # loglik at node minus loglik at null
    post: np.ndarray      # posterior weights over nodes


def _context(model, data, theta_0: ParamPoint, prior: PriorSpec,
             n_nodes: int = QUAD_NODES) -> _Ctx:
    view = ScalarView(model, theta_0)
    if prior.is_point_mass:
        raise DegenerateTestError("posterior-variability measures need a "
                                  "non-degenerate prior")
    nodes, logm = prior.quadrature(n_nodes)
    for t in (prior.lo, prior.hi):
        if not model.admissible(view.full(t)):
            raise DataError("prior support leaves the admissible parameter region")
    t0 = view.value
    ll0 = view.loglik_obs(data, t0)
    beta = np.array([view.loglik_obs(data, t) - ll0 for t in nodes])
    logpost = logm + beta
    post = np.exp(logpost - logsumexp(logpost))
    return _Ctx(model, data, view, t0, nodes, logm, beta, post)


def _guard_finite(values: np.ndarray, what: str) -> None:
    """Ratio-scale moments must be representable; otherwise the measure is
    declared heavy-tailed (infinite or astronomically dominated variance)."""
    if not np.all(np.isfinite(values)):
        raise HeavyTailError(
            f"{what}: a likelihood-ratio moment is infinite or overflows; "
            "the ratio-scale measure does not exist here, use the log-scale one")


def _guard_heavy_tail(post: np.ndarray, values: np.ndarray, draws: int,
                      what: str) -> None:
    """Refuse ratio moments dominated by vanishingly unlikely parameters.

    ``values`` is a nonnegative integrand against the posterior ``post``.
    A posterior sample of ``draws`` draws would estimate its mean with
    effective size draws * (E[v])^2 / E[v^2]; far below the threshold the
    moment is driven by parameter values the data all but rule out, which is
    the classic failure mode of ratio-scale posterior variances.
    """
    _guard_finite(values, what)
    m1 = float(post @ values)
    m2 = float(post @ values ** 2)
    if m1 <= 0.0 or m2 <= 0.0:
        return
    ess = draws * m1 * m1 / m2
    if ess < ESS_THRESHOLD:
        raise HeavyTailError(
            f"{what}: moment dominated by near-zero-probability parameter values "
            f"(importance-style effective size {ess:.2g} < {ESS_THRESHOLD:.0f} "
            f"at {draws} draws); use the log-scale measure")


# ----------------------------------------------------------------------
# per-unit conditional moments (exact hook or Monte Carlo fallback)
# ----------------------------------------------------------------------
def _log_elr_unit(model, unit, num_v, den_v, cond_v, k, rng, draws) -> tuple[float, float]:
    exact = model.log_expected_lr_comp(unit, num_v, den_v, cond_v, k)
    if exact is not None:
        return float(exact), 0.0
    vals = np.empty(draws)
    for r in range(draws):
        comp = model.sample_missing(unit, cond_v, rng)
        vals[r] = k * (model.loglik_comp(comp, num_v) - model.loglik_comp(comp, den_v))
    shift = vals.max()
    w = np.exp(vals - shift)
    mean = w.mean()
    # importance-style weights over the missing data; refuse when dominated
    # by a handful of draws
    ess = draws * mean * mean / float((w ** 2).mean())
    if ess < ESS_THRESHOLD:
        raise HeavyTailError(
            "conditional likelihood-ratio moment is heavy-tailed (effective "
            f"sample size {ess:.1f} < {ESS_THRESHOLD:.0f} of {draws} draws); "
            "the estimate would be unstable, use the log-scale measure")
    rel_se = float(w.std(ddof=1) / (mean * math.sqrt(draws)))
    return float(shift + math.log(mean)), rel_se


def _lod_moments_unit(model, unit, a_v, b_v, cond_v, rng, draws) -> tuple[float, float, float]:
    exact = model.lod_comp_moments(unit, a_v, b_v, cond_v)
    if exact is not None:
        return float(exact[0]), float(exact[1]), 0.0
    vals = np.empty(draws)
    for r in range(draws):
        comp = model.sample_missing(unit, cond_v, rng)
        vals[r] = model.loglik_comp(comp, a_v) - model.loglik_comp(comp, b_v)
    var = float(vals.var(ddof=1))
    se_var = var * math.sqrt(2.0 / (draws - 1))
    return float(vals.mean()), var, se_var


# ----------------------------------------------------------------------
# shrinking-prior-limit measures (no prior needed)
# ----------------------------------------------------------------------
def compute_bi0(model: IncompleteModel, data: UnitDataset, theta_0: ParamPoint,
                *, mc: MCConfig | None = None) -> Bi0Result:
    """Shrinking-prior limit: squared score over squared score plus missing info.

    Zero whenever the null is a stationary point of the observed-data
    log-likelihood, however informative the data are away from the null.
    """
    mc = mc or MCConfig()
    view = ScalarView(model, theta_0)
    s = view.score(data, view.value)
    rng = derive_rng(mc.seed, "bi0")
    imi = view.info_missing(data, view.value, rng=rng, draws=mc.draws)
    den = s * s + imi
    if den <= 0:
        raise DegenerateTestError("no score and no missing information at the null")
    return Bi0Result(s * s / den, s, imi)


def compute_bi_s(model: IncompleteModel, data: UnitDataset, theta_0: ParamPoint,
                 *, mc: MCConfig | None = None) -> Bi0Result:
    """Per-unit-summed shrinking-prior measure.

    Numerator and denominator of the single-unit measure are summed across
    units before taking the ratio, so the result vanishes only if every
    per-unit score vanishes.  This removes the score-cancellation artifact of
    the pooled measure.
    """
    mc = mc or MCConfig()
    view = ScalarView(model, theta_0)
    vals = view.full(view.value)
    s2 = 0.0
    imi = 0.0
    for i, (unit, w) in enumerate(data):
        if w == 0.0:
            continue
        si = view.unit_score(unit, view.value)
        s2 += w * si * si
        rng = derive_rng(mc.seed, "bi_s", i)
        mat = np.asarray(model.info_missing(unit, vals, rng=rng, draws=mc.draws))
        imi += w * float(mat[view.index, view.index])
    den = s2 + imi
    if den <= 0:
        raise DegenerateTestError("no per-unit score and no missing information")
    return Bi0Result(s2 / den, math.sqrt(s2), imi)


@dataclass(frozen=True)
class TiltingBi0:
    value: float
    simple_approx: float
    w_stat: float
    var_z_given_data: float

    def __float__(self) -> float:
        return self.value


def compute_bi0_tilting(units) -> TiltingBi0:
    """Closed form of the shrinking-prior measure for tilted family scores.

    Uses only the imputed standardized statistic and the conditional score
    variance; also reports the cruder one-minus-conditional-variance
    approximation obtained by replacing the denominator with its null mean.
    """
    units = list(units)
    if not units:
        raise DataError("no families")
    gam2 = sum(u.gamma ** 2 for u in units)
    if gam2 <= 0:
        raise DataError("all family weights are zero")
    sw = sum(u.gamma * u.posterior_mean for u in units)
    var_sum = sum(u.gamma ** 2 * u.posterior_var for u in units)
    w = sw / math.sqrt(gam2)
    var_z = var_sum / gam2
    den = w * w + var_z
    if den <= 0:
        raise DegenerateTestError("all families are uninformative: zero imputed "
                                  "statistic and zero conditional variance")
    return TiltingBi0(w * w / den, 1.0 - var_z, w, var_z)


# ----------------------------------------------------------------------
# posterior-variability measures
# ----------------------------------------------------------------------
def compute_bi1(model: IncompleteModel, data: UnitDataset, theta_0: ParamPoint,
                prior: PriorSpec, mc: MCConfig | None = None) -> BayesValue:
    """Posterior variance of the observed-data likelihood ratio over the
    posterior variance of its complete-data counterpart.

    The numerator needs only the observed evidence surface.  The denominator
    adds, via the law of total variance, the posterior-averaged conditional
    variance of the complete-data ratio; that conditional term comes from
    exact per-unit moments when the model provides them and from seeded
    Monte Carlo otherwise.  Heavy-tailed ratio moments abort with a
    diagnostic rather than returning a noise-dominated value.
    """
    mc = mc or MCConfig()
    ctx = _context(model, data, theta_0, prior)
    with np.errstate(over="ignore"):
        lr = np.exp(-ctx.beta)
    _guard_finite(lr, "observed likelihood ratio")
    m = float(ctx.post @ lr)
    num = float(ctx.post @ (lr - m) ** 2)

    t0_full = ctx.view.full(ctx.t0)
    cond_var = np.zeros(len(ctx.nodes))
    se2 = np.zeros(len(ctx.nodes))
    for k, t in enumerate(ctx.nodes):
        tk_full = ctx.view.full(t)
        expo = 2.0 * ctx.beta[k]
        err2 = 0.0
        for i, (unit, w) in enumerate(ctx.data):
            if w == 0.0:
                continue
            rng = derive_rng(mc.seed, "bi1", i, k)
            logm2, rel_se = _log_elr_unit(model, unit, t0_full, tk_full, tk_full,
                                          2, rng, mc.draws)
            expo += w * logm2
            err2 += (w * rel_se) ** 2
        expo = max(expo, 0.0)  # nonnegative by the second-moment inequality
        log_scale = -2.0 * ctx.beta[k]
        if math.isinf(expo) or log_scale + expo > 700.0:
            cond_var[k] = math.inf
            continue
        base = math.exp(log_scale)
        cond_var[k] = base * math.expm1(expo)
        se2[k] = (base * math.exp(expo) * math.sqrt(err2)) ** 2
    _guard_finite(cond_var, "complete-data likelihood-ratio variance")
    den = num + float(ctx.post @ cond_var)
    if den <= 0:
        raise DegenerateTestError("flat observed evidence and no missing "
                                  "information: the measure is undefined")
    value = num / den
    se_den = math.sqrt(float(ctx.post ** 2 @ se2))
    return BayesValue(value, num * se_den / den ** 2 if se_den else 0.0)


def compute_bi1_covform(model: IncompleteModel, data: UnitDataset, theta_0: ParamPoint,
                        prior: PriorSpec, mc: MCConfig | None = None) -> BayesValue:
    """Flatness-ratio form of the same measure via prior covariances.

    The observed and complete likelihood-ratio surfaces are each scored by
    the covariance between the ratio and its reciprocal under the prior; the
    complete-data side conditions the missing data at the null rather than
    at each parameter node, making this an independent estimator that must
    agree with the direct posterior-variance form.
    """
    mc = mc or MCConfig()
    ctx = _context(model, data, theta_0, prior)
    pbar = np.exp(ctx.logm)
    with np.errstate(over="ignore"):
        a1 = pbar * np.exp(ctx.beta)
        a2 = pbar * np.exp(-ctx.beta)
    _guard_finite(a2, "observed likelihood ratio")
    num = float(a1.sum() * a2.sum()) - 1.0

    t0_full = ctx.view.full(ctx.t0)
    logb2 = np.zeros(len(ctx.nodes))
    se2 = np.zeros(len(ctx.nodes))
    for k, t in enumerate(ctx.nodes):
        tk_full = ctx.view.full(t)
        err2 = 0.0
        for i, (unit, w) in enumerate(ctx.data):
            if w == 0.0:
                continue
            rng = derive_rng(mc.seed, "bi1cov", i, k)
            lm, rel_se = _log_elr_unit(model, unit, t0_full, tk_full, t0_full,
                                       1, rng, mc.draws)
            logb2[k] += w * lm
            err2 += (w * rel_se) ** 2
        se2[k] = err2
    with np.errstate(over="ignore"):
        b2 = pbar * np.exp(logb2)
    _guard_finite(b2, "complete-data likelihood-ratio mean")
    den = float(a1.sum() * b2.sum()) - 1.0
    if den <= 0:
        raise DegenerateTestError("flat complete-data evidence: the measure "
                                  "is undefined")
    value = num / den
    se_den = float(a1.sum()) * math.sqrt(float((b2 ** 2 * se2).sum()))
    return BayesValue(value, num * se_den / den ** 2 if se_den else 0.0)


def compute_bi2(model: IncompleteModel, data: UnitDataset, theta_0: ParamPoint,
                prior: PriorSpec, mc: MCConfig | None = None) -> BayesValue:
    """Log-scale measure: posterior variance of the observed log ratio over
    itself plus the variability the missing data would add.

    Bounded inside [0, 1] by construction and immune to heavy ratio tails.
    The added-variability term decomposes into an exact part computed from
    the expected complete-data log-likelihood and per-unit conditional
    variances (exact hooks or seeded Monte Carlo).
    """
    mc = mc or MCConfig()
    ctx = _context(model, data, theta_0, prior)
    lod = ctx.beta
    ml = float(ctx.post @ lod)
    num = float(ctx.post @ (lod - ml) ** 2)

    t0_full = ctx.view.full(ctx.t0)
    cond_mean = np.zeros(len(ctx.nodes))
    cond_var = np.zeros(len(ctx.nodes))
    se2 = np.zeros(len(ctx.nodes))
    for k, t in enumerate(ctx.nodes):
        tk_full = ctx.view.full(t)
        cond_mean[k] = (ctx.view.q(ctx.data, t, t) - ctx.view.q(ctx.data, ctx.t0, t)
                        - ctx.beta[k])
        err2 = 0.0
        for i, (unit, w) in enumerate(ctx.data):
            if w == 0.0:
                continue
            rng = derive_rng(mc.seed, "bi2", i, k)
            _, var, se_var = _lod_moments_unit(model, unit, tk_full, t0_full, tk_full,
                                               rng, mc.draws)
            cond_var[k] += w * var
            err2 += (w * se_var) ** 2
        se2[k] = err2
    mmean = float(ctx.post @ cond_mean)
    missing = float(ctx.post @ cond_var) + float(ctx.post @ (cond_mean - mmean) ** 2)
    den = num + missing
    if den <= 0:
        raise DegenerateTestError("no information in data or model")
    se_missing = math.sqrt(float(ctx.post ** 2 @ se2))
    value = num / den
    return BayesValue(value, num * se_missing / den ** 2 if se_missing else 0.0)


# ----------------------------------------------------------------------
# Bayes factor identities
# ----------------------------------------------------------------------
def _iter_replicates(data: UnitDataset):
    for unit, w in data:
        if w != int(w):
            raise DataError("sampling-based operations need integer frequency weights")
        for _ in range(int(w)):
            yield unit


def _sample_posterior(view: ScalarView, data: UnitDataset, prior: PriorSpec,
                      n: int, rng: np.random.Generator, grid_size: int = 1025) -> np.ndarray:
    grid = np.linspace(prior.lo, prior.hi, grid_size)
    ll0 = view.loglik_obs(data, view.value)
    logd = np.array([view.loglik_obs(data, t) for t in grid]) - ll0 \
        + prior.log_density(grid)
    d = np.exp(logd - logd.max())
    cdf = np.concatenate([[0.0], np.cumsum((d[1:] + d[:-1]) * 0.5 * np.diff(grid))])
    if cdf[-1] <= 0:
        raise DegenerateTestError("posterior has no mass on the prior support")
    cdf /= cdf[-1]
    u = rng.random(n)
    return np.interp(u, cdf, grid)


def bayes_factor_ob(model: IncompleteModel, data: UnitDataset, theta_0: ParamPoint,
                    prior: PriorSpec, mc: MCConfig | None = None) -> BayesFactorResult:
    """Observed-data Bayes factor for the fixed null against the prior mixture.

    Computed three ways: by quadrature, as the Monte Carlo posterior mean of
    the observed-data likelihood ratio, and as the Monte Carlo posterior mean
    of the completed-data likelihood ratio (posterior draws of the parameter,
    conditional draws of the missing data).  The three agree in expectation;
    disagreement beyond four standard errors is flagged.  Sample variances of
    the three posterior quantities are reported; the completed-data ratio
    must be the most variable.
    """
    mc = mc or MCConfig()
    view = ScalarView(model, theta_0)
    t0 = view.value
    if prior.is_point_mass:
        beta = view.loglik_obs(data, prior.lo) - view.loglik_obs(data, t0)
        bf = math.exp(-beta)
        return BayesFactorResult(bf, bf, 0.0, bf, 0.0, 0.0, 0.0, 0.0, 0, ())
    nodes, logm = prior.quadrature()
    ll0 = view.loglik_obs(data, t0)
    beta = np.array([view.loglik_obs(data, t) for t in nodes]) - ll0
    bf_quad = float(np.exp(-logsumexp(logm + beta)))

    rng = derive_rng(mc.seed, "bayes_factor")
    draws = mc.draws
    thetas = _sample_posterior(view, data, prior, draws, rng)
    lr_ob = np.exp(ll0 - np.array([view.loglik_obs(data, t) for t in thetas]))

    units = list(_iter_replicates(data))
    t0_full = view.full(t0)
    node_fulls = [view.full(t) for t in nodes]
    lr_co = np.empty(draws)
    bf_co = np.empty(draws)
    for j, t in enumerate(thetas):
        tj_full = view.full(t)
        lod_co = 0.0
        mix = logm.copy()
        for unit in units:
            comp = model.sample_missing(unit, tj_full, rng)
            l0 = model.loglik_comp(comp, t0_full)
            lod_co += l0 - model.loglik_comp(comp, tj_full)
            mix = mix + np.array([model.loglik_comp(comp, nf) for nf in node_fulls]) - l0
        lr_co[j] = math.exp(lod_co)
        bf_co[j] = math.exp(-logsumexp(mix))

    def mean_se(x):
        return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))

    bf_obs, se_obs = mean_se(lr_ob)
    bf_comp, se_comp = mean_se(lr_co)
    var_lr_ob = float(lr_ob.var(ddof=1))
    var_lr_co = float(lr_co.var(ddof=1))
    var_bf_co = float(bf_co.var(ddof=1))
    flags = []
    if se_obs and abs(bf_obs - bf_quad) > 4 * se_obs:
        flags.append("mc_quad_disagreement_obs")
    if se_comp and abs(bf_comp - bf_quad) > 4 * se_comp:
        flags.append("mc_quad_disagreement_comp")
    slack = 1.0 + 6.0 / math.sqrt(draws)
    if max(var_bf_co, var_lr_ob) > var_lr_co * slack:
        flags.append("variance_ordering_violated")
    return BayesFactorResult(bf_quad, bf_obs, se_obs, bf_comp, se_comp,
                             var_lr_ob, var_lr_co, var_bf_co, draws, tuple(flags))


# ----------------------------------------------------------------------
# shrinking-prior convergence table
# ----------------------------------------------------------------------
def shrink_convergence(model: IncompleteModel, data: UnitDataset, theta_0: ParamPoint,
                       deltas: Sequence[float], mc: MCConfig | None = None) -> ShrinkReport:
    """Both posterior-variability measures under symmetric uniform priors of
    shrinking half-width, with their gaps to the shrinking-prior limit.

    The gaps must be non-increasing as the half-width shrinks (within twice
    the Monte Carlo error); violations are flagged rather than raised since
    they may indicate either noise or a real problem.
    """
    mc = mc or MCConfig()
    deltas = [float(d) for d in deltas]
    if not deltas or any(d <= 0 for d in deltas):
        raise DataError("deltas must be positive")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise DataError("deltas must be strictly decreasing")
    bi0 = compute_bi0(model, data, theta_0, mc=mc).value
    view = ScalarView(model, theta_0)
    rows = []
    for d in deltas:
        prior = PriorSpec.uniform(view.value - d, view.value + d)
        b1 = compute_bi1(model, data, theta_0, prior, mc)
        b2 = compute_bi2(model, data, theta_0, prior, mc)
        rows.append(ShrinkRow(d, b1.value, b2.value, abs(b1.value - bi0),
                              abs(b2.value - bi0), b1.mc_se, b2.mc_se))
    flags = []
    for prev, cur in zip(rows, rows[1:]):
        if cur.gap_bi1 > prev.gap_bi1 + 2 * (cur.se_bi1 + prev.se_bi1) + 1e-12:
            flags.append("non_monotone_bi1")
        if cur.gap_bi2 > prev.gap_bi2 + 2 * (cur.se_bi2 + prev.se_bi2) + 1e-12:
            flags.append("non_monotone_bi2")
    def ratios(gaps):
        return tuple(a / b if b > 0 else math.inf for a, b in zip(gaps, gaps[1:]))
    return ShrinkReport(bi0, tuple(rows),
                        ratios([r.gap_bi1 for r in rows]),
                        ratios([r.gap_bi2 for r in rows]),
                        tuple(sorted(set(flags))))

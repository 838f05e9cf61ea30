"""Fitting and curvature machinery shared by every measure.

Maximum-likelihood fits run as EM (repeated maximization of the expected
complete-data log-likelihood) followed by a derivative-free polish on the
observed-data log-likelihood: golden-section style for a single free
coordinate, Nelder-Mead otherwise.  Curvatures come from central finite
differences with two-level Richardson extrapolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from ._seeding import derive_rng
from .model_api import (
    DataError,
    HypothesisSpec,
    IncompleteModel,
    NumericalError,
    ParamPoint,
    ScalarView,
    UnitDataset,
    dataset_loglik_obs,
    dataset_q,
    dataset_score_obs,
)


@dataclass(frozen=True)
class FitConfig:
    max_em_iter: int = 500
    tol_loglik: float = 1e-10
    tol_grad: float = 1e-6
    polish: bool = True
    newton_polish: bool = True
    polish_maxiter: int = 2000
    n_starts: int = 1
    start_spread: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class FitResult:
    theta: ParamPoint
    loglik: float
    iterations: int
    converged: bool
    gradient_norm: float
    flags: tuple[str, ...] = ()

    @property
    def boundary(self) -> bool:
        return "boundary" in self.flags


@dataclass(frozen=True)
class InfoDecomposition:
    i_ob: np.ndarray
    i_mi: np.ndarray
    i_co: np.ndarray
    eval_point: ParamPoint
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class QDerivative:
    value: float
    error: float
    orders: tuple[int, int]
    step: float

    def __float__(self) -> float:
        return self.value


_DEFAULT_CONFIG = FitConfig()

_STENCILS = {
    0: {0: 1.0},
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}


# ----------------------------------------------------------------------
# generic bounded optimization helpers
# ----------------------------------------------------------------------
def _inset(lo: float, hi: float) -> float:
    if math.isfinite(lo) and math.isfinite(hi):
        return 1e-9 * (hi - lo)
    return 1e-9


def _clip_inside(x: np.ndarray, bounds) -> np.ndarray:
    out = np.asarray(x, dtype=float).copy()
    for k, (lo, hi) in enumerate(bounds):
        eps = _inset(lo, hi)
        if math.isfinite(lo):
            out[k] = max(out[k], lo + eps)
        if math.isfinite(hi):
            out[k] = min(out[k], hi - eps)
    return out


def _maximize_scalar(f, x0: float, lo: float, hi: float, xatol: float = 1e-12) -> float:
    """Derivative-free bounded maximization of a scalar function."""
    neg = lambda t: -f(t)
    eps = _inset(lo, hi)
    left = lo + eps if math.isfinite(lo) else None
    right = hi - eps if math.isfinite(hi) else None
    span = max(1.0, 0.25 * abs(x0))
    f0 = neg(x0)
    # expand any infinite side until the endpoint is worse than the centre
    for _ in range(60):
        a = x0 - span if left is None else max(left, x0 - span)
        b = x0 + span if right is None else min(right, x0 + span)
        grow = False
        if left is None and a == x0 - span and neg(a) <= f0:
            grow = True
        if right is None and b == x0 + span and neg(b) <= f0:
            grow = True
        if not grow or span > 1e8:
            break
        span *= 4.0
    res = optimize.minimize_scalar(neg, bounds=(a, b), method="bounded",
                                   options={"xatol": xatol, "maxiter": 500})
    best = float(res.x)
    return best if neg(best) <= f0 else x0


def _maximize_multi(f, x0: np.ndarray, bounds, maxiter: int) -> np.ndarray:
    neg = lambda v: -f(v)
    x0 = _clip_inside(x0, bounds)
    lob = [lo if math.isfinite(lo) else None for lo, _ in bounds]
    hib = [hi if math.isfinite(hi) else None for _, hi in bounds]
    res = optimize.minimize(neg, x0, method="Nelder-Mead",
                            bounds=optimize.Bounds(
                                [lo if lo is not None else -np.inf for lo in lob],
                                [hi if hi is not None else np.inf for hi in hib]),
                            options={"maxiter": maxiter, "xatol": 1e-11,
                                     "fatol": 1e-13, "adaptive": len(x0) > 2})
    cand = np.asarray(res.x, dtype=float)
    return cand if neg(cand) <= neg(x0) else x0


def _objective_over_free(fun, base: np.ndarray, free: tuple[int, ...],
                         model: IncompleteModel):
    def wrapped(x_free):
        vals = base.copy()
        vals[list(free)] = np.atleast_1d(x_free)
        if not model.admissible(vals):
            return -math.inf
        out = fun(vals)
        return out if math.isfinite(out) else -math.inf
    return wrapped


def _polish_coordinates(wrapped, x: np.ndarray, bounds, sweeps: int = 3) -> np.ndarray:
    """Cyclic scalar line searches; cleans up the last few digits after NM."""
    x = np.asarray(x, dtype=float).copy()
    for _ in range(sweeps):
        moved = 0.0
        for k, (lo, hi) in enumerate(bounds):
            window = max(1e-4, 1e-4 * abs(x[k]))
            a = max(lo, x[k] - window) if math.isfinite(lo) else x[k] - window
            b = min(hi, x[k] + window) if math.isfinite(hi) else x[k] + window
            def line(t, k=k):
                probe = x.copy()
                probe[k] = t
                return wrapped(probe)
            res = optimize.minimize_scalar(lambda t: -line(t), bounds=(a, b),
                                           method="bounded",
                                           options={"xatol": 1e-13, "maxiter": 200})
            if -res.fun >= line(x[k]):
                moved = max(moved, abs(float(res.x) - x[k]))
                x[k] = float(res.x)
        if moved < 1e-13:
            break
    return x


def _maximize_free(fun, model: IncompleteModel, start: np.ndarray,
                   fixed: dict[int, float] | None, maxiter: int) -> np.ndarray:
    fixed = fixed or {}
    base = np.asarray(start, dtype=float).copy()
    for k, v in fixed.items():
        base[k] = float(v)
    free = tuple(k for k in range(model.dim) if k not in fixed)
    if not free:
        return base
    wrapped = _objective_over_free(fun, base, free, model)
    bounds = [model.bounds()[k] for k in free]
    if len(free) == 1:
        lo, hi = bounds[0]
        best = _maximize_scalar(lambda t: wrapped(np.array([t])),
                                float(base[free[0]]), lo, hi)
        out = base.copy()
        out[free[0]] = best
        return out
    best = _maximize_multi(wrapped, base[list(free)], bounds, maxiter)
    best = _polish_coordinates(wrapped, best, bounds)
    out = base.copy()
    out[list(free)] = best
    return out


# ----------------------------------------------------------------------
# public operations
# ----------------------------------------------------------------------
def maximize_q(model: IncompleteModel, data: UnitDataset, theta_anchor: ParamPoint,
               config: FitConfig | None = None,
               fixed: dict[int, float] | None = None) -> FitResult:
    """One E-step plus M-step: argmax over theta of Q(theta | anchor).

    ``fixed`` pins coordinates (used by null-constrained fits).  The result's
    ``loglik`` field holds the attained Q value.  A flat Q surface is flagged;
    multiple maximizers are not detected.
    """
    config = config or _DEFAULT_CONFIG
    anchor = theta_anchor.array
    if not model.admissible(anchor):
        raise DataError(f"{model.tag}: anchor {theta_anchor.values} is not admissible")
    closed = model.argmax_q(data, anchor, fixed)
    if closed is not None:
        best = np.asarray(closed, dtype=float)
        if fixed:
            for k, v in fixed.items():
                if abs(best[k] - v) > 1e-12:
                    raise NumericalError(f"{model.tag}: closed-form M-step ignored "
                                         f"a pinned coordinate {k}")
    else:
        qfun = lambda vals: dataset_q(model, data, model.point(vals), theta_anchor)
        best = _maximize_free(qfun, model, anchor, fixed, config.polish_maxiter)
    q_best = dataset_q(model, data, model.point(best), theta_anchor)
    flags: list[str] = []
    if _is_flat(lambda vals: dataset_q(model, data, model.point(vals), theta_anchor),
                model, best, fixed):
        flags.append("flat_q")
    return FitResult(model.point(best), q_best, 1, True, math.nan, tuple(flags))


def _is_flat(fun, model, values, fixed, spread=0.05, tol=1e-9) -> bool:
    fixed = fixed or {}
    base = fun(values)
    scale = max(1.0, abs(base))
    for k in range(model.dim):
        if k in fixed:
            continue
        lo, hi = model.bounds()[k]
        step = spread * max(1.0, abs(values[k]))
        for s in (-step, step):
            probe = np.asarray(values, dtype=float).copy()
            probe[k] = probe[k] + s
            probe = _clip_inside(probe, model.bounds())
            if not model.admissible(probe):
                continue
            val = fun(probe)
            if math.isfinite(val) and abs(val - base) > tol * scale:
                return False
    return True


def _newton_refine(model, data, vals, fixed, max_steps: int = 8) -> np.ndarray:
    """Score-root refinement; function-value methods stall near sqrt(eps)."""
    fixed = fixed or {}
    free = [k for k in range(model.dim) if k not in fixed]
    if not free:
        return vals
    vals = np.asarray(vals, dtype=float).copy()

    def score(v):
        return dataset_score_obs(model, data, model.point(v))[free]

    s = score(vals)
    norm = float(np.linalg.norm(s))
    for _ in range(max_steps):
        if not np.all(np.isfinite(s)) or norm < 1e-10:
            break
        h = np.array([1e-6 * max(1.0, abs(vals[k])) for k in free])
        jac = np.empty((len(free), len(free)))
        for col, k in enumerate(free):
            up, dn = vals.copy(), vals.copy()
            up[k] += h[col]
            dn[k] -= h[col]
            if not (model.admissible(up) and model.admissible(dn)):
                return vals
            jac[:, col] = (score(up) - score(dn)) / (2 * h[col])
        try:
            step = np.linalg.solve(jac, -s)
        except np.linalg.LinAlgError:
            break
        accepted = False
        for _ in range(6):
            cand = vals.copy()
            cand[free] += step
            if model.admissible(cand):
                s_new = score(cand)
                if np.all(np.isfinite(s_new)) and np.linalg.norm(s_new) < norm:
                    vals, s, norm = cand, s_new, float(np.linalg.norm(s_new))
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            break
    return vals


def _fit(model, data, start_values, fixed, config) -> FitResult:
    llfun = lambda vals: dataset_loglik_obs(model, data, model.point(vals))
    vals = np.asarray(start_values, dtype=float).copy()
    for k, v in (fixed or {}).items():
        vals[k] = float(v)
    if not model.admissible(vals):
        vals = _clip_inside(vals, model.bounds())
    if not model.admissible(vals):
        raise DataError(f"{model.tag}: starting point is not admissible")
    ll = llfun(vals)
    iterations = 0
    for _ in range(config.max_em_iter):
        step = maximize_q(model, data, model.point(vals), config, fixed)
        cand = step.theta.array
        ll_new = llfun(cand)
        if ll_new < ll - 1e-9 * max(1.0, abs(ll)):
            break  # numeric M-step failed to ascend; keep the last iterate
        iterations += 1
        gain = ll_new - ll
        vals, ll = cand, ll_new
        if gain <= config.tol_loglik:
            break
    if config.polish:
        vals = _maximize_free(llfun, model, vals, fixed, config.polish_maxiter)
        if config.newton_polish:
            refined = _newton_refine(model, data, vals, fixed)
            if llfun(refined) >= llfun(vals) - 1e-9 * max(1.0, abs(ll)):
                vals = refined
        ll = llfun(vals)
    grad = dataset_score_obs(model, data, model.point(vals))
    free = [k for k in range(model.dim) if k not in (fixed or {})]
    grad_norm = float(np.linalg.norm(grad[free])) if free else 0.0
    flags: list[str] = []
    for k in free:
        lo, hi = model.bounds()[k]
        eps = 1e-6 * ((hi - lo) if (math.isfinite(lo) and math.isfinite(hi))
                      else max(1.0, abs(vals[k])))
        if (math.isfinite(lo) and vals[k] - lo <= 2 * eps) or \
           (math.isfinite(hi) and hi - vals[k] <= 2 * eps):
            flags.append("boundary")
            break
    if _is_flat(llfun, model, vals, fixed):
        flags += ["flat_loglik", "non_identifiable"]
    converged = grad_norm <= config.tol_grad or "boundary" in flags or "flat_loglik" in flags
    return FitResult(model.point(vals), ll, iterations, converged, grad_norm, tuple(flags))


def fit_mle(model: IncompleteModel, data: UnitDataset, start: ParamPoint | None = None,
            config: FitConfig | None = None) -> FitResult:
    """Unconstrained maximum-likelihood fit by EM with a polish step."""
    config = config or _DEFAULT_CONFIG
    start = start or model.default_start(data)
    best = _fit(model, data, start.array, None, config)
    for k in range(1, config.n_starts):
        rng = derive_rng(config.seed, "fit_mle_start", k)
        jitter = start.array + rng.normal(0.0, config.start_spread, size=model.dim) \
            * np.maximum(1.0, np.abs(start.array))
        jitter = _clip_inside(jitter, model.bounds())
        if not model.admissible(jitter):
            continue
        cand = _fit(model, data, jitter, None, config)
        if cand.loglik > best.loglik:
            best = cand
    return best


def fit_null_mle(model: IncompleteModel, data: UnitDataset, hyp: HypothesisSpec,
                 start: ParamPoint | None = None,
                 config: FitConfig | None = None) -> FitResult:
    """Constrained fit with the interest coordinates pinned to the null."""
    config = config or _DEFAULT_CONFIG
    idx = model.interest_indices
    if len(hyp.null_values) != len(idx):
        raise DataError(f"{model.tag}: hypothesis fixes {len(hyp.null_values)} values "
                        f"but the model has {len(idx)} interest coordinates")
    fixed = dict(zip(idx, hyp.null_values))
    start = start or model.default_start(data)
    if len(fixed) == model.dim:
        theta0 = model.point([fixed[k] for k in range(model.dim)])
        ll = dataset_loglik_obs(model, data, theta0)
        return FitResult(theta0, ll, 0, True, 0.0, ())
    return _fit(model, data, start.array, fixed, config)


def null_point(model: IncompleteModel, hyp: HypothesisSpec, fit: FitResult) -> ParamPoint:
    """The fitted null parameter point (interest pinned, nuisance fitted)."""
    vals = list(fit.theta.values)
    for k, v in zip(model.interest_indices, hyp.null_values):
        vals[k] = v
    return model.point(vals)


# ----------------------------------------------------------------------
# derivatives and information
# ----------------------------------------------------------------------
def _fd_mixed(qfun, x0: float, y0: float, i: int, j: int, h1: float, h2: float) -> float:
    acc = 0.0
    for a, ca in _STENCILS[i].items():
        for b, cb in _STENCILS[j].items():
            acc += ca * cb * qfun(x0 + a * h1, y0 + b * h2)
    return acc / (h1 ** i * h2 ** j)


def q_derivative(model: IncompleteModel, data: UnitDataset, i: int, j: int,
                 at: ParamPoint, base_step: float | None = None) -> QDerivative:
    """Mixed partial of Q in its two slots at the interest coordinate of ``at``.

    Central differences with two-level Richardson extrapolation; the error
    field is the Richardson defect.  Requires a scalar interest parameter;
    nuisance coordinates stay frozen at ``at``.
    """
    if not (0 <= i <= 4 and 0 <= j <= 4 and 1 <= i + j <= 4):
        raise DataError("derivative orders must satisfy 1 <= i + j <= 4")
    view = ScalarView(model, at)
    x0 = view.value
    scale = max(1.0, abs(x0))
    if base_step is None:
        base_step = (1e-2 if max(i, j) >= 3 else 1e-3) * scale
    lo, hi = view.bounds()
    room = min(x0 - lo, hi - x0) if math.isfinite(lo) and math.isfinite(hi) else math.inf
    if math.isfinite(lo):
        room = min(room, x0 - lo)
    if math.isfinite(hi):
        room = min(room, hi - x0)
    h = base_step
    if room < math.inf:
        h = min(h, 0.45 * room / 2.0)
    if h <= 1e-12 * scale or x0 + h == x0:
        raise NumericalError("finite-difference step underflow: evaluation point "
                             "too close to the parameter boundary")
    qfun = lambda x, y: view.q(data, x, y)
    d1 = _fd_mixed(qfun, x0, x0, i, j, h, h)
    d2 = _fd_mixed(qfun, x0, x0, i, j, h / 2, h / 2)
    value = (4.0 * d2 - d1) / 3.0
    error = abs(d2 - d1) / 3.0
    if not math.isfinite(value):
        raise NumericalError(f"non-finite Q derivative of orders ({i},{j})")
    return QDerivative(value, error, (i, j), h)


def loglik_derivative(model: IncompleteModel, data: UnitDataset, order: int,
                      at: ParamPoint, base_step: float | None = None) -> QDerivative:
    """Scalar-interest derivative of the observed-data log-likelihood."""
    if not 1 <= order <= 4:
        raise DataError("order must be between 1 and 4")
    view = ScalarView(model, at)
    x0 = view.value
    scale = max(1.0, abs(x0))
    if base_step is None:
        base_step = (1e-2 if order >= 3 else 1e-3) * scale
    lo, hi = view.bounds()
    h = base_step
    for b, sgn in ((lo, -1), (hi, 1)):
        if math.isfinite(b):
            h = min(h, 0.45 * abs(b - x0) / 2.0)
    if h <= 1e-12 * scale or x0 + h == x0:
        raise NumericalError("finite-difference step underflow")
    f = lambda t: view.loglik_obs(data, t)
    def d(hh):
        return sum(c * f(x0 + a * hh) for a, c in _STENCILS[order].items()) / hh ** order
    d1, d2 = d(h), d(h / 2)
    value = (4.0 * d2 - d1) / 3.0
    return QDerivative(value, abs(d2 - d1) / 3.0, (order, 0), h)


def _fd_hessian(f, x0: np.ndarray, bounds) -> np.ndarray:
    dim = len(x0)
    def hess_at(h):
        out = np.empty((dim, dim))
        f0 = f(x0)
        for a in range(dim):
            ea = np.zeros(dim); ea[a] = h[a]
            out[a, a] = (f(x0 + ea) - 2 * f0 + f(x0 - ea)) / h[a] ** 2
            for b in range(a + 1, dim):
                eb = np.zeros(dim); eb[b] = h[b]
                out[a, b] = out[b, a] = (
                    f(x0 + ea + eb) - f(x0 + ea - eb) - f(x0 - ea + eb) + f(x0 - ea - eb)
                ) / (4 * h[a] * h[b])
        return out
    h = np.array([2e-3 * max(1.0, abs(v)) for v in x0])
    for k, (lo, hi) in enumerate(bounds):
        room = min(x0[k] - lo if math.isfinite(lo) else math.inf,
                   hi - x0[k] if math.isfinite(hi) else math.inf)
        if room < math.inf:
            h[k] = min(h[k], 0.45 * room)
    h1 = hess_at(h)
    h2 = hess_at(h / 2)
    return (4.0 * h2 - h1) / 3.0


def info_decomposition(model: IncompleteModel, data: UnitDataset, at: ParamPoint,
                       *, rng: np.random.Generator | None = None,
                       draws: int = 4096) -> InfoDecomposition:
    """Observed, missing and complete information matrices at ``at``.

    The observed part is a finite-difference negative Hessian of the
    observed-data log-likelihood; the missing part comes from the model (or
    its Monte Carlo fallback); their sum is the complete information.
    """
    vals = at.array
    if not model.admissible(vals):
        raise DataError(f"{model.tag}: evaluation point is not admissible")
    llfun = lambda v: dataset_loglik_obs(model, data, model.point(v))
    i_ob = -_fd_hessian(llfun, vals, model.bounds())
    i_mi = np.zeros((model.dim, model.dim))
    for unit, w in data:
        if w == 0.0:
            continue
        i_mi += w * np.asarray(model.info_missing(unit, vals, rng=rng, draws=draws))
    i_co = i_ob + i_mi
    flags = []
    sym = 0.5 * (i_ob + i_ob.T)
    if np.min(np.linalg.eigvalsh(sym)) < -1e-6 * max(1.0, float(np.abs(sym).max())):
        flags.append("i_ob_indefinite")
    return InfoDecomposition(i_ob, i_mi, i_co, at, tuple(flags))

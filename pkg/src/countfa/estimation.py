"""Maximum-likelihood fitting of single groups and whole partitioned models.

Plain Poisson and plain negative binomial fits use the mean-matching property
of exponential-family MLEs: every variable's fitted mean equals its sample
mean, so only the latent factor (and, for NegBin, the dispersion-type ``p``
parameters) are searched numerically. Zero-inflated and truncated families
are optimised over all parameters in log/logit coordinates with L-BFGS-B.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import expit, logit

from .distributions import NegBin, Poisson, mean
from .errors import DataError, NumericError, StructureError
from .likelihood import GroupData, data_log_lik
from .types import (Base, Component, Dataset, FitDiagnostics, FitResult, GroupFit,
                    GroupParameters, ModelFamily, Partition, parameter_count)

EPS = 1e-8
PENALTY = 1e12


@dataclass(frozen=True)
class OptimizerConfig:
    rel_tol: float = 1e-9
    max_iter: int = 500
    multistart: int = 3
    seed: int = 0
    # boxes applied before the log / logit transforms
    rate_box: tuple[float, float] = (EPS, 1e3)
    r_box: tuple[float, float] = (EPS, 1e4)
    prob_box: tuple[float, float] = (1e-6, 1.0 - 1e-6)
    jitter_sd: float = 0.5

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter < 1 or self.multistart < 1:
            raise ValueError("max_iter and multistart must be >= 1")


# -- parameter coding ------------------------------------------------------

def _component_names(m: int) -> list[str]:
    return (["factor"] if m >= 2 else []) + [f"var{j + 1}" for j in range(m)]


def _coord_names(f: ModelFamily, m: int) -> list[str]:
    names = []
    per = ["theta"] if f.base is Base.POISSON else ["r", "p"]
    if f.zero_inflated:
        per = per + ["pi"]
    for comp in _component_names(m):
        names.extend(f"{comp}.{k}" for k in per)
    return names


def _encode(comps: Sequence[Component], f: ModelFamily) -> np.ndarray:
    out = []
    for c in comps:
        if f.base is Base.POISSON:
            out.append(math.log(c.base.theta))
        else:
            out.extend([math.log(c.base.r), float(logit(c.base.p))])
        if f.zero_inflated:
            out.append(float(logit(c.pi)))
    return np.array(out)


def _decode(x: np.ndarray, f: ModelFamily) -> list[Component]:
    k = f.k_entity
    comps = []
    for i in range(0, len(x), k):
        if f.base is Base.POISSON:
            base = Poisson(math.exp(x[i]))
        else:
            base = NegBin(math.exp(x[i]), float(expit(x[i + 1])))
        pi = float(expit(x[i + k - 1])) if f.zero_inflated else None
        comps.append(Component(base, pi))
    return comps


def _bounds(f: ModelFamily, m: int, cfg: OptimizerConfig) -> list[tuple[float, float]]:
    logb = lambda box: (math.log(box[0]), math.log(box[1]))  # noqa: E731
    logitb = (float(logit(cfg.prob_box[0])), float(logit(cfg.prob_box[1])))
    per = [logb(cfg.rate_box)] if f.base is Base.POISSON else [logb(cfg.r_box), logitb]
    if f.zero_inflated:
        per = per + [logitb]
    return per * len(_component_names(m))


def _as_group(comps: Sequence[Component]) -> GroupParameters:
    if len(comps) == 1:
        return GroupParameters(None, (comps[0],))
    return GroupParameters(comps[0], tuple(comps[1:]))


# -- generic bounded multistart minimiser ---------------------------------

@dataclass
class _Outcome:
    x: np.ndarray
    fun: float
    converged: bool
    iterations: int
    n_starts: int


def _projected_grad_small(res, bounds, tol=1e-4) -> bool:
    g = np.asarray(getattr(res, "jac", np.zeros_like(res.x)), dtype=float)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    g = np.where((res.x <= lo + 1e-10) & (g > 0), 0.0, g)
    g = np.where((res.x >= hi - 1e-10) & (g < 0), 0.0, g)
    return bool(np.max(np.abs(g), initial=0.0) <= tol)


def minimize_multistart(objective: Callable[[np.ndarray], float], x0: np.ndarray,
                        bounds: list[tuple[float, float]], cfg: OptimizerConfig,
                        rng: np.random.Generator,
                        history: Optional[list] = None,
                        extra_starts: Sequence[np.ndarray] = ()) -> _Outcome:
    """L-BFGS-B from ``x0`` plus ``multistart - 1`` jittered restarts; best wins.

    ``extra_starts`` are tried as well, unjittered. ``history``, if given,
    collects the objective after every accepted iteration of every start
    (one list per start).
    """
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    x0 = np.clip(x0, lo, hi)
    starts = [x0] + [np.clip(x0 + rng.normal(0.0, cfg.jitter_sd, x0.shape), lo, hi)
                     for _ in range(cfg.multistart - 1)]
    starts += [np.clip(np.asarray(x, dtype=float), lo, hi) for x in extra_starts]
    best = None
    iterations = 0
    for start in starts:
        trail: list = []
        callback = None
        if history is not None:
            callback = lambda xk: trail.append(objective(xk))  # noqa: E731
        res = minimize(objective, start, method="L-BFGS-B", bounds=bounds, callback=callback,
                       options={"ftol": cfg.rel_tol, "gtol": 1e-9, "maxiter": cfg.max_iter})
        if history is not None:
            history.append(trail)
        iterations += int(res.nit)
        ok = bool(res.success) or (res.nit < cfg.max_iter and _projected_grad_small(res, bounds))
        if best is None or res.fun < best[0].fun:
            best = (res, ok)
    res, ok = best
    return _Outcome(np.asarray(res.x), float(res.fun), ok, iterations, len(starts))


def _flags_at_bounds(x, bounds, names, tol=1e-6) -> tuple[str, ...]:
    return tuple(n for xi, (lo, hi), n in zip(x, bounds, names)
                 if xi <= lo + tol or xi >= hi - tol)


# -- initial values ---------------------------------------------------------

def _factor_mean_guess(cols: np.ndarray) -> float:
    means = cols.mean(axis=0)
    m = cols.shape[1]
    if m < 2 or cols.shape[0] < 2:
        return EPS
    cov = np.cov(cols, rowvar=False)
    pair = [cov[a, b] for a in range(m) for b in range(a + 1, m)]
    hi = max(0.9 * float(means.min()), EPS)
    return float(np.clip(np.mean(pair), EPS, hi))


def _zero_excess(col: np.ndarray) -> float:
    ybar = col.mean()
    p0 = math.exp(-ybar)
    if p0 >= 1.0:
        return 0.9
    excess = (np.mean(col == 0) - p0) / (1.0 - p0)
    return float(np.clip(excess, 0.01, 0.9))


def _p_guess(col: np.ndarray) -> float:
    var = col.var()
    if var <= 0:
        return 0.95
    return float(np.clip(col.mean() / var, 0.05, 0.95))


def _initial_components(g: GroupData, f: ModelFamily) -> list[Component]:
    cols = g.columns
    means = cols.mean(axis=0)
    c0 = _factor_mean_guess(cols) if g.m >= 2 else 0.0
    pis = [_zero_excess(cols[:, j]) for j in range(g.m)]
    ps = [_p_guess(cols[:, j]) for j in range(g.m)]

    def make(mu, p, pi):
        mu = max(mu, 0.05)
        base = Poisson(mu) if f.base is Base.POISSON else NegBin(mu * p / (1 - p), p)
        return Component(base, pi if f.zero_inflated else None)

    comps = []
    if g.m >= 2:
        comps.append(make(c0, float(np.mean(ps)), min(pis)))
    for j in range(g.m):
        scale = 1.0 / (1.0 - pis[j]) if f.zero_inflated else 1.0
        comps.append(make(means[j] * scale - c0, ps[j], pis[j]))
    return comps


# -- fitting ----------------------------------------------------------------

def _rng_for(cfg: OptimizerConfig, f: ModelFamily, key: Sequence[int]) -> np.random.Generator:
    code = ModelFamily.CODES.index(f.code)
    return np.random.default_rng([cfg.seed, code, f.trunc or 0, *key])


def _safe_loglik(g: GroupData, gp: GroupParameters, f: ModelFamily) -> float:
    try:
        ll = data_log_lik(g, gp, f)
    except NumericError:
        return -math.inf
    return ll


def _collapsed_factor(f: ModelFamily, cfg: OptimizerConfig) -> Component:
    """A factor carrying (almost) no mass, so the group behaves as independent columns."""
    if f.base is Base.POISSON:
        base = Poisson(cfg.rate_box[0])
    else:
        base = NegBin(cfg.r_box[0], 0.5)
    return Component(base, 0.5 if f.zero_inflated else None)


def _fit_numeric(g: GroupData, f: ModelFamily, cfg: OptimizerConfig, key,
                 singles: Optional[Sequence[Component]] = None) -> GroupFit:
    bounds = _bounds(f, g.m, cfg)
    names = _coord_names(f, g.m)

    def objective(x):
        ll = _safe_loglik(g, _as_group(_decode(x, f)), f)
        return -ll / g.n if math.isfinite(ll) else PENALTY

    x0 = _encode(_initial_components(g, f), f)
    extra = []
    if singles is not None:
        extra.append(_encode([_collapsed_factor(f, cfg), *singles], f))
    out = minimize_multistart(objective, x0, bounds, cfg, _rng_for(cfg, f, key),
                              extra_starts=extra)
    gp = _as_group(_decode(out.x, f))
    ll = data_log_lik(g, gp, f)
    diag = FitDiagnostics(out.converged, out.iterations, out.n_starts,
                          _flags_at_bounds(out.x, bounds, names))
    return GroupFit(tuple(key), gp, ll, diag)


def _poisson_group(g: GroupData, f: ModelFamily, cfg: OptimizerConfig, key) -> GroupFit:
    means = [float(v) for v in g.means]

    def params(t0):
        return GroupParameters(Component(Poisson(t0)),
                               tuple(Component(Poisson(max(mu - t0, EPS))) for mu in means))

    hi = min(means) - EPS
    if hi <= 2 * EPS:
        gp = params(EPS)
        diag = FitDiagnostics(True, 0, 1, ("factor.theta",))
        return GroupFit(tuple(key), gp, data_log_lik(g, gp, f), diag)

    objective = lambda t0: -data_log_lik(g, params(t0), f) / g.n  # noqa: E731
    res = minimize_scalar(objective, bounds=(EPS, hi), method="bounded",
                          options={"xatol": cfg.rel_tol * max(1.0, hi), "maxiter": cfg.max_iter})
    candidates = [(float(res.fun), float(res.x)), (objective(EPS), EPS), (objective(hi), hi)]
    fun, t0 = min(candidates)
    flags = ()
    if t0 - EPS <= 1e-6:
        flags = ("factor.theta",)
    elif hi - t0 <= 1e-6:
        flags = tuple(f"var{j + 1}.theta" for j in range(g.m) if means[j] - t0 <= 1e-6 + EPS)
    gp = params(t0)
    diag = FitDiagnostics(bool(res.success), int(getattr(res, "nit", res.nfev)), 1, flags)
    return GroupFit(tuple(key), gp, data_log_lik(g, gp, f), diag)


def _negbin_group(g: GroupData, f: ModelFamily, cfg: OptimizerConfig, key,
                  singles: Optional[Sequence[Component]] = None) -> GroupFit:
    """Search (factor share, p0, p_1..p_m); r_j follow from the mean constraint."""
    means = [float(v) for v in g.means]
    mmin = min(means)
    logit_box = (float(logit(cfg.prob_box[0])), float(logit(cfg.prob_box[1])))
    share_box = (float(logit(EPS)), float(logit(1.0 - 1e-6)))
    if mmin <= 2 * EPS:
        share_box = (share_box[0], share_box[0])

    def decode(x):
        m0 = max(float(expit(x[0])) * mmin, EPS)
        p0 = float(expit(x[1]))
        factor = Component(NegBin(m0 * p0 / (1 - p0), p0))
        variables = []
        for mu, z in zip(means, x[2:]):
            pj = float(expit(z))
            variables.append(Component(NegBin(max(mu - m0, EPS) * pj / (1 - pj), pj)))
        return GroupParameters(factor, tuple(variables))

    def objective(x):
        ll = _safe_loglik(g, decode(x), f)
        return -ll / g.n if math.isfinite(ll) else PENALTY

    init = _initial_components(g, f)
    share = mean_of(init[0]) / mmin if mmin > 2 * EPS else EPS
    x0 = np.array([float(logit(np.clip(share, EPS, 0.9)))]
                  + [float(logit(c.base.p)) for c in init])
    bounds = [share_box] + [logit_box] * (g.m + 1)
    names = ["factor.mean"] + ["factor.p"] + [f"var{j + 1}.p" for j in range(g.m)]
    extra = []
    if singles is not None:
        extra.append([share_box[0], 0.0] + [float(logit(c.base.p)) for c in singles])
    out = minimize_multistart(objective, x0, bounds, cfg, _rng_for(cfg, f, key),
                              extra_starts=extra)
    gp = decode(out.x)
    diag = FitDiagnostics(out.converged, out.iterations, out.n_starts,
                          _flags_at_bounds(out.x, bounds, names))
    return GroupFit(tuple(key), gp, data_log_lik(g, gp, f), diag)


def mean_of(c: Component) -> float:
    """Mean of the base (non-inflated) part of a component."""
    return mean(c.base)


def fit_singleton(column, f: ModelFamily, cfg: OptimizerConfig = OptimizerConfig(),
                  key: Sequence[int] = ()) -> GroupFit:
    g = column if isinstance(column, GroupData) else GroupData(np.asarray(column))
    ybar = float(g.means[0])
    if f.exponential_family and f.base is Base.POISSON:
        flags = ()
        if ybar <= EPS:
            ybar, flags = EPS, ("var1.theta",)
        gp = GroupParameters(None, (Component(Poisson(ybar)),))
        return GroupFit(tuple(key), gp, data_log_lik(g, gp, f), FitDiagnostics(True, 0, 1, flags))
    if f.exponential_family:
        mu = max(ybar, EPS)

        def params(z):
            p = float(expit(z))
            return GroupParameters(None, (Component(NegBin(mu * p / (1 - p), p)),))

        lo, hi = float(logit(cfg.prob_box[0])), float(logit(cfg.prob_box[1]))
        objective = lambda z: -data_log_lik(g, params(z), f) / g.n  # noqa: E731
        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-7, "maxiter": cfg.max_iter})
        fun, z = min([(float(res.fun), float(res.x)), (objective(hi), hi)])
        flags = ("var1.p",) if hi - z <= 1e-4 else ()
        if ybar <= EPS:
            flags = flags + ("var1.mean",)
        gp = params(z)
        diag = FitDiagnostics(bool(res.success), int(getattr(res, "nit", res.nfev)), 1, flags)
        return GroupFit(tuple(key), gp, data_log_lik(g, gp, f), diag)
    return _fit_numeric(g, f, cfg, key)


def fit_group(g: GroupData, f: ModelFamily, cfg: OptimizerConfig = OptimizerConfig(),
              key: Sequence[int] = (),
              singles: Optional[Sequence[Component]] = None) -> GroupFit:
    """Fit one group of two or more variables sharing a latent factor.

    Besides the moment-based start and its jittered restarts, the numeric
    searches always start once from the collapsed-factor point whose
    variables hold their independent (singleton) fits, so the group fit is
    never worse than fitting its columns separately. ``singles`` supplies
    those singleton parameters; they are fitted here when omitted.
    """
    if g.m < 2:
        return fit_singleton(g, f, cfg, key)
    if f.trunc is not None and g.max_value > f.trunc:
        raise DataError(f"value {g.max_value} exceeds truncation bound {f.trunc}")
    if f.exponential_family and f.base is Base.POISSON:
        return _poisson_group(g, f, cfg, key)
    if singles is None:
        singles = [fit_singleton(GroupData(g.columns[:, j]), f, cfg, key=(j,)).params.variables[0]
                   for j in range(g.m)]
    if f.exponential_family:
        return _negbin_group(g, f, cfg, key, singles)
    return _fit_numeric(g, f, cfg, key, singles)


class GroupFitCache:
    """Thread-safe memo of group fits keyed by (member indices, family)."""

    def __init__(self):
        self._store: dict = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, group: Sequence[int], f: ModelFamily) -> Optional[GroupFit]:
        with self._lock:
            hit = self._store.get((tuple(group), f))
            if hit is None:
                self.misses += 1
            else:
                self.hits += 1
            return hit

    def peek(self, group: Sequence[int], f: ModelFamily) -> Optional[GroupFit]:
        """Lookup without touching the hit/miss counters."""
        with self._lock:
            return self._store.get((tuple(group), f))

    def __contains__(self, key) -> bool:
        group, f = key
        with self._lock:
            return (tuple(group), f) in self._store

    def put(self, fit: GroupFit, f: ModelFamily) -> None:
        with self._lock:
            self._store[(fit.group, f)] = fit

    def __len__(self) -> int:
        return len(self._store)


def fit_cached(d: Dataset, group: Sequence[int], f: ModelFamily, cfg: OptimizerConfig,
               cache: Optional[GroupFitCache]) -> GroupFit:
    group = tuple(sorted(group))
    if cache is not None:
        hit = cache.get(group, f)
        if hit is not None:
            return hit
    singles = None
    if cache is not None and len(group) >= 2:
        hits = [cache.peek((j,), f) for j in group]
        if all(h is not None for h in hits):
            singles = [h.params.variables[0] for h in hits]
    fit = fit_group(GroupData.from_dataset(d, group), f, cfg, key=group, singles=singles)
    if cache is not None:
        cache.put(fit, f)
    return fit


def assemble(p: Partition, f: ModelFamily, fits: Sequence[GroupFit], n_obs: int,
             wall_time: float = 0.0) -> FitResult:
    return FitResult(p, f, tuple(fits), math.fsum(x.log_lik for x in fits),
                     parameter_count(p, f), n_obs, wall_time)


def fit_model(d: Dataset, p: Partition, f: ModelFamily,
              cfg: OptimizerConfig = OptimizerConfig(),
              cache: Optional[GroupFitCache] = None) -> FitResult:
    if p.n_vars != d.N:
        raise StructureError(f"partition covers {p.n_vars} variables, data has {d.N}")
    start = time.perf_counter()
    fits = [fit_cached(d, grp, f, cfg, cache) for grp in p.groups]
    return assemble(p, f, fits, d.n, time.perf_counter() - start)

import math

import numpy as np
import pytest

from countfa.distributions import Poisson, log_pmf, mean
from countfa.estimation import (EPS, GroupFitCache, OptimizerConfig, _as_group, _bounds,
                                _decode, _encode, _initial_components, fit_group, fit_model,
                                fit_singleton, minimize_multistart)
from countfa.likelihood import GroupData, data_log_lik
from countfa.simulate import poisson_spec, simulate
from countfa.types import FitResult, ModelFamily, Partition

P = ModelFamily.from_code("p")
NB = ModelFamily.from_code("nb")
FAST = OptimizerConfig(multistart=1)


def shared_poisson(n, factor, rates, seed):
    rng = np.random.default_rng(seed)
    u = rng.poisson(factor, n)
    return np.column_stack([u + rng.poisson(r, n) for r in rates])


def test_singleton_poisson_closed_form():
    fit = fit_singleton([0, 1, 2, 3], P)
    assert fit.params.variables[0].base.theta == 1.5
    assert fit.log_lik == pytest.approx(sum(log_pmf(y, Poisson(1.5)) for y in range(4)),
                                        abs=1e-13)


def test_singleton_all_zero_is_clamped():
    fit = fit_singleton([0, 0, 0, 0], P)
    assert fit.params.variables[0].base.theta == EPS
    assert fit.diagnostics.boundary_flags


def test_singleton_zip_consistency():
    rng = np.random.default_rng(11)
    n = 2000
    y = np.where(rng.random(n) < 0.4, 0, rng.poisson(2.0, n))
    fit = fit_singleton(y, ModelFamily.from_code("zip"))
    c = fit.params.variables[0]
    assert abs(c.pi - 0.4) < 0.1
    assert abs(c.base.theta - 2.0) < 0.1


def test_singleton_negbin_mean_pinned():
    rng = np.random.default_rng(4)
    y = rng.negative_binomial(2.0, 0.4, 800)
    fit = fit_singleton(y, NB)
    assert mean(fit.params.variables[0].base) == pytest.approx(y.mean(), abs=1e-9)
    assert fit.params.variables[0].base.r == pytest.approx(2.0, rel=0.35)


def test_poisson_group_recovers_factor():
    cols = shared_poisson(5000, 0.5, [1.0, 1.0], seed=1)
    fit = fit_group(GroupData(cols), P)
    theta0 = fit.params.factor.base.theta
    assert 0.4 <= theta0 <= 0.6
    for ybar, v in zip(cols.mean(axis=0), fit.params.variables):
        assert abs(theta0 + v.base.theta - ybar) <= 1e-12


def test_poisson_group_mean_identity():
    cols = np.array([[2, 3], [1, 4], [3, 2], [2, 3], [2, 3], [2, 3]])
    assert list(cols.mean(axis=0)) == [2.0, 3.0]
    fit = fit_group(GroupData(cols), P)
    t0 = fit.params.factor.base.theta
    assert fit.params.variables[0].base.theta == pytest.approx(2.0 - t0, abs=1e-15)
    assert fit.params.variables[1].base.theta == pytest.approx(3.0 - t0, abs=1e-15)


def test_poisson_group_independent_columns_hit_boundary():
    rng = np.random.default_rng(8)
    cols = np.column_stack([rng.poisson(1.2, 1000), rng.poisson(0.8, 1000)])
    assert np.cov(cols, rowvar=False)[0, 1] < 0  # precondition for a boundary optimum
    fit = fit_group(GroupData(cols), P)
    assert fit.params.factor.base.theta == EPS
    assert "factor.theta" in fit.diagnostics.boundary_flags
    singles = sum(fit_singleton(cols[:, j], P).log_lik for j in range(2))
    assert fit.log_lik <= singles + 1e-6


@pytest.mark.parametrize("family", [P, NB])
def test_mean_match(family):
    rng = np.random.default_rng(21)
    u = rng.negative_binomial(1.5, 0.5, 600)
    cols = np.column_stack([u + rng.negative_binomial(2.0, 0.4, 600) for _ in range(3)])
    fit = fit_group(GroupData(cols), family, FAST)
    f0 = mean(fit.params.factor.base)
    for ybar, v in zip(cols.mean(axis=0), fit.params.variables):
        assert abs(f0 + mean(v.base) - ybar) <= 1e-6


@pytest.mark.parametrize("code", ["p", "nb", "zip", "pt"])
def test_merging_two_singletons_never_lowers_fit(code):
    trunc = 9 if code.endswith("t") else None
    f = ModelFamily.from_code(code, trunc)
    for seed in range(3):
        rng = np.random.default_rng(seed)
        cols = np.column_stack([rng.poisson(1.0, 300), rng.poisson(1.5, 300)])
        cols = cols[cols.max(axis=1) <= 9]
        group = fit_group(GroupData(cols), f, FAST)
        singles = sum(fit_singleton(cols[:, j], f, FAST).log_lik for j in range(2))
        assert group.log_lik >= singles - 1e-5


def test_fit_model_additivity_and_cache():
    d = simulate(poisson_spec([[1, 2], [3]], 1.0, 1.0, 400, seed=3))
    indep = fit_model(d, Partition.independence(3), P)
    assert indep.log_lik == pytest.approx(sum(fit_singleton(d.values[:, j], P).log_lik
                                              for j in range(3)), abs=1e-10)
    cache = GroupFitCache()
    p = Partition(((0, 1), (2,)))
    first = fit_model(d, p, P, cache=cache)
    misses = cache.misses
    again = fit_model(d, p, P, cache=cache)
    assert cache.misses == misses
    assert cache.hits == len(p.groups)
    assert again.log_lik == first.log_lik
    assert first.n_params == 4
    assert first.aic == -2 * first.log_lik + 2 * first.n_params


def test_aic_arithmetic():
    r = FitResult(Partition.independence(1), P, (), -1000.0, 13, 100)
    assert r.aic == 2026.0
    assert r.aic_normalized == pytest.approx(20.26, abs=1e-12)


@pytest.mark.parametrize("code", ["zip", "nbt", "zinb"])
def test_objective_decreases_along_iterations(code):
    f = ModelFamily.from_code(code, 12 if code.endswith("t") else None)
    cols = shared_poisson(400, 0.7, [1.0, 1.4], seed=5)
    g = GroupData(cols)
    bounds = _bounds(f, 2, FAST)

    def objective(x):
        return -data_log_lik(g, _as_group(_decode(x, f)), f) / g.n

    history: list = []
    x0 = _encode(_initial_components(g, f), f)
    minimize_multistart(objective, x0, bounds, OptimizerConfig(multistart=2),
                        np.random.default_rng(0), history)
    assert len(history) == 2
    for trail in history:
        assert all(b <= a + 1e-12 for a, b in zip(trail, trail[1:]))


@pytest.mark.parametrize("code", ["zip", "zipt", "nb", "zinbt"])
def test_fitted_params_inside_boxes_or_flagged(code):
    f = ModelFamily.from_code(code, 12 if code.endswith("t") else None)
    cols = shared_poisson(300, 0.7, [1.0, 1.4, 0.6], seed=9)
    fit = fit_group(GroupData(cols), f, FAST)
    cfg = FAST
    for name, comp in zip(["factor", "var1", "var2", "var3"], fit.params.components()):
        checks = []
        if comp.base.__class__ is Poisson:
            checks.append(("theta", comp.base.theta, cfg.rate_box))
        else:
            checks.append(("p", comp.base.p, cfg.prob_box))
        if comp.pi is not None:
            checks.append(("pi", comp.pi, cfg.prob_box))
        for key, value, (lo, hi) in checks:
            inside = lo < value < hi
            assert inside or f"{name}.{key}" in fit.diagnostics.boundary_flags


def test_zip_gradient_vanishes_at_optimum():
    rng = np.random.default_rng(3)
    n = 2000
    u = np.where(rng.random(n) < 0.3, 0, rng.poisson(1.0, n))
    xs = [np.where(rng.random(n) < 0.4, 0, rng.poisson(1.5, n)) for _ in range(2)]
    g = GroupData(np.column_stack([u + xs[0], u + xs[1]]))
    f = ModelFamily.from_code("zip")
    fit = fit_group(g, f)
    assert fit.diagnostics.converged and not fit.diagnostics.boundary_flags
    x = _encode(fit.params.components(), f)

    def negll(z):
        return -data_log_lik(g, _as_group(_decode(z, f)), f)

    h = 1e-5
    grad = [(negll(x + h * e) - negll(x - h * e)) / (2 * h) for e in np.eye(len(x))]
    assert max(abs(v) for v in grad) <= 1e-3


def test_degenerate_zero_column_in_group():
    cols = np.column_stack([np.zeros(50, int), np.arange(50) % 3])
    fit = fit_group(GroupData(cols), P)
    assert fit.params.factor.base.theta == EPS
    assert math.isfinite(fit.log_lik)
    fit = fit_group(GroupData(cols), NB, FAST)
    assert math.isfinite(fit.log_lik)


def test_truncated_fit_rejects_values_over_bound():
    from countfa.errors import DataError
    with pytest.raises(DataError):
        fit_group(GroupData(np.array([[1, 7], [2, 2]])), ModelFamily.from_code("pt", 5))

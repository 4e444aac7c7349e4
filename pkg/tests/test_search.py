import numpy as np
import pytest

from countfa.errors import DataError
from countfa.estimation import GroupFitCache, OptimizerConfig, fit_model
from countfa.search import candidate_models, forward_search, tie_break
from countfa.simulate import poisson_spec, simulate
from countfa.types import Dataset, FitResult, ModelFamily, Partition

P = ModelFamily.from_code("p")


def fake(aic, p, partition):
    # log_lik chosen so that aic = -2 ll + 2 p
    return partition, FitResult(partition, P, (), (2 * p - aic) / 2, p, 10)


def shape(p):
    return tuple(sorted(len(g) for g in p.groups))


def test_candidates_from_independence():
    cands = candidate_models(Partition.independence(5))
    assert len(cands) == 10
    assert {shape(c) for c in cands} == {(1, 1, 1, 2)}
    assert len({c.groups for c in cands}) == 10


def test_candidates_after_one_merge():
    cands = candidate_models(Partition(((0, 1), (2,), (3,), (4,))))
    shapes = sorted(shape(c) for c in cands)
    assert shapes == [(1, 1, 3)] * 3 + [(1, 2, 2)] * 3


def test_candidates_single_group():
    assert candidate_models(Partition(((0, 1, 2),))) == []


def test_tie_break_examples():
    p = Partition.independence(3)
    assert tie_break([fake(10.0, 5, p), fake(9.5, 6, p), fake(9.5, 4, p)]) == 2
    assert tie_break([fake(3, 1, p), fake(2, 1, p), fake(1, 1, p)]) == 2
    a = Partition(((0, 1), (2,)))
    b = Partition(((0, 2), (1,)))
    assert tie_break([fake(5.0, 3, b), fake(5.0, 3, a)]) == 1
    with pytest.raises(ValueError):
        tie_break([])


def test_independent_columns_select_independence():
    d = simulate(poisson_spec([[1], [2], [3], [4]], 1.0, 1.5, 2000, seed=17))
    result, trace = forward_search(d, P)
    assert result.partition == Partition.independence(4)
    assert len(trace.steps) == 1 and not trace.steps[0].accepted


def test_recovers_two_one():
    d = simulate(poisson_spec([[1, 2], [3]], 1.0, 1.0, 2000, seed=2))
    result, trace = forward_search(d, P)
    assert result.partition == Partition(((0, 1), (2,)))
    assert result.aic <= trace.steps[0].incumbent.aic


@pytest.mark.parametrize("seed", [0, 1])
def test_trace_invariants(seed):
    d = simulate(poisson_spec([[1, 2], [3, 4], [5]], 1.0, 1.0, 600, seed=seed))
    result, trace = forward_search(d, P)
    path = trace.accepted_path()
    assert all(b.aic < a.aic for a, b in zip(path, path[1:]))
    assert len(trace.steps) <= d.N - 1
    assert trace.initial_fits == d.N
    for k, step in enumerate(trace.steps):
        g = len(step.incumbent.partition.groups)
        assert len(step.candidates) == g * (g - 1) // 2
        if k > 0:
            assert step.new_fits <= g - 1
    assert trace.total_fits == trace.initial_fits + sum(s.new_fits for s in trace.steps)
    assert result.aic <= path[0].aic


def test_accepted_merges_do_not_lower_fit_on_singleton_merges():
    d = simulate(poisson_spec([[1, 2], [3]], 0.8, 1.0, 500, seed=5))
    _, trace = forward_search(d, ModelFamily.from_code("nb"), OptimizerConfig(multistart=1))
    path = trace.accepted_path()
    for before, after in zip(path, path[1:]):
        assert after.log_lik >= before.log_lik - 1e-5


def test_threads_do_not_change_the_trace():
    d = simulate(poisson_spec([[1, 2], [3, 4]], 1.0, 1.0, 400, seed=9))
    cfg = OptimizerConfig(multistart=2, seed=3)
    r1, t1 = forward_search(d, ModelFamily.from_code("zip"), cfg, threads=1)
    r4, t4 = forward_search(d, ModelFamily.from_code("zip"), cfg, threads=4)
    assert t1.as_dict() == t4.as_dict()
    assert r1.log_lik == r4.log_lik and r1.partition == r4.partition


def test_shared_cache_reuses_fits():
    d = simulate(poisson_spec([[1, 2], [3]], 1.0, 1.0, 300, seed=4))
    cache = GroupFitCache()
    forward_search(d, P, cache=cache)
    size = len(cache)
    _, trace = forward_search(d, P, cache=cache)
    assert len(cache) == size
    assert trace.total_fits == 0
    fit_model(d, Partition(((0, 1), (2,))), P, cache=cache)
    assert len(cache) == size


def test_search_input_errors():
    with pytest.raises(DataError):
        forward_search(Dataset.from_array(np.array([[1], [2]])), P)
    d = Dataset.from_array(np.array([[1, 7], [2, 2]]))
    with pytest.raises(DataError):
        forward_search(d, ModelFamily.from_code("pt", 5))

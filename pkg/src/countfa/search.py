"""Greedy forward selection over partitions by AIC.

Starting from the independence model, every step tries all pairwise merges of
the current groups and keeps the best one while AIC strictly improves. Group
fits are memoised, so a step only optimises the groups created by merging the
previous step's winner with each other group.
"""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import DataError
from .estimation import GroupFitCache, OptimizerConfig, assemble, fit_cached
from .types import Dataset, FitResult, ModelFamily, Partition, merge_groups

AIC_TIE_TOL = 1e-9


@dataclass(frozen=True)
class Candidate:
    partition: Partition
    log_lik: float
    n_params: int
    aic: float
    aic_normalized: float
    converged: bool

    @classmethod
    def from_fit(cls, r: FitResult) -> "Candidate":
        return cls(r.partition, r.log_lik, r.n_params, r.aic, r.aic_normalized, r.converged)

    def as_dict(self) -> dict:
        return {
            "model": self.partition.display(),
            "groups": self.partition.one_based(),
            "log_lik": self.log_lik,
            "n_params": self.n_params,
            "aic": self.aic,
            "aic_normalized": self.aic_normalized,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class SearchStep:
    incumbent: Candidate
    candidates: tuple[Candidate, ...]
    chosen: Optional[int]
    new_fits: int

    @property
    def accepted(self) -> bool:
        return self.chosen is not None

    def as_dict(self) -> dict:
        return {
            "incumbent": self.incumbent.as_dict(),
            "candidates": [c.as_dict() for c in self.candidates],
            "chosen": self.chosen,
            "new_fits": self.new_fits,
        }


@dataclass
class SearchTrace:
    steps: list[SearchStep] = field(default_factory=list)
    initial_fits: int = 0
    total_fits: int = 0
    cache_hits: int = 0

    def accepted_path(self) -> list[Candidate]:
        """Independence model followed by every adopted candidate."""
        if not self.steps:
            return []
        path = [self.steps[0].incumbent]
        path += [s.candidates[s.chosen] for s in self.steps if s.accepted]
        return path

    def as_dict(self) -> dict:
        return {
            "initial_fits": self.initial_fits,
            "total_fits": self.total_fits,
            "cache_hits": self.cache_hits,
            "steps": [s.as_dict() for s in self.steps],
        }


def candidate_models(p: Partition) -> list[Partition]:
    g = len(p.groups)
    return [merge_groups(p, i, j) for i in range(g) for j in range(i + 1, g)]


def tie_break(candidates: Sequence[tuple[Partition, FitResult]]) -> int:
    """Lowest AIC; near-ties go to fewer parameters, then the smaller group listing."""
    if not candidates:
        raise ValueError("no candidates")
    best_aic = min(r.aic for _, r in candidates)
    tied = [i for i, (_, r) in enumerate(candidates) if r.aic <= best_aic + AIC_TIE_TOL]
    return min(tied, key=lambda i: (candidates[i][1].n_params, candidates[i][0].groups))


def forward_search(d: Dataset, f: ModelFamily, cfg: OptimizerConfig = OptimizerConfig(),
                   threads: int = 1,
                   cache: Optional[GroupFitCache] = None) -> tuple[FitResult, SearchTrace]:
    if d.N < 2:
        raise DataError("forward search needs at least two variables")
    if f.trunc is not None and int(d.values.max()) > f.trunc:
        raise DataError(f"data maximum {int(d.values.max())} exceeds truncation bound {f.trunc}")
    start = time.perf_counter()
    cache = GroupFitCache() if cache is None else cache
    trace = SearchTrace()
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def fit_new(groups: list[tuple[int, ...]]) -> int:
        todo = sorted({g for g in groups if (g, f) not in cache})
        worker = lambda g: fit_cached(d, g, f, cfg, cache)  # noqa: E731
        if pool is not None:
            list(pool.map(worker, todo))
        else:
            for g in todo:
                worker(g)
        return len(todo)

    def evaluate(p: Partition) -> FitResult:
        return assemble(p, f, [fit_cached(d, g, f, cfg, cache) for g in p.groups], d.n)

    try:
        indep = Partition.independence(d.N)
        trace.initial_fits = fit_new(list(indep.groups))
        incumbent = evaluate(indep)
        while len(incumbent.partition.groups) >= 2:
            partitions = candidate_models(incumbent.partition)
            merged = [next(g for g in p.groups if g not in incumbent.partition.groups)
                      for p in partitions]
            new_fits = fit_new(merged)
            results = [evaluate(p) for p in partitions]
            best = tie_break(list(zip(partitions, results)))
            improved = results[best].aic < incumbent.aic
            trace.steps.append(SearchStep(
                Candidate.from_fit(incumbent),
                tuple(Candidate.from_fit(r) for r in results),
                best if improved else None,
                new_fits,
            ))
            if not improved:
                break
            incumbent = results[best]
    finally:
        if pool is not None:
            pool.shutdown()
    trace.total_fits = trace.initial_fits + sum(s.new_fits for s in trace.steps)
    trace.cache_hits = cache.hits
    return dataclasses.replace(incumbent, wall_time=time.perf_counter() - start), trace

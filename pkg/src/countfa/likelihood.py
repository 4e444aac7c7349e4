"""Exact group log-likelihoods, marginalising the shared latent count.

For a group ``Y_j = U + X_j`` the row likelihood is the convolution sum over
``u = 0..min_j y_j``. Rows are deduplicated up front; the inner sum is a
log-sum-exp and the outer sum over rows is exactly rounded with ``math.fsum``
so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .distributions import log_cumulative_mass, log_pmf_table, zi_log_pmf_table
from .errors import DataError, NumericError, StructureError
from .types import Component, Dataset, GroupParameters, ModelFamily, Partition

MIN_LOG_NORMALIZER = -700.0


@dataclass(frozen=True, eq=False)
class GroupData:
    """Columns of one group with precomputed row minima and unique-row weights."""

    columns: np.ndarray
    row_mins: np.ndarray = field(init=False)
    rows: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.int64)
        if cols.ndim == 1:
            cols = cols[:, None]
        if cols.shape[0] < 1:
            raise DataError("group has no rows")
        if np.any(cols < 0):
            raise DataError("negative values in the data")
        rows, counts = np.unique(cols, axis=0, return_counts=True)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "row_mins", cols.min(axis=1))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "weights", counts.astype(float))
        # offsets y_ij - u for every unique row, member and latent value u
        kmax = int(rows.min(axis=1).max())
        u = np.arange(kmax + 1)
        offsets = rows.T[:, :, None] - u[None, None, :]
        object.__setattr__(self, "_valid", offsets.min(axis=0) >= 0)
        object.__setattr__(self, "_offsets", np.clip(offsets, 0, None))

    @classmethod
    def from_dataset(cls, d: Dataset, group: Sequence[int]) -> "GroupData":
        return cls(d.values[:, list(group)])

    @property
    def n(self) -> int:
        return self.columns.shape[0]

    @property
    def m(self) -> int:
        return self.columns.shape[1]

    @property
    def max_value(self) -> int:
        return int(self.columns.max())

    @property
    def means(self) -> np.ndarray:
        return self.columns.mean(axis=0)


def _table(c: Component, zero_inflated: bool, kmax: int) -> np.ndarray:
    if zero_inflated:
        return zi_log_pmf_table(c.base, c.pi, kmax)
    return log_pmf_table(c.base, kmax)


def _weighted_sum(weights: np.ndarray, logs: np.ndarray) -> float:
    if np.any(np.isneginf(logs)):
        return -math.inf
    return math.fsum(weights * logs)


def _check_group(g: GroupData, gp: GroupParameters, f: ModelFamily) -> None:
    if gp.size != g.m:
        raise StructureError(f"{gp.size} variable parameter sets for a group of {g.m}")
    gp.check_family(f)


def _convolution_logs(g: GroupData, gp: GroupParameters, f: ModelFamily, kmax: int) -> np.ndarray:
    """Per unique row: log sum_u f_U(u) prod_j f_j(y_j - u)."""
    tab_u = _table(gp.factor, f.zero_inflated, kmax)
    n_u = g._valid.shape[1]
    parts = np.stack([_table(comp, f.zero_inflated, kmax)[g._offsets[j]]
                      for j, comp in enumerate(gp.variables)])
    # sorted summation makes the result invariant to column order
    terms = tab_u[:n_u] + np.sort(parts, axis=0).sum(axis=0)
    terms[~g._valid] = -np.inf
    return logsumexp(terms, axis=1)


def group_log_lik(g: GroupData, gp: GroupParameters, f: ModelFamily) -> float:
    """Log-likelihood of a group with m >= 2 members, untruncated."""
    if g.m < 2:
        raise StructureError("group_log_lik needs at least two members")
    _check_group(g, gp, f)
    logs = _convolution_logs(g, gp, f, g.max_value)
    return _weighted_sum(g.weights, logs)


def _log_normalizer_group(gp: GroupParameters, f: ModelFamily) -> float:
    A = f.trunc
    tab_u = _table(gp.factor, f.zero_inflated, A)
    # row u holds log M_j(A - u) for each member j
    log_cdfs = np.stack([np.logaddexp.accumulate(_table(c, f.zero_inflated, A))[::-1]
                         for c in gp.variables])
    return float(logsumexp(tab_u + np.sort(log_cdfs, axis=0).sum(axis=0)))


def truncated_group_log_lik(g: GroupData, gp: GroupParameters, f: ModelFamily) -> float:
    """Log-likelihood of a group conditioned on every member being <= A."""
    if f.trunc is None:
        raise StructureError("family has no truncation bound")
    if g.m < 2:
        raise StructureError("truncated_group_log_lik needs at least two members")
    _check_group(g, gp, f)
    if g.max_value > f.trunc:
        raise DataError(f"value {g.max_value} exceeds truncation bound {f.trunc}")
    log_d = _log_normalizer_group(gp, f)
    if log_d < MIN_LOG_NORMALIZER:
        raise NumericError(
            f"truncation normaliser underflow (log D = {log_d:.1f}) for parameters {gp.as_dict()}")
    num = _weighted_sum(g.weights, _convolution_logs(g, gp, f, g.max_value))
    return num - g.n * log_d


def singleton_log_lik(column, vp: Component, f: ModelFamily) -> float:
    g = column if isinstance(column, GroupData) else GroupData(np.asarray(column))
    if g.m != 1:
        raise StructureError("singleton_log_lik takes a single column")
    vp.check_family(f)
    y = g.rows[:, 0]
    total = _weighted_sum(g.weights, _table(vp, f.zero_inflated, int(y.max()))[y])
    if f.trunc is None:
        return total
    if y.max() > f.trunc:
        raise DataError(f"value {int(y.max())} exceeds truncation bound {f.trunc}")
    log_mass = log_cumulative_mass(vp.base, f.trunc)
    if vp.pi:
        log_mass = float(np.logaddexp(math.log(vp.pi), math.log1p(-vp.pi) + log_mass))
    if log_mass < MIN_LOG_NORMALIZER:
        raise NumericError(f"truncation normaliser underflow (log mass = {log_mass:.1f})")
    return total - g.n * log_mass


def data_log_lik(g: GroupData, gp: GroupParameters, f: ModelFamily) -> float:
    """Dispatch on group size and truncation."""
    if g.m == 1:
        return singleton_log_lik(g, gp.variables[0], f)
    if f.trunc is not None:
        return truncated_group_log_lik(g, gp, f)
    return group_log_lik(g, gp, f)


def model_log_lik(d: Dataset, p: Partition, f: ModelFamily,
                  params: Sequence[GroupParameters]) -> float:
    if len(params) != len(p.groups):
        raise StructureError(f"{len(params)} parameter bundles for {len(p.groups)} groups")
    return math.fsum(
        data_log_lik(GroupData.from_dataset(d, grp), gp, f)
        for grp, gp in zip(p.groups, params)
    )

"""Poisson and negative binomial mass functions, in log space throughout."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError


@dataclass(frozen=True)
class Poisson:
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and self.theta > 0):
            raise DomainError(f"Poisson rate must be positive, got {self.theta}")

    def as_dict(self) -> dict:
        return {"theta": self.theta}


@dataclass(frozen=True)
class NegBin:
    """Number of failures before the r-th success; ``r`` may be real."""

    r: float
    p: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r > 0):
            raise DomainError(f"negative binomial r must be positive, got {self.r}")
        if not (0.0 < self.p < 1.0):
            raise DomainError(f"negative binomial p must lie in (0, 1), got {self.p}")

    def as_dict(self) -> dict:
        return {"r": self.r, "p": self.p}


BaseParams = Union[Poisson, NegBin]


def log_pmf(x, params: BaseParams):
    """Log mass at ``x`` (scalar or integer array)."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise DomainError("counts must be non-negative")
    if isinstance(params, Poisson):
        out = xs * math.log(params.theta) - params.theta - gammaln(xs + 1.0)
    elif isinstance(params, NegBin):
        r, p = params.r, params.p
        out = (gammaln(r + xs) - gammaln(r) - gammaln(xs + 1.0)
               + r * math.log(p) + xs * math.log1p(-p))
    else:
        raise DomainError(f"unsupported parameters {params!r}")
    return float(out) if np.ndim(out) == 0 else out


def log_pmf_table(params: BaseParams, kmax: int) -> np.ndarray:
    return np.atleast_1d(log_pmf(np.arange(kmax + 1), params))


def _check_pi(pi: float) -> None:
    if not (0.0 <= pi < 1.0):
        raise DomainError(f"zero-inflation probability {pi} outside [0, 1)")


def zi_log_pmf(x, pi: float, params: BaseParams):
    """Log mass of the zero-inflated mixture ``pi * 1{x=0} + (1 - pi) * f(x)``."""
    _check_pi(pi)
    base = log_pmf(x, params)
    if pi == 0.0:
        return base
    base = np.asarray(base)
    out = math.log1p(-pi) + base
    out = np.where(np.asarray(x) == 0, np.logaddexp(math.log(pi), out), out)
    return float(out) if np.ndim(out) == 0 else out


def zi_log_pmf_table(params: BaseParams, pi: float, kmax: int) -> np.ndarray:
    return np.atleast_1d(zi_log_pmf(np.arange(kmax + 1), pi, params))


def _log_ratios(params: BaseParams, k: int) -> np.ndarray:
    """log f(x+1) - log f(x) for x = 0..k-1."""
    x = np.arange(k, dtype=float)
    if isinstance(params, Poisson):
        return math.log(params.theta) - np.log1p(x)
    return np.log(params.r + x) - np.log1p(x) + math.log1p(-params.p)


def log_cumulative_mass(params: BaseParams, k: int) -> float:
    if k < 0:
        raise DomainError("k must be non-negative")
    if isinstance(params, Poisson):
        log_f0 = -params.theta
    else:
        log_f0 = params.r * math.log(params.p)
    logs = np.empty(k + 1)
    logs[0] = log_f0
    logs[1:] = log_f0 + np.cumsum(_log_ratios(params, k))
    return min(0.0, float(logsumexp(logs)))


def cumulative_mass(params: BaseParams, k: int) -> float:
    """P(X <= k), built by the forward ratio recurrence from f(0)."""
    return math.exp(log_cumulative_mass(params, k))


def mean(params: BaseParams) -> float:
    if isinstance(params, Poisson):
        return params.theta
    return params.r * (1.0 - params.p) / params.p


def variance(params: BaseParams) -> float:
    if isinstance(params, Poisson):
        return params.theta
    return params.r * (1.0 - params.p) / params.p ** 2

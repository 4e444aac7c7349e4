"""Shared data model: datasets, partitions, model families and parameter bundles."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .distributions import BaseParams, NegBin, Poisson
from .errors import DataError, DomainError, StructureError


@dataclass(frozen=True, eq=False)
class Dataset:
    """An n x N matrix of non-negative integer counts with column names."""

    values: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise DataError("count matrix must be two-dimensional")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DataError("need at least one row and one column")
        if not np.issubdtype(values.dtype, np.integer):
            as_float = values.astype(float)
            if not np.all(np.isfinite(as_float)) or np.any(as_float != np.round(as_float)):
                raise DataError("counts must be integers")
        values = values.astype(np.int64)
        if np.any(values < 0):
            raise DataError("negative values in the data")
        names = tuple(str(s) for s in self.names)
        if len(names) != values.shape[1]:
            raise DataError(f"expected {values.shape[1]} names, got {len(names)}")
        if len(set(names)) != len(names):
            raise DataError("variable names must be unique")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_array(cls, values, names: Optional[Sequence[str]] = None) -> "Dataset":
        values = np.asarray(values)
        if names is None:
            names = [f"Var{j + 1}" for j in range(values.shape[1])]
        return cls(values, tuple(names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.names, self.values.tobytes()))


@dataclass(frozen=True)
class Partition:
    """Disjoint grouping of 0-based variable indices, kept in canonical order.

    Groups are sorted internally and ordered by their smallest member, so two
    partitions with the same structure compare (and hash) equal.
    """

    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(sorted(int(i) for i in g)) for g in self.groups)
        if not groups or any(len(g) == 0 for g in groups):
            raise StructureError("partition groups must be non-empty")
        flat = [i for g in groups for i in g]
        if len(flat) != len(set(flat)):
            raise StructureError("partition groups overlap")
        if sorted(flat) != list(range(len(flat))):
            raise StructureError(f"partition does not cover 0..{len(flat) - 1} exactly")
        object.__setattr__(self, "groups", tuple(sorted(groups, key=lambda g: g[0])))

    @classmethod
    def independence(cls, n_vars: int) -> "Partition":
        return cls(tuple((j,) for j in range(n_vars)))

    @classmethod
    def from_one_based(cls, groups: Iterable[Iterable[int]]) -> "Partition":
        return cls(tuple(tuple(i - 1 for i in g) for g in groups))

    @property
    def n_vars(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.groups)

    def __len__(self) -> int:
        return len(self.groups)

    def one_based(self) -> list[list[int]]:
        return [[i + 1 for i in g] for g in self.groups]

    def display(self) -> str:
        return "(" + ", ".join(str(s) for s in self.sizes) + ")"

    def __str__(self) -> str:
        return self.display()


def canonicalize_partition(groups: Iterable[Iterable[int]]) -> Partition:
    return Partition(tuple(tuple(g) for g in groups))


def merge_groups(p: Partition, i: int, j: int) -> Partition:
    """Union groups ``i`` and ``j`` (0-based group positions) of ``p``."""
    g = len(p.groups)
    if i == j:
        raise StructureError("cannot merge a group with itself")
    if not (0 <= i < g and 0 <= j < g):
        raise StructureError(f"group index out of range for {g} groups")
    merged = p.groups[i] + p.groups[j]
    rest = [grp for k, grp in enumerate(p.groups) if k not in (i, j)]
    return Partition(tuple(rest) + (merged,))


class Base(str, Enum):
    POISSON = "poisson"
    NEGBIN = "negbin"


@dataclass(frozen=True)
class ModelFamily:
    """Base distribution plus optional zero inflation and truncation bound."""

    base: Base
    zero_inflated: bool = False
    trunc: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "base", Base(self.base))
        if self.trunc is not None:
            if int(self.trunc) != self.trunc or self.trunc < 1:
                raise DomainError("truncation bound must be an integer >= 1")
            object.__setattr__(self, "trunc", int(self.trunc))

    CODES = ("p", "pt", "zip", "zipt", "nb", "nbt", "zinb", "zinbt")

    @classmethod
    def from_code(cls, code: str, trunc: Optional[int] = None) -> "ModelFamily":
        if code not in cls.CODES:
            raise DomainError(f"unknown family code {code!r}")
        truncated = code.endswith("t")
        if truncated and trunc is None:
            raise DomainError(f"family {code!r} needs a truncation bound")
        if not truncated and trunc is not None:
            raise DomainError(f"family {code!r} does not take a truncation bound")
        stem = code[:-1] if truncated else code
        zi = stem.startswith("zi")
        base = Base.NEGBIN if stem.endswith("nb") else Base.POISSON
        return cls(base, zi, trunc)

    @property
    def code(self) -> str:
        stem = ("zi" if self.zero_inflated else "") + ("nb" if self.base is Base.NEGBIN else "p")
        return stem + ("t" if self.trunc is not None else "")

    @property
    def truncated(self) -> bool:
        return self.trunc is not None

    @property
    def k_entity(self) -> int:
        """Free parameters per latent or observed component."""
        return (2 if self.base is Base.NEGBIN else 1) + int(self.zero_inflated)

    @property
    def exponential_family(self) -> bool:
        return not self.zero_inflated and self.trunc is None

    def without_truncation(self) -> "ModelFamily":
        return ModelFamily(self.base, self.zero_inflated, None)

    def __str__(self) -> str:
        return self.code if self.trunc is None else f"{self.code}(A={self.trunc})"


@dataclass(frozen=True)
class Component:
    """Parameters of one latent factor or one observed variable's own term."""

    base: BaseParams
    pi: Optional[float] = None

    def __post_init__(self):
        if self.pi is not None and not (0.0 <= self.pi < 1.0):
            raise DomainError(f"zero-inflation probability {self.pi} outside [0, 1)")

    def as_dict(self) -> dict:
        out = self.base.as_dict()
        if self.pi is not None:
            out["pi"] = self.pi
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Component":
        if "theta" in d:
            base: BaseParams = Poisson(float(d["theta"]))
        else:
            base = NegBin(float(d["r"]), float(d["p"]))
        pi = d.get("pi")
        return cls(base, None if pi is None else float(pi))

    def check_family(self, family: ModelFamily) -> None:
        want = Poisson if family.base is Base.POISSON else NegBin
        if not isinstance(self.base, want):
            raise StructureError(f"expected {want.__name__} parameters for family {family}")
        if family.zero_inflated != (self.pi is not None):
            raise StructureError("zero-inflation parameter presence does not match the family")


@dataclass(frozen=True)
class GroupParameters:
    factor: Optional[Component]
    variables: tuple[Component, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if not self.variables:
            raise StructureError("a group needs at least one variable")
        if (self.factor is not None) != (len(self.variables) >= 2):
            raise StructureError("factor parameters are present iff the group has 2+ members")

    @property
    def size(self) -> int:
        return len(self.variables)

    def check_family(self, family: ModelFamily) -> None:
        for c in self.components():
            c.check_family(family)

    def components(self) -> list[Component]:
        return ([self.factor] if self.factor is not None else []) + list(self.variables)

    def as_dict(self) -> dict:
        return {
            "factor": None if self.factor is None else self.factor.as_dict(),
            "variables": [v.as_dict() for v in self.variables],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroupParameters":
        factor = d.get("factor")
        return cls(
            None if factor is None else Component.from_dict(factor),
            tuple(Component.from_dict(v) for v in d["variables"]),
        )


def parameter_count(p: Partition, f: ModelFamily) -> int:
    k = f.k_entity
    return sum(k * len(g) + (k if len(g) >= 2 else 0) for g in p.groups)


@dataclass(frozen=True)
class FitDiagnostics:
    converged: bool
    iterations: int
    n_starts_used: int
    boundary_flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "n_starts_used": self.n_starts_used,
            "boundary_flags": list(self.boundary_flags),
        }


@dataclass(frozen=True)
class GroupFit:
    group: tuple[int, ...]
    params: GroupParameters
    log_lik: float
    diagnostics: FitDiagnostics


@dataclass(frozen=True)
class FitResult:
    partition: Partition
    family: ModelFamily
    fits: tuple[GroupFit, ...]
    log_lik: float
    n_params: int
    n_obs: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def aic(self) -> float:
        return -2.0 * self.log_lik + 2.0 * self.n_params

    @property
    def aic_normalized(self) -> float:
        return self.aic / self.n_obs

    @property
    def params(self) -> tuple[GroupParameters, ...]:
        return tuple(f.params for f in self.fits)

    @property
    def converged(self) -> bool:
        return all(f.diagnostics.converged for f in self.fits)

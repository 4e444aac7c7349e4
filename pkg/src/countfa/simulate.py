"""Draw synthetic count data from a partitioned latent-factor model."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .distributions import BaseParams, NegBin, Poisson
from .errors import ConfigError, NumericError
from .types import Base, Component, Dataset, GroupParameters, ModelFamily, Partition

MAX_PROPOSALS = 100_000
MIN_ACCEPTANCE = 1e-6


@dataclass(frozen=True)
class SimSpec:
    partition: Partition
    family: ModelFamily
    params: tuple[GroupParameters, ...]
    n: int
    seed: int = 0
    names: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if len(self.params) != len(self.partition.groups):
            raise ConfigError(f"{len(self.params)} parameter bundles for "
                              f"{len(self.partition.groups)} groups")
        for grp, gp in zip(self.partition.groups, self.params):
            if gp.size != len(grp):
                raise ConfigError(f"group {[i + 1 for i in grp]} has {gp.size} parameter sets")
            gp.check_family(self.family)

    @classmethod
    def from_dict(cls, d: dict) -> "SimSpec":
        fam = d["family"]
        family = ModelFamily(Base(fam["base"]), bool(fam.get("zero_inflated", False)),
                             fam.get("trunc"))
        names = d.get("names")
        return cls(
            partition=Partition.from_one_based(d["partition"]),
            family=family,
            params=tuple(GroupParameters.from_dict(g) for g in d["params"]),
            n=int(d["n"]),
            seed=int(d.get("seed", 0)),
            names=None if names is None else tuple(names),
        )

    @classmethod
    def from_json(cls, path) -> "SimSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        out = {
            "partition": self.partition.one_based(),
            "family": {"base": self.family.base.value,
                       "zero_inflated": self.family.zero_inflated,
                       "trunc": self.family.trunc},
            "params": [gp.as_dict() for gp in self.params],
            "n": self.n,
            "seed": self.seed,
        }
        if self.names is not None:
            out["names"] = list(self.names)
        return out


def draw_base(params: BaseParams, rng: np.random.Generator, size=None):
    """Poisson draws, or NegBin draws as failures before the r-th success."""
    if isinstance(params, Poisson):
        return rng.poisson(params.theta, size)
    if isinstance(params, NegBin):
        return rng.negative_binomial(params.r, params.p, size)
    raise TypeError(f"unsupported parameters {params!r}")


def _draw_component(c: Component, rng: np.random.Generator, size: int) -> np.ndarray:
    x = draw_base(c.base, rng, size)
    if c.pi is not None:
        x = np.where(rng.random(size) < c.pi, 0, x)
    return x


def _draw_group(gp: GroupParameters, rng: np.random.Generator, size: int) -> np.ndarray:
    u = _draw_component(gp.factor, rng, size) if gp.factor is not None else np.zeros(size, int)
    return np.column_stack([u + _draw_component(v, rng, size) for v in gp.variables])


def _draw_truncated(gp: GroupParameters, bound: int, rng: np.random.Generator,
                    n: int) -> np.ndarray:
    """Whole-row rejection: redraw a group's row until every member is <= bound."""
    accepted: list[np.ndarray] = []
    have = proposals = kept = 0
    while have < n:
        batch = max(64, 2 * (n - have))
        rows = _draw_group(gp, rng, batch)
        ok = rows.max(axis=1) <= bound
        proposals += batch
        kept += int(ok.sum())
        if proposals >= MAX_PROPOSALS and kept / proposals < MIN_ACCEPTANCE:
            raise NumericError("truncation bound incompatible with parameters "
                               f"(acceptance {kept}/{proposals})")
        good = rows[ok][: n - have]
        accepted.append(good)
        have += len(good)
    return np.concatenate(accepted, axis=0)


def simulate(spec: SimSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    N = spec.partition.n_vars
    values = np.zeros((spec.n, N), dtype=np.int64)
    for grp, gp in zip(spec.partition.groups, spec.params):
        if spec.family.trunc is None:
            block = _draw_group(gp, rng, spec.n)
        else:
            block = _draw_truncated(gp, spec.family.trunc, rng, spec.n)
        values[:, list(grp)] = block
    return Dataset.from_array(values, spec.names)


def write_csv(d: Dataset, path_or_file) -> None:
    """Write in the same layout ``load_csv`` reads: header row, integer cells."""
    lines = [",".join(d.names)] + [",".join(str(int(v)) for v in row) for row in d.values]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        Path(path_or_file).write_text(text)


def poisson_spec(groups: Sequence[Sequence[int]], factor_rate: float, var_rate: float,
                 n: int, seed: int = 0) -> SimSpec:
    """Plain Poisson spec with shared rates; ``groups`` are 1-based."""
    p = Partition.from_one_based(groups)
    params = []
    for g in p.groups:
        factor = Component(Poisson(factor_rate)) if len(g) >= 2 else None
        params.append(GroupParameters(factor, tuple(Component(Poisson(var_rate)) for _ in g)))
    return SimSpec(p, ModelFamily(Base.POISSON), tuple(params), n, seed)

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from countfa.distributions import NegBin, Poisson  # noqa: E402
from countfa.types import Base, Component, GroupParameters, ModelFamily  # noqa: E402

ALL_FAMILIES = [("p", None), ("pt", 6), ("zip", None), ("zipt", 6),
                ("nb", None), ("nbt", 6), ("zinb", None), ("zinbt", 6)]


def random_component(rng, family: ModelFamily) -> Component:
    if family.base is Base.POISSON:
        base = Poisson(float(rng.uniform(0.2, 2.5)))
    else:
        base = NegBin(float(rng.uniform(0.3, 4.0)), float(rng.uniform(0.2, 0.85)))
    pi = float(rng.uniform(0.0, 0.6)) if family.zero_inflated else None
    return Component(base, pi)


def random_group_params(rng, family: ModelFamily, m: int) -> GroupParameters:
    factor = random_component(rng, family) if m >= 2 else None
    return GroupParameters(factor, tuple(random_component(rng, family) for _ in range(m)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])

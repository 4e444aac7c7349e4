"""Discrete factor analysis for non-negative count data."""

__version__ = "0.1.0"

from .distributions import NegBin, Poisson  # noqa: E402
from .estimation import GroupFitCache, OptimizerConfig, fit_group, fit_model, fit_singleton  # noqa: E402
from .io import check_data, load_csv  # noqa: E402
from .likelihood import GroupData, model_log_lik  # noqa: E402
from .search import forward_search  # noqa: E402
from .simulate import SimSpec, simulate  # noqa: E402
from .types import (Component, Dataset, GroupParameters, ModelFamily, Partition,  # noqa: E402
                    parameter_count)

__all__ = [
    "Component", "Dataset", "GroupData", "GroupFitCache", "GroupParameters", "ModelFamily",
    "NegBin", "OptimizerConfig", "Partition", "Poisson", "SimSpec", "check_data",
    "fit_group", "fit_model", "fit_singleton", "forward_search", "load_csv",
    "model_log_lik", "parameter_count", "simulate",
]

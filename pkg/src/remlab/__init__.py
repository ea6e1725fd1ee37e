"""Simulation laboratory for a two-block random energy model with a small
Gaussian perturbation, and for its limiting cascade and coalescent objects."""
from .model import (ConfigError, Configuration, DisorderRealization, ModelParams,
                    ResourceCapError, ScheduleWarning)
from .stats import Estimate, mc_merge

__version__ = "0.1.0"

__all__ = ["ConfigError", "Configuration", "DisorderRealization", "ModelParams",
           "ResourceCapError", "ScheduleWarning", "Estimate", "mc_merge", "__version__"]

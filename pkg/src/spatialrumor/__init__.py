"""Simulation and verification toolkit for the three-state spatial rumor
process on Z^d (Ignorant / Spreader / Stifler)."""

from .errors import CapacityError, ConfigError, ContractError, InvariantError, UsageError
from .lattice import (
    Boundary,
    Configuration,
    Lattice,
    Params,
    SiteState,
    apply_transition,
    count_spreader_neighbors,
    neighbors,
    site_rates,
)

__version__ = "0.1.0"

__all__ = [
    "Boundary",
    "CapacityError",
    "ConfigError",
    "Configuration",
    "ContractError",
    "InvariantError",
    "Lattice",
    "Params",
    "SiteState",
    "UsageError",
    "apply_transition",
    "count_spreader_neighbors",
    "neighbors",
    "site_rates",
]

"""Davis prices of claims, utility duality on finite and countable markets,
superreplication, and a Brownian example lab."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ArgumentError,
    ConfigError,
    DavisLabError,
    DomainError,
    InternalError,
    ModelError,
    NumericError,
)
from .utility import Utility, log_utility, power_utility, utility_from_spec
from .market import (
    CountableMarketFamily,
    FiniteMarket,
    check_no_arbitrage,
    csw_family,
    get_family,
    load_market,
    market_from_dict,
    truncate,
)
from .optim import DualSolution, PrimalSolution, duality_gap, solve_dual, solve_primal
from .superrep import Uniqueness, SuperrepResult, is_replicable, subreplicate, superreplicate
from .davis import (
    DavisInterval,
    DavisMethod,
    csw_sweep,
    davis_interval_fd,
    davis_interval_finite,
    find_oscillating_test_function,
    interval_via_supergradient,
    is_irrelevant,
)
from .kernels import BACKEND

__all__ = [
    "__version__",
    "ArgumentError",
    "ConfigError",
    "DavisLabError",
    "DomainError",
    "InternalError",
    "ModelError",
    "NumericError",
    "Utility",
    "log_utility",
    "power_utility",
    "utility_from_spec",
    "CountableMarketFamily",
    "FiniteMarket",
    "check_no_arbitrage",
    "csw_family",
    "get_family",
    "load_market",
    "market_from_dict",
    "truncate",
    "DualSolution",
    "PrimalSolution",
    "duality_gap",
    "solve_dual",
    "solve_primal",
    "Uniqueness",
    "SuperrepResult",
    "is_replicable",
    "subreplicate",
    "superreplicate",
    "DavisInterval",
    "DavisMethod",
    "csw_sweep",
    "davis_interval_fd",
    "davis_interval_finite",
    "find_oscillating_test_function",
    "interval_via_supergradient",
    "is_irrelevant",
    "BACKEND",
]

"""Secure-key capacity of time-energy high-dimensional QKD with decoy states."""
from .keyrate import KeyRateResult, key_rate, max_secure_distance, optimize_nu2, secure_key_capacity, sweep_distance
from .scenario import Scenario, ScenarioError, derive_scenario, load_config, reference_scenario

__version__ = "0.1.0"

__all__ = [
    "KeyRateResult",
    "Scenario",
    "ScenarioError",
    "derive_scenario",
    "key_rate",
    "load_config",
    "max_secure_distance",
    "optimize_nu2",
    "reference_scenario",
    "secure_key_capacity",
    "sweep_distance",
]

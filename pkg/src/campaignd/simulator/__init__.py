"""Deterministic volunteer-fleet simulator and its ground-truth ledger."""
from .ledger import compute as compute_ledger
from .rng import Xoshiro256StarStar, splitmix64
from .runner import run
from .scenario import Scenario, validate_scenario

__all__ = ["Scenario", "Xoshiro256StarStar", "compute_ledger", "run",
           "splitmix64", "validate_scenario"]

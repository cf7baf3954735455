"""Scenario catalog, declarative loading, and the verification runner."""

from .catalog import BUILTIN_NAMES, builtin, builtin_dict
from .runner import run
from .schema import Scenario, load, load_dict

__all__ = ["BUILTIN_NAMES", "Scenario", "builtin", "builtin_dict", "load", "load_dict", "run"]

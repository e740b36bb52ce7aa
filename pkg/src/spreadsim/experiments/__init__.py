"""Declarative experiment scenarios and their command line front end."""

from .config import ExperimentConfig, ConfigError, load, parse
from .scenarios import execute

__all__ = ["ExperimentConfig", "ConfigError", "load", "parse", "execute"]

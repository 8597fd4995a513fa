"""Informed importance tempering samplers, exact analysis and experiment recipes."""

import json

from . import _core
from ._core import ConfigError, complexity_grid, expected_cost, list_recipes, log_balancing, toy_pushforward

__version__ = _core.__version__

__all__ = [
    "ConfigError",
    "analyze",
    "complexity_grid",
    "expected_cost",
    "list_recipes",
    "log_balancing",
    "normalize",
    "recipe",
    "run",
    "toy_pushforward",
]


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def run(config, workers=0):
    """Run an experiment given as a dict or JSON text; returns header, rows, csv, summary, provenance."""
    out = _core.run_config(_text(config), workers)
    out["summary"] = json.loads(out["summary"])
    out["provenance"] = json.loads(out["provenance"])
    return out


def normalize(config):
    """Validated config with every default filled in."""
    return json.loads(_core.normalize_config(_text(config)))


def analyze(config):
    """Exact reference quantities for a config without sampling."""
    return json.loads(_core.analyze_config(_text(config)))


def recipe(name):
    """Config dict of a canned recipe."""
    return json.loads(_core.recipe_config(name))

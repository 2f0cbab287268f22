"""Fictitious-boundary tuning for the MFS EEG forward solver."""

import json

from . import _core
from ._core import (
    ConfigError,
    Error,
    ResumeIntegrityError,
    expected_improvement,
    mann_whitney_u,
    spiral_points,
)

__all__ = [
    "ConfigError",
    "Error",
    "ResumeIntegrityError",
    "compare",
    "expected_improvement",
    "forward",
    "mann_whitney_u",
    "oracle_checks",
    "oracle_potential",
    "preset",
    "report",
    "spiral_points",
    "tune",
]


def _text(config):
    if config is None:
        config = preset("desk")
    return config if isinstance(config, str) else json.dumps(config)


def preset(name="desk"):
    return json.loads(_core.preset(name))


def oracle_potential(position, moment, points, config=None):
    return _core.oracle_potential(_text(config), position, moment, points)


def forward(theta, position=(0.0, 0.0, 0.06), moment=(0.0, 0.0, 1.0), config=None):
    return _core.forward(_text(config), theta, position, moment)


def oracle_checks(config=None, stability_tol=1e-10):
    return _core.oracle_checks(_text(config), stability_tol)


def tune(ledger, config=None, resume=False):
    return _core.tune(_text(config), str(ledger), resume)


def compare(out_dir, config=None, threads=0, resume=False):
    return json.loads(_core.compare(_text(config), str(out_dir), threads, resume))


def report(directory):
    return json.loads(_core.report(str(directory)))

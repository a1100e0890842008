"""Rough path recursions, lifts and diffusion-limit experiments."""

import json as _json

import numpy as _np

from . import _core
from ._core import (
    InvalidArgument,
    LiftedPath,
    chen_mul,
    decompose,
    fields,
    ks_distance,
    philox4x64_10,
    rate_fit,
    run_experiment,
    scenarios,
)

__all__ = [
    "InvalidArgument",
    "LiftedPath",
    "analytic_limit",
    "chen_mul",
    "decompose",
    "fields",
    "generate",
    "holder_norm",
    "increment",
    "ks_distance",
    "philox4x64_10",
    "rate_fit",
    "run",
    "run_experiment",
    "scenarios",
    "solve_modified_equation",
    "solve_rde",
    "uniform_taus",
]


def _dump(obj):
    return obj if isinstance(obj, str) else _json.dumps(obj)


def uniform_taus(T, n):
    return _np.linspace(0.0, T, n + 1)


def generate(noise, taus, seed, path_id=0):
    """Returns (xi, Xi) with shapes (n, d) and (n, d, d)."""
    return _core.generate(_dump(noise), taus, seed, path_id)


def analytic_limit(noise):
    return _core.analytic_limit(_dump(noise))


def increment(taus, xi, Xi, s, t, convention="earlier_later"):
    return _core.increment(taus, xi, Xi, s, t, convention)


def holder_norm(taus, xi, Xi, gamma, stride=1):
    return _core.holder_norm(taus, xi, Xi, gamma, stride)


def run(field, taus, xi, Xi, y0, params=None):
    """Recursion values Y_0..Y_N as an (N + 1, e) array."""
    return _core.run(field, _dump(params or {}), taus, xi, Xi, _np.asarray(y0, dtype=float))


def solve_rde(field, path, y0, substeps=1, params=None):
    return _core.solve_rde(field, _dump(params or {}), path, _np.asarray(y0, dtype=float), substeps)


def solve_modified_equation(field, path, y0, steps_per_piece=4, params=None):
    return _core.solve_modified_equation(field, _dump(params or {}), path, _np.asarray(y0, dtype=float), steps_per_piece)

"""Regularized forced Kepler problem: periodic manifolds, shooting and reconstruction."""

import json

from ._core import (
    ConfigError,
    DomainError,
    Error,
    IntegrationError,
    InvariantError,
    UnsupportedError,
    averaged_equilibrium,
    averaged_jacobian_det,
    bifurcation_family,
    bl_value,
    command_names,
    constants,
    hamiltonian,
    integrate,
    ks_map,
    random_seed_state,
    reconstruct,
    run_cli,
    seed_state,
)
from . import _core


def certificate(k, T, dim, x0):
    """Non-degeneracy certificate of the closed orbit through x0."""
    return json.loads(_core.certificate(k, T, dim, x0))


def find_orbit(k, T, dim, eps_targets, forcing=None, seed=None):
    """Closed orbit continued through eps_targets, as a dict."""
    return json.loads(_core.find_orbit(k, T, dim, list(eps_targets), forcing, seed))


def reconstruct_orbit(orbit, forcing=None):
    """Generalized solution of an orbit dict returned by find_orbit."""
    return reconstruct(json.dumps(orbit), forcing)


__all__ = [
    "ConfigError",
    "DomainError",
    "Error",
    "IntegrationError",
    "InvariantError",
    "UnsupportedError",
    "averaged_equilibrium",
    "averaged_jacobian_det",
    "bifurcation_family",
    "bl_value",
    "certificate",
    "command_names",
    "constants",
    "find_orbit",
    "hamiltonian",
    "integrate",
    "ks_map",
    "random_seed_state",
    "reconstruct_orbit",
    "run_cli",
    "seed_state",
]

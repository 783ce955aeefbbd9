"""Gating tolerances, in one versioned table.

Overrides may only loosen a value when explicitly allowed (``--allow-loose``
on the command line); tightening is always accepted.
"""

from __future__ import annotations

import copy

from .pseudo_euclidean import ContractError

TOLERANCE_TABLE_VERSION = 1

TOLERANCES = {
    "pointwise": {
        "angle_vs_arctan": 1e-12,
        "angle_norm_identity": 1e-10,
        "fpart1": 1e-6,
        "fpart2": 1e-5,
        "fpart4": 1e-4,
        "kato": 1e-10,
        "sigma_closed_form": 1e-11,
        "hddsymm": 1e-11,
        "decomp": 1e-12,
    },
    "orders": {
        "codazzi": 1.8,
        "gauss": 1.8,
        "simons": 1.5,
        "evolution": 1.8,
        "gaussmap_static": 1.8,
        "gaussmap_flow": 1.5,
    },
    "monitors": {
        "phi_envelope": 1e-6,
        "kappa_minus_K": 1e-3,
        "h2_identity": 1e-9,
        "arctan_form": 1e-9,
        "metric_ratio": 1e-9,
        "displacement": 1e-6,
        "final_sup_H": 1e-3,
    },
    "ode": {
        "exact": 1e-8,
    },
    "gaussmap": {
        "hyperboloid": 1e-12,
        "frozen_floor": 1e-8,
    },
}

# entries where a larger number is stricter (orders); everything else is an upper bound
_LOWER_BOUNDS = {"orders"}


def resolve(overrides: dict | None = None, allow_loose: bool = False) -> dict:
    """Merge overrides into a copy of the defaults, refusing silent loosening."""
    table = copy.deepcopy(TOLERANCES)
    for group, values in (overrides or {}).items():
        if group not in table:
            raise ContractError(f"unknown tolerance group {group!r}")
        for key, value in values.items():
            if key not in table[group]:
                raise ContractError(f"unknown tolerance {group}.{key}")
            old = table[group][key]
            looser = value < old if group in _LOWER_BOUNDS else value > old
            if looser and not allow_loose:
                raise ContractError(f"override loosens {group}.{key} ({old} -> {value}); pass --allow-loose")
            table[group][key] = value
    return table

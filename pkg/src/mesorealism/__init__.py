"""Macrorealism tests (LGI, Wigner-form LGI, NSIT, AoT) for neutral-meson oscillations."""

from .params import Flavor, MesonParams, Outcome, component_widths, get_params, load_registry, validate
from .dynamics import oscillation_prob, survival_prob

__all__ = [
    "Flavor",
    "MesonParams",
    "Outcome",
    "component_widths",
    "get_params",
    "load_registry",
    "oscillation_prob",
    "survival_prob",
    "validate",
]

"""Thermal quantum correlations (discord, LQU, LQFI) of a two-qubit XYZ chain
with Dzyaloshinsky-Moriya and KSEA couplings, with brute-force oracles.

The submodules are ``model``, ``correlations``, ``oracle``, ``analysis`` and
``cli``; ``correlations.correlations`` evaluates all three measures at once.
"""

from .correlations import (
    Branch,
    BranchPair,
    CorrelationResult,
    branch_boundary,
    discord,
    high_t_coefficients,
    jz0_closed_forms,
    lqfi,
    lqu,
)
from .model import (
    BellSpectrum,
    Couplings,
    DomainError,
    EffectiveParams,
    Spectrum,
    ThermalXState,
    bell_probs,
    effective_params,
    gibbs_state,
    spectrum,
)

__version__ = "0.1.0"

__all__ = [
    "BellSpectrum", "Branch", "BranchPair", "CorrelationResult", "Couplings", "DomainError",
    "EffectiveParams", "Spectrum", "ThermalXState", "bell_probs", "branch_boundary",
    "discord", "effective_params", "gibbs_state", "high_t_coefficients", "jz0_closed_forms", "lqfi",
    "lqu", "spectrum",
]

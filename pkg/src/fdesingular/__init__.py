"""Singular self-similar solutions of the fast diffusion equation u_t = Δu^m."""

from .errors import (BlowUp, ConfigError, DomainError, EmptyOverlap, FDEError, GridMismatch,
                     NoContraction, NoPlateau, NumericalFailure, PositivityLoss, RangeError,
                     StepFailure, StiffnessFailure, Vanish)
from .exponents import ExponentSet, Regime, derive_exponents, lambda_for_A, validate_asymptotics_mode
from .profile import (ProfileCurve, ProfileOptions, SelfSimilarProfile, __version__, continue_g,
                      extract_far_constant, invert, invert_to_f, local_fixed_point, solve_profile)

__all__ = [
    "BlowUp", "ConfigError", "DomainError", "EmptyOverlap", "FDEError", "GridMismatch",
    "NoContraction", "NoPlateau", "NumericalFailure", "PositivityLoss", "RangeError",
    "StepFailure", "StiffnessFailure", "Vanish", "ExponentSet", "Regime", "derive_exponents",
    "lambda_for_A", "validate_asymptotics_mode", "ProfileCurve", "ProfileOptions",
    "SelfSimilarProfile", "continue_g", "extract_far_constant", "invert", "invert_to_f",
    "local_fixed_point", "solve_profile", "__version__",
]

"""Fisher-KPP invasion in a half-plane coupled to a road with fractional diffusion."""

from .model import DerivedConstants, ModelParams, ReactionSpec, derive_constants, solve_r0

__all__ = ["DerivedConstants", "ModelParams", "ReactionSpec", "derive_constants", "solve_r0"]

"""Conformal k-Ricci (sigma_k Loewner-Nirenberg) problems: operators, closed forms, radial solver, regularity."""

from .conformal import EquationSpec, PointJet, residual
from .mesh import Annulus, Ball, BoundaryClustered, ExteriorTrunc, Uniform, build_mesh
from .profiles import exterior_ball, general_radial, interior_ball
from .regularity import classify, fit_growth, growth_coefficient
from .solver import RadialField, SolverConfig, solve_blowup, solve_dirichlet, solve_maximal
from .symfun import DomainError, gamma_margin, sigma

__version__ = "0.1.0"

__all__ = [
    "Annulus", "Ball", "BoundaryClustered", "DomainError", "EquationSpec", "ExteriorTrunc",
    "PointJet", "RadialField", "SolverConfig", "Uniform", "build_mesh", "classify",
    "exterior_ball", "fit_growth", "gamma_margin", "general_radial", "growth_coefficient",
    "interior_ball", "residual", "sigma", "solve_blowup", "solve_dirichlet", "solve_maximal",
]

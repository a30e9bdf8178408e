"""Fundamental solution and volume potentials for the plane Stokes flow past a rotating obstacle."""
from .core import KernelParams, DomainError, SingularityError
from .fundsol import gamma, gamma_eps, grad_gamma, center_constant, gamma_leading
from .fields import (SourceField, evaluate, velocity_potential, pressure_potential,
                     pde_residual, flux_carrier, rotational_lift, skew_identity_check)
from .exact import DiskSolution, BoundaryQuadrature, disk_torque, energy_balance_check
from .asymscan import DecayReport, decay_scan, fitted_bound_check

__all__ = [
    "KernelParams", "DomainError", "SingularityError",
    "gamma", "gamma_eps", "grad_gamma", "center_constant", "gamma_leading",
    "SourceField", "evaluate", "velocity_potential", "pressure_potential",
    "pde_residual", "flux_carrier", "rotational_lift", "skew_identity_check",
    "DiskSolution", "BoundaryQuadrature", "disk_torque", "energy_balance_check",
    "DecayReport", "decay_scan", "fitted_bound_check",
]

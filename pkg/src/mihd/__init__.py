"""Pseudospectral solver and diagnostics for viscous non-resistive MHD in Lagrangian form."""
__version__ = "0.1.0"

from .spectral import (Lattice, SpectralField, SpectralScalarField, SpectralVectorField, SpectralTensorField,
                       forward_transform, inverse_transform, directional_derivative, gradient, divergence,
                       laplacian, sobolev_norm, inverse_laplacian, leray_project, dealiased_product)
from .geometry import GeometryBundle, build_geometry, div_residual, div_A, grad_A, laplacian_A, recover_magnetic
from .directions import Direction, CertificationError, certify_direction, sample_direction, poincare_constant
from .pressure import PressureError, GuardViolation, PressureSolveReport, solve_pressure, pressure_source
from .evolution import (FlowState, PhysicalParams, SimConfig, Stepper, step_nonlinear, evolve_linear,
                        linear_propagator, make_initial_data, linearized_initial_data)
from .evolution.runs import TrajectoryLog, run_simulation, compare_linear, run_error_experiment
from .diagnostics import (EnergyReport, InitialParams, ErrorReport, energy_functional, dissipation_functional,
                          highest_energy_analog, energy_report, initial_params, decay_fit)

from .state import FlowState, PhysicalParams, SimConfig, dt_max
from .linear import linear_propagator, evolve_linear, LatticePropagator
from .initial import make_initial_data, linearized_initial_data, base_field, stokes_correction
from .stepper import Stepper, step_nonlinear

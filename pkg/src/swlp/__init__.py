"""Discrete realizations and verification tools for stochastic well-posed linear systems."""
from .kernels import BACKEND, available_backends, use_backend
from .spaces import DiscreteSpace, GeneratorRealization, LinearMap, SpaceError, adjoint, inner, semigroup_apply
from .stochastics import (BrownianEnsemble, McEstimate, TimeGrid, coarsen_brownian, ito_integral, mc_estimate,
                          refine_brownian, sample_brownian, stochastic_convolution)
from .system import (InputSignal, StochasticSystemRealization, control_admissibility_constant, dual_system,
                     input_map_increments, input_map_phi, observation_admissibility_constant, output_map_psi)
from .solvers import DivergenceError, PicardError, Trajectory, mild_solve_picard, mild_solve_stepping
from .estimates import (concatenation_check, gain_extension_curve, hidden_regularity_ratio, io_gain,
                        weak_residual)

__version__ = "0.1.0"

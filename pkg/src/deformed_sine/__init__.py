"""Deformed sine-kernel Fredholm determinants and their integrable structure."""
from .weights import (ConfigurationError, ProfileSpec, UnsupportedWeightError, WeightSpec,
                      eval_weight, eval_weight_derivative, parse_weight, truncation_radius)
from .quadrature import Grid, gauss_legendre, integrate, pv_integrate
from .operators import (Classical, DiscreteOperator, build_conjugated_operator,
                        build_interval_operator, deformed_kernel_value, sine_kernel_value)
from .fredholm import (DetResult, DeterminantZeroError, log_det, refine_until_converged,
                       resolvent_solve, trace)

__version__ = "0.1.0"

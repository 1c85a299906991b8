"""Reaction-ultradiffusion on the finite p-adic grid G_N^n."""
from ._accel import backend, set_backend
from .approx import Constant, DigitRule, NormRule, convergence_study, embed, project, projection_error, resolvent_check
from .dynamics import IntegratorConfig, Trajectory, certify_envelope, comparison_check, envelope_bounds, integrate, picard_mild
from .energy import EnergyBreakdown, energy, gradient
from .grid import GridIndex, GridParams, LevelTree, enumerate_grid, valuation
from .kernel import RadialKernel, normalize, truncate
from .operator import UltradiffOperator, build, matvec_dense, matvec_fast, semigroup_apply, spectrum, validate_qmatrix
from .reaction import Reaction, check_hypotheses, choose_constants, extreme_roots, lambda_min, step_bound
from .stationary import PatternSet, residual, solve, verify_bands

__version__ = "0.1.0"

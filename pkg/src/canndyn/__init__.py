"""Numerical toolkit for a size-structured cannibalism model with
infinite-dimensional environmental feedback: equilibria, linear
stability/instability criteria, spectral analysis, and time-domain
simulation of the nonlinear and linearized systems."""

from .errors import (CanndynError, CFLError, ConfigError, ConvergenceError,
                     GammaBoundError, LambdaDomainError, ModelAssumptionError,
                     NoEquilibriumError, PoleError, SelectorError,
                     SeparabilityError, SimulationError)
from .grid import (Grid, GridFunction, build_grid, cumulative_integral,
                   grid_derivative, integrate)
from .ingredients import (AttackKernel, KernelTerm, ModelSpec, Rate1D, Rate2D,
                          ValidationReport, dumps_model_config, evaluate,
                          model_to_config, parse_model_config, validate_model)
from .linearization import (Linearization, StabilityVerdict,
                            TrivialStabilityResult, build_linearization,
                            dissipativity_margin, positivity_check,
                            trivial_stability_check)
from .spectral import (CharacteristicSample, SpectralReport, RootBracket,
                       build_spectral_report, characteristic_K,
                       characteristic_L, default_lambda_range, l_prime_zero,
                       pi_eval, proportional_attack_instability,
                       reconstruct_eigenfunction, reproduction_env_derivative,
                       resolvent_AB, scan_real_roots_K)
from .steady import (SteadyState, feedbacks_from_density, net_reproduction,
                     profile_from_feedbacks, solve_steady, trivial_steady)
from .dynamics import (AegVerdict, SimConfig, SimReport, aeg_diagnostic,
                       initial_bump, mass_balance_residual, simulate, step)

__version__ = "0.1.0"

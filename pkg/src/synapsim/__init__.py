"""Event-driven simulation and averaging-limit verification for slow-fast
stochastic models of spike-timing-dependent plasticity."""

from .functions import FunctionSpec, affine, affine_clipped, constant, piecewise_linear, saturating
from .model import (Bounds, InvalidModelError, ModelSpec, NSpecs, SystemState,
                    ValidatedModel, validate_spec, validated)
from .point_process import (EventStream, ShotNoisePath, next_jump_thinned,
                            sample_homogeneous, shot_noise_laplace, shot_noise_mean,
                            simulate_interacting_shot_noise, simulate_shot_noise)
from .flow import FlowResult, flow_state
from .simulator import (BetaWeighted, CoupledPair, DominatingConstants,
                        PolyFunctional, Trajectory, dominating_model,
                        occupation_functional, simulate, simulate_coupled,
                        simulate_dominating, simulate_fast, simulate_truncated)
from .equilibrium import (EquilibriumEstimate, LinearLimitCoefficients,
                          dominating_moments, dominating_psi, estimate_pi,
                          simple_model_coefficients)
from .limit_ode import (BlowupSolution, LimitSolution, SweepReport,
                        blowup_from_model, blowup_solution, convergence_sweep,
                        solve_limit_ode)
from .discrete import (DiscreteParams, DiscreteState, simulate_discrete,
                       simulate_discrete_coupled, simulate_discrete_fast,
                       simulate_discrete_limit)

__version__ = "0.1.0"

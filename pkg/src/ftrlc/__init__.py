"""Adaptive and optimistic FTRL controllers for linear dynamical systems."""

from ._kernels import NUMBA_ACTIVE, backend_name
from .controllers import (BasicFtrlController, BoundConstants, ControllerKind,
                          FtrlController, GpcController, OptimisticController,
                          run_episode)
from .costs import (CostSpec, SensitivityState, advance_sensitivity, cost,
                    epsilon_signal, g_signal, gradient)
from .environments import (ScenarioSpec, builtin_names, builtin_scenario,
                           gen_predictions, get_scenario, load_scenario,
                           scenario_from_dict)
from .errors import (ConfigError, ControlError, DimensionMismatch,
                     DisturbanceBoundError, SolverError,
                     UnsupportedConfiguration)
from .hindsight import (ApproxGapReport, BoundReport, HindsightResult,
                        dac_approx_gap, evaluate_regret, linear_argmin,
                        regret_report, solve_p1, stationary_cost,
                        theorem_bound)
from .lti import (DisturbanceWindow, StepRecord, SystemModel,
                  recover_disturbance, rollout_stationary, spectral_radius,
                  step)
from .policy import FeasibleSet, PolicyParams, action, block_norm_sum, project
from .schedules import (DecayedWindowSum, ScheduleState, Variant, check_lemma4,
                        decayed_double_sum, sigma_scale_for)
from .trace import RunTrace

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

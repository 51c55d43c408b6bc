"""Variance-aware utility maximisation: online allocator, stationary and offline solvers."""
from .avr import AvrState, AvrTrace, avr_init, avr_step, run_avr
from .constraint import ConstraintSet, ConstraintSpec, wn, wne, wnt
from .errors import ConvergenceError, DomainError, SizeError, ValidationError
from .metrics import GapReport, gap_experiment, phi_T, var_T
from .offline import Trajectory, kkt_residual_opt_T, project_slot, solve_opt_T
from .process import ConstraintProcess, iid, markov, sample_path, stationary_distribution
from .scenario import Scenario, load_scenario, random_scenario, scenario_from_dict
from .slot import SlotSolution, Theta, h_gradient, h_value, kkt_residual_optavr, solve_optavr
from .stationary import (StationarySolution, kkt_residual_optstat, lyapunov_descent_check,
                         phi_pi, solve_fixed_point, solve_optstat_direct, var_pi)
from .utility import (UserSpec, alpha_fair, linear_penalty, linear_reward, log_shifted,
                      power_penalty, validate_assumptions)

__version__ = "0.1.0"

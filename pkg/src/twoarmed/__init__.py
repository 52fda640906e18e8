"""Two-armed bandit (linear reward-inaction) stochastic approximation toolkit."""

from .bandit import BanditParams, Trajectory, coupled_pair, monotone_flags, simulate_batch, simulate_path, step
from .bounds import (
    beta_limit_moment,
    failure_lb_constant,
    interior_mass_formula,
    moment_ub,
    success_lb_constant,
)
from .estimators import MonteCarloAbsorption, OperatorAbsorption
from .markov import GridFunction, absorption_solve, p_gamma_apply, psi_neumann, q_gamma_apply
from .mean_field import mean_path, mean_rate_band, ode_flow, path_rate_diagnostic
from .montecarlo import ClassifierConfig, McEstimate, Outcome, classify, estimate_interior_mass, estimate_moments, run_batch
from .noise import DriverNoise
from .polya import urn_bandit_equivalence, urn_path
from .schedule import (
    Constant,
    Custom,
    Fallibility,
    PowerI,
    RatioForm,
    StepSchedule,
    big_gamma,
    classify_power_I,
    classify_power_III,
    delta_s,
    diagnostics_fallibility,
    gamma,
    tail_sq_sum_ub,
)
from .stopping import RanOut, StoppingCertificate, error_bound, monitor, monitor_path

__version__ = "0.1.0"

"""Value iteration with certified span-contraction rates.

Solvers for discounted and average-reward tabular MDPs (synchronous, damped,
and asynchronous sweeps), exact policy-iteration/enumeration oracles, and an
analysis layer that certifies and empirically verifies geometric convergence
strictly faster than the discount factor under ergodicity and unique-optimum
conditions.
"""

from .analysis import (
    CheckReport,
    ContractionConstants,
    RateEstimate,
    action_gap,
    async_contraction_certificate,
    average_contraction_certificate,
    certificate_dict,
    check_ergodic,
    contraction_certificate,
    damped_contraction_certificate,
    estimate_rate,
    iteration_bound_average,
    iteration_bound_discounted,
    lock_in_index,
    verify_async_window_contraction,
    verify_damped_window_contraction,
    verify_sandwich,
    verify_step_span_bound,
    verify_window_contraction,
    wielandt_bound,
)
from .generators import (
    GenerationError,
    GeneratorSpec,
    random_ergodic_mdp,
    round_robin_schedule,
    tight_gamma_mdp,
)
from .mdp import (
    AssumptionViolation,
    CapabilityError,
    DiscountSpec,
    Mdp,
    NumericalFailure,
    bellman_backup,
    exact_optimal,
    greedy_policy,
    is_eps_optimal,
    policy_evaluation_average,
    policy_evaluation_discounted,
    policy_matrix,
    policy_rewards,
    span,
)
from .solvers import (
    SolveTrace,
    SolverConfig,
    UpdateSchedule,
    discounted_value_estimate,
    solve,
    stopping_threshold,
    vi_async_lr,
    vi_sync,
    vi_sync_lr,
)

__all__ = [
    "AssumptionViolation",
    "CapabilityError",
    "CheckReport",
    "ContractionConstants",
    "DiscountSpec",
    "GenerationError",
    "GeneratorSpec",
    "Mdp",
    "NumericalFailure",
    "RateEstimate",
    "SolveTrace",
    "SolverConfig",
    "UpdateSchedule",
    "action_gap",
    "async_contraction_certificate",
    "average_contraction_certificate",
    "bellman_backup",
    "certificate_dict",
    "check_ergodic",
    "contraction_certificate",
    "damped_contraction_certificate",
    "discounted_value_estimate",
    "estimate_rate",
    "exact_optimal",
    "greedy_policy",
    "is_eps_optimal",
    "iteration_bound_average",
    "iteration_bound_discounted",
    "lock_in_index",
    "policy_evaluation_average",
    "policy_evaluation_discounted",
    "policy_matrix",
    "policy_rewards",
    "random_ergodic_mdp",
    "round_robin_schedule",
    "solve",
    "span",
    "stopping_threshold",
    "tight_gamma_mdp",
    "verify_async_window_contraction",
    "verify_damped_window_contraction",
    "verify_sandwich",
    "verify_step_span_bound",
    "verify_window_contraction",
    "vi_async_lr",
    "vi_sync",
    "vi_sync_lr",
    "wielandt_bound",
]

"""Tools for attacking a target node from compromised neighbors."""

from .linalg import Ambiguous, Unique, det_leibniz, det_mod, matrix_solve, rank_mod, rref
from .probability import (
    SpCensus,
    SpEstimate,
    closed_form_invertible_count,
    cross_check,
    estimate_sp,
    exact_sp_small,
    star_assignment,
    wilson_interval,
)
from .recovery import (
    AttackSystem,
    RecoveryReport,
    attack_star_state,
    bruteforce_oracle,
    build_attack_system,
    ground_truth_system,
    impersonation_accepted,
    impersonation_trials,
    recover_secret,
    star_topology,
    recovery_trials,
    true_unknowns,
)

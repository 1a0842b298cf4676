"""Equilibrium computation in monotone imperfect-information games via regularised FoReL dynamics."""

from .anchoring import (AnchorDecomposition, AnchorSchedule, AnchorStep, iterate_anchors, kl_contraction_check,
                        lemma6_decomposition, solve_transformed)
from .diagnostics import (DiagnosticsRecord, RateFit, fit_decay_rate, lyapunov_J, matrix_qre, recurrence_stat,
                          xi_divergence)
from .dynamics import (DynamicsState, EtaSchedule, Trajectory, divergence_check, equivalence_check, euler_step,
                       heun_step, initial_state, rk4_step, run, vector_field)
from .errors import (ConfigError, DomainError, FitError, IncompletePolicyError, IntegrationError,
                     InvalidGameError, NumericError, RegNashError, SpecError, UnsupportedError)
from .game import Chance, Decision, GameTree, Terminal, validate
from .games import (build_kuhn_poker, build_leduc_poker, build_matrix_game, build_polymatrix_game,
                    kuhn_equilibrium, make_game, matrix_nash, matrix_payoff)
from .policy import Policy, read_policy, write_policy
from .regularizers import ENTROPY, L2, Regularizer
from .transforms import TransformedReward, TransformSpec, expected_penalty_decomposition, transformed_reward
from .values import (ReachTable, ValueTable, best_response, monotonicity_gap, nash_conv, reach_probs,
                     root_values, value_tables)

__version__ = "0.1.0"

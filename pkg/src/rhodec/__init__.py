"""Cooperative multi-agent planning with belief-dependent rewards.

A toolkit for decentralized information gathering: discrete models with
entropy penalties on the joint belief, optimal joint-policy search,
closed-loop simulators with periodic communication, a continuous
Kalman-filter tracking testbed, and a text exchange format with a CLI.
"""

from .errors import (CombinatorialLimit, DimensionError, ImpossibleObservation,
                     InsufficientData, ModelFormatError, ModelSyntaxError,
                     NumericalFailure, ResourceExhausted, RhodecError,
                     StochasticityError)
from .filtering import (FilterResult, belief_from_history, belief_update,
                        belief_update_all, rho_reward, shannon_entropy)
from .mav import (BASELINE_KINDS, MavDomainParams, build_mav_domain,
                  detection_distribution, make_baseline_policy, sensor_sigma)
from .model import (Belief, RhoDecPomdp, Violation, flatten_index,
                    unflatten_index, uniform_belief, validate_model)
from .modelfile import (parse_model, policy_from_dict, policy_to_dict,
                        write_model)
from .policy import (EvalLeaf, JointPolicy, LocalPolicyTree, PartialJointPolicy,
                     PolicyCounts, count_local_policies, enumerate_decision_rules,
                     evaluate_partial_policy, history_probability, policy_value)
from .search import (SearchNode, SolveResult, centralized_pomdp_bound, mdp_bound,
                     solve_maastar)
from .simulate import (EpisodeConfig, EpisodeTrace, StepRecord, SweepRow,
                       aggregate_stats, prior_sweep_evaluation, run_batch,
                       run_episode)
from .tracking import (KalmanEstimate, ObserverSpec, TrackingResult,
                       TrackingScenario, TrackingStepModel, build_tracking_model,
                       differential_entropy, discretize_belief, kf_step,
                       sector_overlap_fraction, simulate_tracking)

__version__ = "0.1.0"

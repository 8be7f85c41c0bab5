"""Communication-aware UAV trajectory laboratory.

SINR radio maps over synthetic cities, from-scratch deep Q-learning for
trajectory planning, and transfer-learning studies across environments.
"""

__version__ = "0.1.0"

from .agent import (Agent, EpisodeRecord, Hyperparams, ReplayBuffer, Rollout,
                    TrainResult, ddqn_target, dqn_target, greedy_rollout,
                    scratch_hyperparams, select_action, train,
                    training_complete, transfer_hyperparams)
from .cityworld import (ACTION_DELTAS, ACTION_NAMES, N_ACTIONS, CityMap,
                        MdpState, MissionSpec, Profile, PROFILES,
                        RewardConstants, StepOutcome, UavEnv, apply_emergency,
                        check_constraints, compute_reward,
                        episode_outage_count, generate_city, make_env,
                        mission_spec, nearest_bs_to_target)
from .harness import (AlgoComparisonReport, ComparisonReport, EvalReport,
                      checksum_file, evaluate_policy, export_curves,
                      greedy_policy_grid, moving_average, read_metrics_csv,
                      run_algo_comparison, run_transfer_study, save_run,
                      windowed_reward_stats, write_comm_csv, write_manifest,
                      write_metrics_csv)
from .neural import (Gradients, NetworkParams, OptimizerState,
                     WeightsFormatError, clone_network, forward,
                     gradient_global_norm, init_network, load_weights,
                     loss_and_gradients, optimizer_step, save_weights, td_loss)
from .radiomap import (BaseStation, Building, PropagationParams, RadioMap,
                       RadioMapFormatError, SinrModel, antenna_gain,
                       array_factor, build_radio_map, element_pattern, is_los,
                       load_radio_map, log_distance_path_loss, outage,
                       path_loss, sample_fading, save_radio_map, simple_rss,
                       sinr_at)
from .transfer import (StageResult, StageSpec, TransferPlan,
                       convergence_speedup, default_env_factory, run_ctl,
                       run_stage, stage_rngs, with_rewards)
from .units import db_to_linear, linear_to_db, wrap_angle_deg

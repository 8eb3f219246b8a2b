"""Seed-reproducible simulator of wireless VR service over small cells.

Layers, bottom up: channel (propagation and SINR), vrqos (pose tracking,
delays, the multi-attribute utility), game (action spaces, mixed
strategies, payoff tables, equilibrium checks), evaluate (joint-action
pricing), esn (the echo-state predictor), learners (ESN self-play plus
baselines), harness (episodes and sweeps), cli (command line).
"""

from .config import ScenarioConfig, dbm_to_watts, load_config, save_config, watts_to_dbm
from .channel import (
    NetworkState,
    channel_gain,
    downlink_sinr,
    draw_fading,
    link_rate,
    place_scenario,
    uplink_sinr,
)
from .vrqos import (
    LinkQos,
    QosBreakdown,
    SyntheticTrajectory,
    TrackingEncoding,
    TrackingVector,
    UplinkChange,
    correction_bits,
    corrupt_tracking,
    decode_tracking,
    delay_utility,
    demand_rate,
    encode_tracking,
    gain_downlink,
    gain_downlink_large_delta,
    gain_downlink_small_delta,
    gain_uplink,
    max_delay,
    processing_delay,
    total_delay,
    total_utility,
    tracking_accuracy,
    transmission_delay,
    worst_case_error,
)
from .game import (
    Action,
    GameTable,
    InfeasibleActionError,
    MixedStrategy,
    average_utility,
    count_actions,
    enumerate_actions,
    epsilon_greedy,
    expected_utility,
    load_profile,
    load_table,
    save_profile,
    save_table,
    uniform_strategy,
    validate_action,
    verify_mixed_ne,
    worst_case_probability,
)
from .evaluate import QosEvaluator, build_game_table, sbs_utility, standalone_utility
from .esn import (
    EsnState,
    check_unambiguity,
    init_esn,
    load_esn,
    predict,
    robbins_monro_schedule,
    save_esn,
    train_step,
    update_reservoir,
)
from .learners import (
    EsnPolicy,
    QLearningPolicy,
    esn_play_slot,
    exhaustive_optimal,
    proportional_fair_allocate,
    q_learning_slot,
)
from .harness import (
    Metrics,
    SweepSpec,
    cap_association,
    convergence_iterations,
    delay_cdf,
    derive_seed,
    run_episode,
    run_sweep,
    write_episode_csv,
    write_sweep_csv,
)

__version__ = "0.1.0"

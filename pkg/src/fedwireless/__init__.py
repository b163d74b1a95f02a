"""Simulator and optimizer for federated learning over a wireless uplink.

The package models per-link rates, delays, packet errors, and energy;
solves the joint user-selection / resource-block / power problem with a
Hungarian matching; runs the lossy federated training loop; and evaluates
the analytical convergence bound against measured trajectories.
"""

from .phy import (
    NOISE_DENSITY_W_PER_HZ,
    FadingExpectation,
    NetworkParams,
    UserProfile,
    channel_gain,
    expected_downlink_rate,
    expected_uplink_rate,
    downlink_delay,
    packet_error_rate,
    training_energy,
    uplink_delay,
    user_energy,
)
from .assignment import (
    AllocationDecision,
    EdgeWeightMatrix,
    OptimalPower,
    baseline_min_sum_per,
    baseline_optselect_randomrb,
    baseline_random_all,
    brute_force_assign,
    build_edge_weights,
    edge_weight,
    feasible_power_interval,
    hungarian_assign,
    optimal_power,
    verify_allocation,
)
from .training import (
    Dataset,
    RoundOutcome,
    TrainingDiverged,
    aggregate,
    generate_regression_data,
    global_loss,
    least_squares_model,
    local_loss_and_gradient,
    local_update,
    run_training,
    transmit,
)
from .bounds import (
    BoundSeries,
    CurvatureEstimate,
    GradientBoundFit,
    asymptotic_gap,
    bound_series,
    check_gradient_bound,
    contraction_factor,
    convergence_slope_limit,
    curvature,
    empirical_gap,
    excess_loss_bound,
    fit_gradient_bound,
    slope_guarantees_convergence,
    wireless_error_sum,
    worst_case_error_sum,
)
from .config import ConfigError, ExperimentConfig, load_config, save_config, serialize_config
from .harness import (
    RunRecord,
    bound_report,
    build_topology,
    export_csv,
    place_users,
    run_experiment,
    sweep,
)

__version__ = "0.1.0"

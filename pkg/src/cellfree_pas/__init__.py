"""Uplink power-allocation game simulator for cell-free massive MIMO."""

from .config import (
    ExperimentConfig,
    FrameConfig,
    GameConfig,
    LayoutConfig,
    config_from_dict,
    load_config,
)
from .propagation import (
    LargeScaleState,
    Layout,
    build_large_scale,
    generate_layout,
    large_scale_gain,
    spatial_correlation,
    wrap_distance,
)
from .association import (
    ClusterAssignment,
    assign_pilots_and_clusters,
    cluster_gains,
    effective_cluster_gain,
)
from .channel import (
    ChannelEnsemble,
    build_ensemble,
    draw_channels,
    estimation_covariances,
    mmse_estimate,
    pilot_observation,
    resolve_pilot_powers,
)
from .receiver import (
    SinrReport,
    build_combiner,
    evaluate_profiles,
    monte_carlo_sinr,
    spectral_efficiency,
)
from .game import (
    GameState,
    NashCertificate,
    best_response,
    certify_epsilon_nash,
    improvement,
    payoff,
    potential,
    run_game,
)
from .harness import (
    ExperimentResult,
    MetricsReport,
    emit_report,
    greedy_pas,
    run_convergence,
    run_experiment,
    run_metrics_vs_k,
    sweep_alpha,
)
from .kernels import active_backend

__version__ = "0.1.0"

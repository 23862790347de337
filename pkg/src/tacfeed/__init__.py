"""tacfeed: link-level simulator for FDD massive-MIMO downlink CSI acquisition.

The package models a base station that sounds the downlink with cyclically
shifted FFT pilots, mobile stations that observe the resulting time-domain
aggregate channel (TAC), and the delay-domain aligning / Kalman tracking /
dimension-reduced feedback chain that lets the base station reconstruct
per-antenna CSI from a handful of scalars per channel path.
"""

__version__ = "0.1.0"

from .errors import (
    AlignmentError,
    ConfigError,
    NumericalError,
    ProtocolError,
    UnsupportedRegimeError,
    ValidationError,
)
from .channel import (
    ChannelRealization,
    OneRingConfig,
    PathSupport,
    SpatialCovariance,
    evolve,
    generate_initial,
    matrix_sqrt,
    one_ring_covariance,
)
from .pilots import (
    FoldedTac,
    PilotConfig,
    TacVector,
    compute_tac,
    cyclic_shift_matrix,
    fold_tac,
    rx_pilot_signal,
    sample_group,
    zadoff_chu,
)
from .align import (
    DeltaSet,
    GroupPartition,
    delta_allowed,
    delta_candidates,
    delta_cycle_set,
    delta_schedule,
    measurement_matrix_dumb,
    measurement_matrix_smart,
    orthogonality_check,
    permutation,
    remainder_partition,
)
from .mmse import GroupObservation, mmse_error_cov, mmse_estimate
from .tracking import (
    KalmanState,
    KldBasis,
    block_diag_project,
    initial_joint_state,
    initial_tap_states,
    kalman_step_smart,
    kalman_step_smart_decoupled,
    kld_inverse,
    kld_transform,
    mse_only_step,
)
from .feedback_smart import (
    BsMirror,
    CompressionZ,
    bs_kalman_step_recovery,
    bs_recovery_predict,
    compress_feedback,
    initial_recovery_state,
    optimal_z,
)
from .feedback_dumb import (
    CodebookMessage,
    CompressionQ,
    RoundContext,
    allocate_budget,
    bs_kalman_step_dumb,
    dft_codebook_q,
    dft_rayleigh_scores,
    dumb_predict,
    group_pred_blocks,
    householder_q,
    initial_dumb_state,
    optimal_q,
    optimal_q_block,
    optimal_scores,
    signalling_round,
)
from .metrics import (
    PrecoderSet,
    build_precoders,
    frequency_rows,
    nmse,
    precode_and_se,
    reconstruct_frequency,
    spectral_efficiency,
)
from .config import ScenarioConfig, load_config
from .harness import (
    CSV_HEADER,
    ResultRecord,
    emit,
    perfect_csi_se,
    run_scenario,
    run_scenarios,
    user_support,
)

__all__ = [
    "AlignmentError",
    "ConfigError",
    "NumericalError",
    "ProtocolError",
    "UnsupportedRegimeError",
    "ValidationError",
    "ChannelRealization",
    "OneRingConfig",
    "PathSupport",
    "SpatialCovariance",
    "evolve",
    "generate_initial",
    "matrix_sqrt",
    "one_ring_covariance",
    "FoldedTac",
    "PilotConfig",
    "TacVector",
    "compute_tac",
    "cyclic_shift_matrix",
    "fold_tac",
    "rx_pilot_signal",
    "sample_group",
    "zadoff_chu",
    "DeltaSet",
    "GroupPartition",
    "delta_allowed",
    "delta_candidates",
    "delta_cycle_set",
    "delta_schedule",
    "measurement_matrix_dumb",
    "measurement_matrix_smart",
    "orthogonality_check",
    "permutation",
    "remainder_partition",
    "GroupObservation",
    "mmse_error_cov",
    "mmse_estimate",
    "KalmanState",
    "KldBasis",
    "block_diag_project",
    "initial_joint_state",
    "initial_tap_states",
    "kalman_step_smart",
    "kalman_step_smart_decoupled",
    "kld_inverse",
    "kld_transform",
    "mse_only_step",
    "BsMirror",
    "CompressionZ",
    "bs_kalman_step_recovery",
    "bs_recovery_predict",
    "compress_feedback",
    "initial_recovery_state",
    "optimal_z",
    "CodebookMessage",
    "CompressionQ",
    "RoundContext",
    "allocate_budget",
    "bs_kalman_step_dumb",
    "dft_codebook_q",
    "dft_rayleigh_scores",
    "dumb_predict",
    "group_pred_blocks",
    "householder_q",
    "initial_dumb_state",
    "optimal_q",
    "optimal_q_block",
    "optimal_scores",
    "signalling_round",
    "PrecoderSet",
    "build_precoders",
    "frequency_rows",
    "nmse",
    "precode_and_se",
    "reconstruct_frequency",
    "spectral_efficiency",
    "ScenarioConfig",
    "load_config",
    "CSV_HEADER",
    "ResultRecord",
    "emit",
    "perfect_csi_se",
    "run_scenario",
    "run_scenarios",
    "user_support",
]

"""Covert-transmission-aided mmWave ISAC beamformer design library."""

from .errors import (
    BracketError,
    CovertIsacError,
    DegenerateTest,
    Infeasible,
    InfeasibleDesign,
    InvalidFilter,
    InvalidGeometry,
    InvalidStats,
    RankDeficient,
    SensingInfeasible,
    SingularDenominator,
    ZeroMatrix,
)
from .model import (
    BeamformerSolution,
    ChannelSet,
    ConstraintAudit,
    HypothesisStats,
    PerformanceReport,
    SensingScene,
    SystemConfig,
    audit_solution,
    beampattern,
    db_to_lin,
    default_config,
    default_scene,
    detection_error_exact,
    detection_probability,
    generate_channels,
    hypothesis_stats,
    kl_divergence,
    lin_to_db,
    performance_report,
    pinsker_bound,
    random_channel_set,
    random_geometry,
    sensing_sinr,
    sinr_and_rates,
    solve_gamma_cap,
    steering,
)
from .marcum import marcum_q1
from .numerics import (
    QcqpOneProblem,
    QcqpProjector,
    generalized_rayleigh_max,
    max_quadratic_on_ball,
    rank1_extract,
    scalar_root,
    solve_qcqp1,
)
from .sdp import LinearFunctional, LmiConstraint, LmiTermBlock, SdpProblem, SdpSolution, solve_sdp
from .fdbf import (
    FdbfOptions,
    FdbfTrace,
    ball_leak_margin,
    build_robust_sdr_problem,
    build_sdr_problem,
    design_basis,
    recover_beams,
    restore_ball_covertness,
    solve_fdbf,
    update_receive_filter_fd,
)
from .hbf import (
    AlState,
    HbfOptions,
    HbfTrace,
    al_value,
    mse_value,
    solve_hbf,
    step_duals,
    step_g,
    step_m,
    step_t,
    step_vd,
    step_vrf,
    step_y,
    update_receive_filter_hbf,
    wmmse_scalars,
)
from .baselines import (
    PowerSplit,
    mrt_overt_beams,
    solve_baseline_covert,
    solve_comm_only,
    solve_ts_hbf,
    zf_overt_beams,
)
from .oracles import ball_sample_verifier, brute_qcqp, mc_willie_detector, numeric_kl
from .harness import (
    ExperimentSpec,
    emit_beampattern,
    make_instance,
    run_experiment,
    run_scheme,
    write_rows,
)

__version__ = "0.1.0"

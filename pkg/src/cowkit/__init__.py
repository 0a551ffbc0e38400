"""cowkit: COW QKD link simulation, dual-detector throughput modeling,
beam-splitting-attack bounds, and multi-party one-time-pad key relay."""

from .bounds import (
    BsaInputs,
    SecurityBoundReport,
    binary_entropy,
    capacity_combined,
    capacity_individual,
    dw_rate_dual,
    dw_rate_single,
    gamma_e,
    holevo_chi,
    sweep_bounds,
)
from .config import BoundsSpec, DistillParams, ExperimentConfig, SweepSpec
from .errors import (
    ConfigError,
    CowkitError,
    KeyConsumedError,
    ParameterError,
    QberThresholdError,
)
from .multipoint import (
    KeyMaterial,
    NetworkTopology,
    chain_segments,
    equalize,
    finalize_session_key,
    network_rate,
    recover,
    validate_topology,
    xor_combine,
)
from .photonics import (
    ChannelParams,
    DetectorParams,
    RateBreakdown,
    SourceParams,
    attenuation_for_target,
    dead_time_throughput,
    dual_detector_throughput,
    ideal_count_rate,
    secure_rate,
    target_power,
    transmissivity,
)
from .session import (
    NoiseParams,
    SessionResult,
    SiftResult,
    Symbol,
    SymbolSequence,
    TimeTagStream,
    estimate_qber,
    generate_symbols,
    merge_time_tags,
    run_session,
    sift,
    simulate_detections,
)

__version__ = "0.1.0"

"""fbmclab: link-level simulation laboratory for FBMC-OQAM multi-user massive
MIMO uplinks - waveform chain, channel estimation, linear receivers, closed
form sum-rate bounds, and Monte Carlo validation harness."""

from .analysis import (
    Case,
    LinkParams,
    conditional_sinr,
    contamination_gain,
    mmse_ergodic_rate,
    power_scaling_limit,
    rate_lower_bound,
    sum_rate,
    total_error_variance,
)
from .channel import (
    MultiCellScene,
    draw_taps,
    flat_receive,
    frequency_response,
    generate_multicell_scene,
    propagate,
)
from .core import (
    InvalidParameterError,
    NumericError,
    RngStream,
    db_to_linear,
    gram,
    hermitian_solve,
    inv_uu,
    linear_to_db,
    rand_cn,
)
from .detection import (
    Combiner,
    DetectionStats,
    SerChain,
    SerResult,
    build_combiner,
    combine,
    empirical_sinr,
    measure_ser,
    measure_sinr,
    reconstruct_qam,
)
from .estimation import (
    MultiCellEstimate,
    PilotFrame,
    SingleCellEstimate,
    VirtualTraining,
    analytic_training,
    build_pilots,
    lmmse_estimate,
    lmmse_estimate_multicell,
    pilot_interference_check,
    predicted_pilot_symbols,
)
from .harness import (
    ResultRow,
    Scenario,
    emit,
    preset,
    preset_names,
    read_rows,
    run_scenario,
)
from .waveform import (
    PrototypeFilter,
    TransmultiplexerResponse,
    analyze,
    apply_cfo,
    build_iota,
    interference_grid,
    intrinsic_interference,
    ofdm_demodulate,
    ofdm_modulate,
    oqam_to_qam,
    qam_to_oqam,
    synthesize,
    transmux_response,
)

__version__ = "0.1.0"

"""Link-level simulation library for adaptive multiuser MIMO uplink detection.

Implements and benchmarks a parallel decision-feedback detector refined by
constellation-constraint reliability checks and ML candidate selection,
against successive/parallel decision feedback and exhaustive ML baselines,
in uncoded and iterative (turbo) detection-and-decoding configurations.
"""

from .channel import (
    ChannelRealization,
    NoiseSpec,
    gen_block_fading,
    gen_jakes,
    sigma_v2_from_ebn0,
    transmit,
)
from .coding import ConvCode, Interleaver, LlrBlock, bcjr_decode, conv_encode
from .constellation import (
    CandidateList,
    Constellation,
    ReliabilityVerdict,
    build_candidate_list,
    check_reliability,
    make_constellation,
    map_bits,
    nearest_distance,
    qam16,
    qpsk,
    slice_symbol,
)
from .detectors import (
    DetectionResult,
    compute_order,
    ml_detect,
    pdf_detect,
    pdfcc_detect,
    sdf_detect,
)
from .estimation import (
    ChannelEstimatorState,
    ReceiverState,
    channel_estimate_update,
    init_channel_estimator,
    init_receiver,
    rls_update,
)
from .harness import (
    ExperimentConfig,
    MseTrace,
    OpsTally,
    ResultRecord,
    count_ops,
    run_coded_sweep,
    run_mse_trace,
    run_uncoded_sweep,
    wilson_interval,
    write_csv,
)
from .idd import (
    CodedFrame,
    IddConfig,
    IddResult,
    SymbolProbTable,
    bit_prob_from_llr,
    build_idd_list,
    run_idd,
    soft_detect_llr,
    symbol_prob,
    symbol_prob_table,
)

__version__ = "0.1.0"

"""One-way forward error correction with irregular LDPC codes."""

from .decoder import (
    BatchDecodeResult,
    BeliefState,
    DecodeResult,
    DecoderConfig,
    DecodingNumericsError,
    check_node_update,
    decode,
    decode_batch,
    init_beliefs,
    variable_node_update,
)
from .fixedpoint import FixedPoint, FixedPointFormat, fixed_mul, fixed_normalize
from .matrix import (
    DesignInfeasibleError,
    ParityCheckMatrix,
    binary_entropy,
    compute_parity,
    design_matrix,
    read_alist,
    select_column_distribution,
    write_alist,
)
from .sweep import SweepRow, sweep_performance, throughput_mbps, write_sweep_csv

__all__ = [
    "BatchDecodeResult", "BeliefState", "DecodeResult", "DecoderConfig",
    "DecodingNumericsError", "DesignInfeasibleError", "FixedPoint",
    "FixedPointFormat", "ParityCheckMatrix", "SweepRow", "binary_entropy",
    "check_node_update", "compute_parity", "decode", "decode_batch",
    "design_matrix", "fixed_mul", "fixed_normalize", "init_beliefs",
    "read_alist", "select_column_distribution", "sweep_performance",
    "throughput_mbps", "variable_node_update", "write_alist", "write_sweep_csv",
]

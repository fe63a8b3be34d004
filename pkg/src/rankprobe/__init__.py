"""Desk-scale laboratory for the redundancy/query-time trade-off of
succinct rank structures: an instrumented cell-probe simulator, counter
structures with a tunable redundancy ladder, an answer-entropy lab, an
encode/decode accounting engine, and a probe-elimination driver."""

from .bits import BitArray, BitString
from .errors import RefusalError
from .model import (
    CellMemory,
    CorruptFootprint,
    Footprint,
    ProbeTrace,
    PublishedBits,
    QueryBlocks,
    SimulationFault,
    build_footprint,
    probes_of_set,
    replay_from_footprint,
    run_query,
)
from .structures import (
    StructureLayout,
    StructureStats,
    build_naive,
    build_recursive,
    build_two_level,
    max_stage,
    rank,
    rank_oracle,
    structure_stats,
)
from .entropy import (
    EntropyReport,
    LabConfig,
    MonteCarloReport,
    analytic_deficit,
    binom_entropy,
    binom_entropy_estimate,
    binom_entropy_exact,
    block_deficit,
    block_deficit_argmin,
    brute_force_deficit,
    montecarlo_deficit,
    reference_entropy,
)
from .encoding import (
    CorruptEncoding,
    EncodingRecord,
    SizeAccounting,
    choose_offset,
    decode,
    detached_queries,
    encode,
    size_accounting,
)
from .elimination import (
    EliminationRow,
    EliminationTrajectory,
    eliminate_round,
    overlap_probability,
    run_elimination,
)

__version__ = "0.1.0"

"""Probe-elimination driver.

The experiment: publish a structure's redundancy, then repeatedly pick a
fresh block partition whose block count is gamma times the published-bit
total, publish every cell the partition's reference queries probe, and
watch the average charged probe count fall.  Publishing is probe-cost
discounting: a published cell reads free, so each round's published
cells shrink later traces.

Published bits grow by the exact law |new cells| * (word_bits +
address_bits) per round; the bootstrap itself costs exactly the
structure's redundancy.  The trajectory stops when queries are nearly
free (average below 0.01 probes), when the published total passes the
saturation fraction of n, when the block count would exceed n, or at the
round cap.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .entropy import LabConfig
from .model import QueryBlocks, probes_of_set, run_query
from .structures import StructureLayout

EXHAUSTIVE_LIMIT = 1 << 14


@dataclass
class EliminationRow:
    round: int
    published_bits: int      # P_i at round start
    block_count: int         # k_i = ceil(gamma * P_i)
    overlap_prob: float      # P(uniform query's probes hit published cells)
    avg_probes_before: float
    avg_probes_after: float
    published_cells: int     # new cells published this round


@dataclass
class EliminationTrajectory:
    structure: str
    n: int
    word_bits: int
    gamma: float
    seed: int
    status: str = "running"
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(f"# structure={self.structure} n={self.n} gamma={self.gamma} seed={self.seed} status={self.status}\n")
        out.write("round,published_bits,block_count,overlap_prob,avg_probes_before,avg_probes_after,published_cells\n")
        for r in self.rows:
            out.write(
                f"{r.round},{r.published_bits},{r.block_count},{r.overlap_prob:.6f},"
                f"{r.avg_probes_before:.6f},{r.avg_probes_after:.6f},{r.published_cells}\n"
            )
        return out.getvalue()


def _sample_queries(n: int, sample: int, seed: int):
    if n <= EXHAUSTIVE_LIMIT:
        return list(range(n))
    rng = np.random.default_rng(seed)
    return [int(q) for q in rng.integers(0, n, size=sample)]


def _avg_probes(layout: StructureLayout, queries) -> float:
    total = 0
    for q in queries:
        total += len(run_query(layout.step, q, layout.memory, layout.published).steps)
    return total / len(queries)


def overlap_probability(layout: StructureLayout, queries=None, sample: int = 4096, seed: int = 0) -> float:
    """Fraction of queries whose undiscounted probe set intersects the
    published cells.  Probe addresses are data-independent here, so the
    uniform-query average is measured exactly (small n) or by seeded
    sampling; the published set is the one being tested against."""
    if queries is None:
        queries = _sample_queries(layout.n, sample, seed)
    published = set(layout.published.cells)
    if not published:
        return 0.0
    from .model import PublishedBits

    free = PublishedBits()  # undiscounted traces: charge everything
    hits = 0
    for q in queries:
        tr = run_query(layout.step, q, layout.memory, free)
        if any(a in published for a in tr.addresses):
            hits += 1
    return hits / len(queries)


def eliminate_round(layout: StructureLayout, round_no: int, config: LabConfig, queries, cap_blocks: bool = False):
    """One publish round.  Returns (row, saturated_blocks) where the row
    is None when k_i > n and capping is off (the saturation signal)."""
    n = layout.n
    p_before = layout.published.length
    k = math.ceil(config.gamma * max(p_before, 1))
    if k > n:
        if not cap_blocks:
            return None, True
        k = n
    before = _avg_probes(layout, queries)
    ov = overlap_probability(layout, queries)
    blocks = QueryBlocks(n, k)
    _, union = probes_of_set(
        layout.step, blocks.offset_queries(0), layout.memory, layout.published
    )
    new_cells = [a for a in union if a not in layout.published.cells]
    layout.published.publish_cells(layout.memory, new_cells)
    after = _avg_probes(layout, queries)
    row = EliminationRow(
        round=round_no,
        published_bits=p_before,
        block_count=k,
        overlap_prob=ov,
        avg_probes_before=before,
        avg_probes_after=after,
        published_cells=len(new_cells),
    )
    return row, False


def run_elimination(layout: StructureLayout, config: LabConfig | None = None, max_rounds: int = 16, sample: int = 4096) -> EliminationTrajectory:
    """Drive rounds until queries are nearly free or the process saturates."""
    if config is None:
        config = LabConfig()
    n = layout.n
    traj = EliminationTrajectory(
        structure=layout.kind,
        n=n,
        word_bits=layout.memory.word_bits,
        gamma=config.gamma,
        seed=config.rng_seed,
    )
    queries = _sample_queries(n, sample, config.rng_seed)
    if not layout.published.bootstrapped:
        layout.publish_redundancy()
        if layout.published.length == 0:
            layout.published.publish_raw(1)  # floor: start from one bit
    for i in range(max_rounds):
        row, overflow = eliminate_round(layout, i, config, queries)
        if overflow:
            if config.final_full_round:
                row, _ = eliminate_round(layout, i, config, queries, cap_blocks=True)
                traj.rows.append(row)
                traj.status = "drained" if row.avg_probes_after < 0.01 else "block_overflow"
            else:
                traj.status = "block_overflow"
            return traj
        traj.rows.append(row)
        if row.avg_probes_after < 0.01:
            traj.status = "drained"
            return traj
        if layout.published.length >= config.saturation_fraction * n:
            traj.status = "saturated"
            return traj
    traj.status = "max_rounds"
    return traj

"""Instrumented cell-probe simulator.

A data structure lives in a :class:`CellMemory` of fixed-width cells.  A
query is a *step function*: called with ``(query, published, reads)`` it
returns either ``("probe", address)`` or ``("answer", value)``.  ``reads``
maps addresses to the cell contents the query has seen so far, so the step
function is a resumable decision tree.  The simulator charges one probe per
address actually read from memory; addresses already published are served
for free and never appear in the trace.

The same machinery replays queries from a :class:`Footprint` (first-seen
cell contents in probe order) instead of live memory, which is what the
encoding/decoding argument relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class SimulationFault(Exception):
    """A step function misbehaved (bad address, no progress, bad step)."""


class CorruptFootprint(Exception):
    """Replay ran out of recorded cells or saw inconsistent content."""


class CellMemory:
    """Word-addressable memory: `cell_count` cells of `word_bits` bits."""

    __slots__ = ("word_bits", "cells")

    def __init__(self, word_bits: int, cells):
        if word_bits < 1:
            raise ValueError("word width must be positive")
        self.word_bits = word_bits
        self.cells = list(cells)
        limit = 1 << word_bits
        for c in self.cells:
            if not 0 <= c < limit:
                raise ValueError("cell content wider than word")

    @property
    def cell_count(self) -> int:
        return len(self.cells)

    def read(self, address: int) -> int:
        if not 0 <= address < len(self.cells):
            raise SimulationFault(
                f"probe address {address} outside memory of {len(self.cells)} cells"
            )
        return self.cells[address]

    def total_bits(self) -> int:
        return len(self.cells) * self.word_bits

    def address_bits(self) -> int:
        # bits needed to name any cell
        return max(1, (self.cell_count - 1).bit_length())


@dataclass
class PublishedBits:
    """Bits given away for free: a bit-ledger plus free-to-read cells.

    `length` is the authoritative published-bit count.  `cells` maps the
    addresses whose contents the published bits reveal; probing those is
    free.  `extra_bits` counts published bits not tied to a whole cell
    (e.g. padding slack), kept only so the ledger stays exact.
    """

    length: int = 0
    cells: dict = field(default_factory=dict)
    bootstrapped: bool = False  # redundancy region released wholesale

    def knows(self, address: int) -> bool:
        return address in self.cells

    def publish_cells(self, memory: CellMemory, addresses) -> int:
        """Publish whole cells: content plus address, charged exactly
        (word_bits + address_bits) per *new* cell.  Returns bits added."""
        addr_bits = memory.address_bits()
        added = 0
        for a in addresses:
            if a in self.cells:
                continue
            self.cells[a] = memory.read(a)
            added += memory.word_bits + addr_bits
        self.length += added
        return added

    def publish_raw(self, bits: int) -> None:
        """Account published bits not tied to whole cells."""
        if bits < 0:
            raise ValueError("negative bit count")
        self.length += bits


@dataclass(frozen=True)
class ProbeTrace:
    """One query's charged probes, in order, plus its answer.

    Determinism contract: same memory, same published set, same query index
    always yields the identical trace.
    """

    query: int
    steps: tuple  # ((address, content), ...)
    answer: int

    @property
    def addresses(self) -> tuple:
        return tuple(a for a, _ in self.steps)


@dataclass(frozen=True)
class Footprint:
    """First-seen probed cell contents for a query set, concatenated in
    increasing query order.  Length is exactly probed_cell_count * word_bits.
    """

    bits: tuple  # cell contents, first-seen order
    probed_cell_count: int
    word_bits: int

    @property
    def length(self) -> int:
        return self.probed_cell_count * self.word_bits

    def __post_init__(self):
        if len(self.bits) != self.probed_cell_count:
            raise ValueError("footprint content count mismatch")


class QueryBlocks:
    """Partition of query indices [0, n) into k stride blocks.

    block_size = floor(n / k); the remainder tail of queries past
    k * block_size is dropped.  Offset d selects one query per block.
    """

    __slots__ = ("n", "k", "block_size")

    def __init__(self, n: int, k: int):
        if k < 1 or n < 1:
            raise ValueError("need n >= 1 and k >= 1")
        if k > n:
            raise ValueError("more blocks than queries")
        self.n = n
        self.k = k
        self.block_size = n // k

    def offset_queries(self, d: int) -> list:
        """Queries {b * block_size + d : b in [0, k)} for d in [0, block_size)."""
        if not 0 <= d < self.block_size:
            raise ValueError(
                f"offset {d} outside [0, {self.block_size})"
            )
        return [b * self.block_size + d for b in range(self.k)]


MAX_STEPS = 1 << 20  # runaway step-function guard


def run_query(step_fn, query: int, memory: CellMemory, published: PublishedBits | None = None) -> ProbeTrace:
    """Drive one query against live memory.  Published cells read free."""
    if published is None:
        published = PublishedBits()
    reads = dict(published.cells)
    steps = []
    for _ in range(MAX_STEPS):
        op, arg = step_fn(query, published, reads)
        if op == "answer":
            return ProbeTrace(query, tuple(steps), arg)
        if op != "probe":
            raise SimulationFault(f"unknown step op {op!r}")
        if arg in reads:
            continue  # free or repeated read, not charged
        content = memory.read(arg)
        reads[arg] = content
        steps.append((arg, content))
    raise SimulationFault("query exceeded step budget")


def probes_of_set(step_fn, queries, memory: CellMemory, published: PublishedBits | None = None):
    """Traces for a query set plus the union of charged addresses."""
    traces = []
    union = set()
    for q in queries:
        tr = run_query(step_fn, q, memory, published)
        traces.append(tr)
        union.update(tr.addresses)
    return traces, union


def build_footprint(step_fn, queries, memory: CellMemory, published: PublishedBits | None = None) -> Footprint:
    """First-seen probed cell contents over `queries` in increasing order."""
    if published is None:
        published = PublishedBits()
    seen = set()
    contents = []
    for q in sorted(queries):
        tr = run_query(step_fn, q, memory, published)
        for a, c in tr.steps:
            if a not in seen:
                seen.add(a)
                contents.append(c)
    return Footprint(tuple(contents), len(contents), memory.word_bits)


def replay_from_footprint(step_fn, queries, footprint: Footprint, published: PublishedBits | None = None, known: dict | None = None):
    """Re-run `queries` (increasing order) feeding probes from the footprint.

    `known` optionally pre-seeds address -> content (cells recovered by an
    earlier replay).  Returns (answers dict, address -> content map of all
    cells seen).  Raises CorruptFootprint when the recording is too short.
    """
    if published is None:
        published = PublishedBits()
    reads_global = dict(published.cells)
    if known:
        reads_global.update(known)
    cursor = 0
    answers = {}
    for q in sorted(queries):
        reads = dict(reads_global)
        steps = 0
        while steps < MAX_STEPS:
            op, arg = step_fn(q, published, reads)
            if op == "answer":
                answers[q] = arg
                break
            if op != "probe":
                raise SimulationFault(f"unknown step op {op!r}")
            if arg in reads:
                steps += 1
                continue
            if arg in reads_global:
                reads[arg] = reads_global[arg]
                steps += 1
                continue
            if cursor >= footprint.probed_cell_count:
                raise CorruptFootprint(
                    f"footprint exhausted at query {q}, address {arg}"
                )
            content = footprint.bits[cursor]
            cursor += 1
            reads_global[arg] = content
            reads[arg] = content
            steps += 1
        else:
            raise SimulationFault("query exceeded step budget")
    return answers, reads_global

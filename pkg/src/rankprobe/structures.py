"""Succinct rank structures over a cell memory.

Three builders, one layout family:

* ``build_naive``: raw bits only, rank by scanning from the start.
* ``build_two_level``: classic counter scheme, one absolute counter per
  superblock, packed relative counters per block, raw bits contiguous.
* ``build_recursive``: a staged ladder over the same constructor.  Stage t
  quadruples the scan block (BB_t = 2^(2t+4) bits, superblock = 8 * BB_t),
  so each stage trades roughly 3x less counter redundancy for a deeper
  scan.  Redundancy is strictly decreasing in t at fixed n; worst-case
  probes grow geometrically, not linearly.  This family deliberately sits
  on the systematic side of the trade-off, where redundancy r and probe
  count t obey r * t ~ n * log(n) / w and redundancy halving cannot come
  with flat probe cost.

Raw bits are stored contiguously, never compressed; padding in the last
raw cell counts toward redundancy.  The relative counter for the first
block of each superblock is always zero and is not stored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bits import BitArray
from .model import CellMemory, ProbeTrace, PublishedBits, run_query


def rank_oracle(array: BitArray, k: int) -> int:
    """Ground-truth Rank(k) = number of ones among A[1..k]."""
    return array.rank(k)


@dataclass
class StructureLayout:
    """A built structure: memory, query algorithm, and bookkeeping.

    `redundancy_region` is the address range holding everything beyond the
    raw bits; publishing it (plus the padding slack in the last raw cell)
    releases exactly `redundancy_bits` bits, after which the unpublished
    remainder is at most n bits plus one cell of slack.
    """

    memory: CellMemory
    published: PublishedBits
    redundancy_region: range
    params: dict
    step: callable

    @property
    def n(self) -> int:
        return self.params["n"]

    @property
    def kind(self) -> str:
        return self.params["kind"]

    @property
    def redundancy_bits(self) -> int:
        return self.memory.total_bits() - self.n

    @property
    def worst_probes(self) -> int:
        return self.params["worst_probes"]

    def publish_redundancy(self) -> int:
        """Free the counter region: contents plus padding slack, exactly
        redundancy_bits published.  Addresses are fixed by the layout and
        cost nothing.  Returns bits added to the ledger."""
        added = 0
        for a in self.redundancy_region:
            if a not in self.published.cells:
                self.published.cells[a] = self.memory.read(a)
                added += self.memory.word_bits
        pad = self.params["raw_cells"] * self.memory.word_bits - self.n
        added += pad
        self.published.publish_raw(added)
        self.published.bootstrapped = True
        return added


@dataclass
class StructureStats:
    redundancy_bits: int
    worst_probes: int
    avg_probes: float


def _counter_layout(array: BitArray, superblock: int, block: int, word_bits: int, kind: str, extra: dict | None = None) -> StructureLayout:
    """Shared constructor for the two-level and staged builders."""
    n = array.n
    w = word_bits
    if superblock % block or superblock <= block:
        raise ValueError("superblock must be a proper multiple of block")
    if block % w:
        raise ValueError("block size must be a whole number of cells")
    ratio = superblock // block

    raw_cells = (n + w - 1) // w
    # exact prefix counts at every 64-bit word boundary
    counts = np.bitwise_count(array.words).astype(np.int64)
    cum64 = np.concatenate(([0], np.cumsum(counts)))

    def rank_at(bit_pos: int) -> int:
        # bit_pos is a multiple of w; w divides 64 or is a multiple of 64
        if w >= 64:
            return int(cum64[bit_pos // 64])
        full = int(cum64[bit_pos // 64])
        rem = bit_pos % 64
        if rem:
            word = int(array.words[bit_pos // 64]) & ((1 << rem) - 1)
            full += word.bit_count()
        return full

    n_abs = n // superblock + 1
    abs_vals = [rank_at(s * superblock) for s in range(n_abs)]

    width = max(1, min(superblock - block, n).bit_length())
    per = w // width
    if per < 1:
        raise ValueError("counter width exceeds cell width")
    n_blocks = n // block + 1
    rel_entries = []
    for j in range(n_blocks):
        if j % ratio == 0:
            continue
        rel_entries.append(rank_at(j * block) - abs_vals[j // ratio])
    rel_cells = (len(rel_entries) + per - 1) // per

    # memory image: [raw][absolute][relative]
    cells = []
    if w == 64:
        cells.extend(int(x) for x in array.words)
    else:
        mask = (1 << w) - 1
        big = array.to_int()
        cells.extend((big >> (c * w)) & mask for c in range(raw_cells))
    cells.extend(abs_vals)
    for c in range(rel_cells):
        val = 0
        for slot in range(per):
            idx = c * per + slot
            if idx < len(rel_entries):
                val |= rel_entries[idx] << (slot * width)
        cells.append(val)

    abs_base = raw_cells
    rel_base = raw_cells + n_abs
    total = rel_base + rel_cells
    memory = CellMemory(w, cells)

    scan_max = min(block // w, raw_cells)
    worst = 1 + (1 if rel_cells else 0) + scan_max

    params = {
        "kind": kind,
        "n": n,
        "word_bits": w,
        "superblock": superblock,
        "block": block,
        "ratio": ratio,
        "width": width,
        "per_cell": per,
        "raw_cells": raw_cells,
        "abs_base": abs_base,
        "rel_base": rel_base,
        "rel_entry_count": len(rel_entries),
        "cell_count": total,
        "worst_probes": worst,
    }
    if extra:
        params.update(extra)

    return StructureLayout(
        memory=memory,
        published=PublishedBits(),
        redundancy_region=range(abs_base, total),
        params=params,
        step=step_from_params(params),
    )


def step_from_params(params: dict):
    """Rebuild a layout's query step function from its params alone.

    Probe addresses depend only on the query index, never on the data, so
    a decoder holding just the params can replay queries from recorded
    cell contents.
    """
    kind = params["kind"]
    w = params["word_bits"]
    if kind == "naive":

        def naive_step(query, published, reads):
            pos = query + 1
            hi = (pos - 1) // w
            for c in range(hi + 1):
                if c not in reads:
                    return ("probe", c)
            total = 0
            scanned = pos
            for c in range(hi + 1):
                take = min(w, scanned)
                total += (reads[c] & ((1 << take) - 1)).bit_count()
                scanned -= take
            return ("answer", total)

        return naive_step

    superblock = params["superblock"]
    block = params["block"]
    ratio = params["ratio"]
    width = params["width"]
    per = params["per_cell"]
    abs_base = params["abs_base"]
    rel_base = params["rel_base"]

    def step(query, published, reads):
        pos = query + 1
        s = pos // superblock
        j = pos // block
        a_abs = abs_base + s
        if a_abs not in reads:
            return ("probe", a_abs)
        has_rel = j % ratio != 0
        if has_rel:
            store_idx = j - j // ratio - 1
            a_rel = rel_base + store_idx // per
            if a_rel not in reads:
                return ("probe", a_rel)
        lo = (j * block) // w
        hi = (pos - 1) // w
        for c in range(lo, hi + 1):
            if c not in reads:
                return ("probe", c)
        total_count = reads[a_abs]
        if has_rel:
            slot = store_idx % per
            total_count += (reads[a_rel] >> (slot * width)) & ((1 << width) - 1)
        scanned = pos - j * block
        for c in range(lo, hi + 1):
            take = min(w, scanned)
            total_count += (reads[c] & ((1 << take) - 1)).bit_count()
            scanned -= take
        return ("answer", total_count)

    return step


def build_naive(array: BitArray, word_bits: int = 64) -> StructureLayout:
    """Raw bits only; rank scans from the front.  Redundancy = padding."""
    n = array.n
    w = word_bits
    raw_cells = (n + w - 1) // w
    if w == 64:
        cells = [int(x) for x in array.words]
    else:
        mask = (1 << w) - 1
        big = array.to_int()
        cells = [(big >> (c * w)) & mask for c in range(raw_cells)]
    memory = CellMemory(w, cells)
    params = {
        "kind": "naive",
        "n": n,
        "word_bits": w,
        "raw_cells": raw_cells,
        "cell_count": raw_cells,
        "worst_probes": raw_cells,
    }
    return StructureLayout(
        memory=memory,
        published=PublishedBits(),
        redundancy_region=range(raw_cells, raw_cells),
        params=params,
        step=step_from_params(params),
    )


def build_two_level(array: BitArray, superblock: int = 512, block: int = 64, word_bits: int = 64) -> StructureLayout:
    """Two-level counters with the classic 2^9 / 2^6 defaults."""
    return _counter_layout(array, superblock, block, word_bits, "two_level")


def _stage_params(n: int, t: int, word_bits: int = 64):
    if t < 1:
        raise ValueError("stage must be >= 1")
    ceiling = 1 << max(6, (max(n, 2) - 1).bit_length())
    block = min(1 << (2 * t + 4), ceiling)
    return 8 * block, block


def max_stage(n: int) -> int:
    """Deepest stage whose scan block is not clamped by the array size."""
    ceiling = 1 << max(6, (max(n, 2) - 1).bit_length())
    t = 1
    while 1 << (2 * (t + 1) + 4) <= ceiling:
        t += 1
    return t


def build_recursive(array: BitArray, t: int, word_bits: int = 64) -> StructureLayout:
    """Stage-t structure: BB = 2^(2t+4) bit blocks, superblock = 8 * BB.

    Redundancy shrinks by ~3.3x per stage; worst-case probes are
    2 + BB / word_bits.  Stages past max_stage(n) are rejected rather than
    silently clamped, so redundancy stays strictly decreasing in t.
    """
    if t > max_stage(array.n):
        raise ValueError(
            f"stage {t} too deep for n={array.n} (max {max_stage(array.n)})"
        )
    superblock, block = _stage_params(array.n, t, word_bits)
    return _counter_layout(
        array, superblock, block, word_bits, "recursive", {"stage": t}
    )


def rank(layout: StructureLayout, k: int) -> ProbeTrace:
    """Rank(k) via the probe simulator.  k = 0 needs no probes."""
    if not 0 <= k <= layout.n:
        raise IndexError(f"rank position {k} outside [0, {layout.n}]")
    if k == 0:
        return ProbeTrace(query=-1, steps=(), answer=0)
    trace = run_query(layout.step, k - 1, layout.memory, layout.published)
    if len(trace.steps) > layout.worst_probes:
        raise AssertionError("probe budget exceeded")  # contract violation
    return trace


def structure_stats(layout: StructureLayout, sample: int = 4096, seed: int = 0) -> StructureStats:
    """Measured probe statistics: exhaustive when n is small, otherwise a
    seeded uniform sample of queries."""
    n = layout.n
    if n <= (1 << 14):
        queries = range(n)
        count = n
    else:
        rng = np.random.default_rng(seed)
        queries = rng.integers(0, n, size=sample)
        count = sample
    total = 0
    worst = 0
    for q in queries:
        tr = run_query(layout.step, int(q), layout.memory, layout.published)
        total += len(tr.steps)
        worst = max(worst, len(tr.steps))
    return StructureStats(
        redundancy_bits=layout.redundancy_bits,
        worst_probes=worst,
        avg_probes=total / count,
    )

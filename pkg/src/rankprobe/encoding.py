"""Encoding argument engine.

The compression-versus-correlation experiment, run for real: encode a
bit array through the eyes of its own rank structure, decode it back,
and account for every bit.  A record has six components:

1. published bits (the free-bits ledger, verbatim),
2. the identity of the detached query set (size header + lexicographic
   subset index over blocks),
3. the detached answers (canonical per-increment binomial codes),
4. the footprint of the offset-0 reference queries,
5. the footprint of the detached queries,
6. every cell probed by neither, verbatim in address order.

Components 4 and 5 come in two modes: ``verbatim`` stores the raw
first-seen cell contents (exactly probed_cells * word_bits bits) and
works at any size; ``ensemble`` replaces them with exact conditional
canonical codes built by enumerating every array of the given length,
and is honest only at enumerable sizes.

Decoding replays the recorded footprints through the structure's own
step function, fills the untouched cells, answers every rank query
against the reconstructed memory, and differences consecutive answers
back into bits.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

from .bits import BitArray, BitString
from .coding import (
    CanonicalCode,
    subset_header_bits,
    subset_index_bits,
    subset_rank,
    subset_unrank,
)
from .errors import RefusalError
from .model import (
    CellMemory,
    Footprint,
    PublishedBits,
    QueryBlocks,
    build_footprint,
    probes_of_set,
    replay_from_footprint,
    run_query,
)
from .structures import StructureLayout, step_from_params

RPE1_MAGIC = b"RPE1"
ENSEMBLE_LIMIT = 14


class CorruptEncoding(Exception):
    """A record failed to parse or contradicts itself."""


@dataclass
class EncodingRecord:
    """Six components plus the chosen offset.  Sizes are bit lengths; the
    component-sum identity total == sum(sizes) holds by construction and
    is re-checked on parse."""

    published: BitString
    detached_id: BitString
    detached_answers: BitString
    foot_reference: BitString
    foot_detached: BitString
    remaining: BitString
    offset: int

    @property
    def components(self) -> tuple:
        return (
            self.published,
            self.detached_id,
            self.detached_answers,
            self.foot_reference,
            self.foot_detached,
            self.remaining,
        )

    @property
    def sizes(self) -> tuple:
        return tuple(c.length for c in self.components)

    @property
    def total_bits(self) -> int:
        return sum(self.sizes)

    # RPE1: magic, then six length-prefixed bit strings (8-byte LE bit
    # length, then the padded payload bytes), then offset as 8-byte LE.

    def to_rpe1(self) -> bytes:
        out = [RPE1_MAGIC]
        for comp in self.components:
            out.append(struct.pack("<Q", comp.length))
            out.append(comp.to_bytes())
        out.append(struct.pack("<Q", self.offset))
        return b"".join(out)

    @classmethod
    def from_rpe1(cls, blob: bytes) -> "EncodingRecord":
        if blob[:4] != RPE1_MAGIC:
            raise CorruptEncoding("bad magic")
        pos = 4
        comps = []
        for _ in range(6):
            if pos + 8 > len(blob):
                raise CorruptEncoding("truncated length header")
            (bits,) = struct.unpack("<Q", blob[pos : pos + 8])
            pos += 8
            nbytes = (bits + 7) // 8
            if pos + nbytes > len(blob):
                raise CorruptEncoding("truncated component payload")
            try:
                comps.append(BitString.from_bytes(blob[pos : pos + nbytes], bits))
            except ValueError as e:
                raise CorruptEncoding(str(e)) from None
            pos += nbytes
        if pos + 8 != len(blob):
            raise CorruptEncoding("bad trailer")
        (offset,) = struct.unpack("<Q", blob[pos : pos + 8])
        return cls(*comps, offset=offset)


# -- query sets -----------------------------------------------------------

def choose_offset(layout: StructureLayout, k: int) -> int:
    """Offset whose queries share the fewest probed cells with the
    offset-0 reference queries; ties go to the smallest offset.  Offset 0
    itself is excluded (it IS the reference)."""
    blocks = QueryBlocks(layout.n, k)
    if blocks.block_size < 2:
        raise ValueError("blocks too small to hold a nonzero offset")
    _, ref_cells = probes_of_set(
        layout.step, blocks.offset_queries(0), layout.memory, layout.published
    )
    best_d, best_overlap = None, None
    for d in range(1, blocks.block_size):
        _, cells = probes_of_set(
            layout.step, blocks.offset_queries(d), layout.memory, layout.published
        )
        overlap = len(cells & ref_cells)
        if best_overlap is None or overlap < best_overlap:
            best_d, best_overlap = d, overlap
    return best_d


def detached_queries(layout: StructureLayout, queries) -> list:
    """Greedy scan in increasing order keeping queries whose charged
    probes avoid every previously kept query's probes."""
    kept = []
    used: set = set()
    for q in sorted(queries):
        tr = run_query(layout.step, q, layout.memory, layout.published)
        addrs = set(tr.addresses)
        if addrs & used:
            continue
        kept.append(q)
        used |= addrs
    return kept


# -- answer coding --------------------------------------------------------

_BINOM_CODE_CACHE: dict = {}


def _binom_code(m: int) -> CanonicalCode:
    code = _BINOM_CODE_CACHE.get(m)
    if code is None:
        code = CanonicalCode.from_weights(
            {v: math.comb(m, v) for v in range(m + 1)}
        )
        _BINOM_CODE_CACHE[m] = code
    return code


def _increment_codes(n: int, bs: int, d: int, blocks: tuple) -> list:
    """Exact canonical codes for the detached answers, one per increment.

    The i-th detached answer minus the previous one is Binomial over the
    gap length, so the tables are a pure function of the segment lengths
    and are cached by length."""
    codes = []
    prev = 0
    for b in blocks:
        pos = b * bs + d + 1  # rank position answered by query b*bs + d
        codes.append(_binom_code(pos - prev))
        prev = pos
    return codes


# -- ensemble tables ------------------------------------------------------

_ENSEMBLE_CACHE: dict = {}


def _params_key(params: dict) -> tuple:
    return tuple(sorted((k, v) for k, v in params.items() if k != "worst_probes"))


def _ensemble_tables(layout_factory, params: dict, k: int, d: int):
    """Exact conditional footprint codes by full enumeration.

    Keyed by structure config; valid because probe addresses are
    data-independent, so the detached set and footprint lengths are the
    same for every array of the length."""
    n = params["n"]
    if n > ENSEMBLE_LIMIT:
        raise RefusalError(
            f"ensemble tables need full enumeration; n capped at {ENSEMBLE_LIMIT}"
        )
    key = (_params_key(params), k, d)
    hit = _ENSEMBLE_CACHE.get(key)
    if hit is not None:
        return hit

    blocks = QueryBlocks(n, k)
    ref_q = blocks.offset_queries(0)
    off_q = blocks.offset_queries(d)

    ref_weights: dict = {}
    det_weights: dict = {}
    det_blocks = None
    for v in range(1 << n):
        layout = layout_factory(BitArray.from_int(n, v))
        if v == 0 and _params_key(layout.params) != _params_key(params):
            raise ValueError("layout factory does not match the given params")
        det = detached_queries(layout, off_q)
        db = tuple(q // blocks.block_size for q in det)
        if det_blocks is None:
            det_blocks = db
        elif det_blocks != db:
            raise CorruptEncoding("detached set varies with data")
        det_ans = tuple(
            run_query(layout.step, q, layout.memory, layout.published).answer
            for q in det
        )
        f_ref = build_footprint(layout.step, ref_q, layout.memory, layout.published)
        f_det = build_footprint(layout.step, det, layout.memory, layout.published)
        ref_ans = tuple(
            run_query(layout.step, q, layout.memory, layout.published).answer
            for q in ref_q
        )
        rk = det_ans
        ref_weights.setdefault(rk, {}).setdefault(f_ref.bits, 0)
        ref_weights[rk][f_ref.bits] += 1
        dk = (det_ans, ref_ans)
        det_weights.setdefault(dk, {}).setdefault(f_det.bits, 0)
        det_weights[dk][f_det.bits] += 1

    tables = (
        {cond: CanonicalCode.from_weights(w) for cond, w in ref_weights.items()},
        {cond: CanonicalCode.from_weights(w) for cond, w in det_weights.items()},
        det_blocks,
    )
    _ENSEMBLE_CACHE[key] = tables
    return tables


# -- encode ---------------------------------------------------------------

def _published_bits(layout: StructureLayout) -> BitString:
    """Canonical serialization of the published ledger.

    Bootstrap publishing (the redundancy region plus padding slack) is
    laid out as region contents in address order then zero padding;
    anything published later by address arrives as (address, content)
    pairs.  The bit length always equals the ledger exactly."""
    out = BitString()
    pub = layout.published
    w = layout.memory.word_bits
    if pub.bootstrapped:
        for a in layout.redundancy_region:
            out.append_bits(pub.cells[a], w)
        pad = layout.params["raw_cells"] * w - layout.n
        out.append_bits(0, pad)
        region = set(layout.redundancy_region)
        extra = sorted(a for a in pub.cells if a not in region)
    else:
        extra = sorted(pub.cells)
    addr_bits = layout.memory.address_bits()
    for a in extra:
        out.append_bits(a, addr_bits)
        out.append_bits(pub.cells[a], w)
    if out.length != pub.length:
        raise CorruptEncoding(
            f"published ledger {pub.length} bits, serialized {out.length}"
        )
    return out


def encode(layout: StructureLayout, k: int, d: int | None = None, mode: str = "verbatim", layout_factory=None) -> EncodingRecord:
    """Encode the layout's array as a six-component record.

    `mode` picks how the two footprints are stored.  Ensemble mode needs
    `layout_factory` (array -> layout with identical params) to build its
    enumeration tables."""
    if mode not in ("verbatim", "ensemble"):
        raise ValueError(f"unknown footprint mode {mode!r}")
    n = layout.n
    blocks = QueryBlocks(n, k)
    bs = blocks.block_size
    if d is None:
        d = choose_offset(layout, k)
    if not 0 < d < bs:
        raise ValueError(f"offset {d} outside (0, {bs})")

    ref_q = blocks.offset_queries(0)
    det = detached_queries(layout, blocks.offset_queries(d))
    det_blocks = tuple(q // bs for q in det)

    comp1 = _published_bits(layout)

    comp2 = BitString()
    comp2.append_bits(len(det_blocks), subset_header_bits(k))
    idx = subset_rank(k, det_blocks)
    comp2.append_bits(idx, subset_index_bits(k, len(det_blocks)))

    det_answers = tuple(
        run_query(layout.step, q, layout.memory, layout.published).answer
        for q in det
    )
    comp3 = BitString()
    codes = _increment_codes(n, bs, d, det_blocks)
    prev = 0
    for code, ans in zip(codes, det_answers):
        code.encode_symbol(comp3, ans - prev)
        prev = ans

    f_ref = build_footprint(layout.step, ref_q, layout.memory, layout.published)
    f_det = build_footprint(layout.step, det, layout.memory, layout.published)
    w = layout.memory.word_bits

    if mode == "verbatim":
        comp4 = BitString()
        for c in f_ref.bits:
            comp4.append_bits(c, w)
        comp5 = BitString()
        for c in f_det.bits:
            comp5.append_bits(c, w)
        if comp4.length != f_ref.length or comp5.length != f_det.length:
            raise CorruptEncoding("footprint length accounting broke")
    else:
        if layout_factory is None:
            raise ValueError("ensemble mode needs a layout factory")
        ref_tab, det_tab, expected_blocks = _ensemble_tables(
            layout_factory, layout.params, k, d
        )
        if expected_blocks != det_blocks:
            raise CorruptEncoding("detached set disagrees with ensemble tables")
        ref_ans = tuple(
            run_query(layout.step, q, layout.memory, layout.published).answer
            for q in ref_q
        )
        comp4 = BitString()
        ref_tab[det_answers].encode_symbol(comp4, f_ref.bits)
        comp5 = BitString()
        det_tab[(det_answers, ref_ans)].encode_symbol(comp5, f_det.bits)

    _, ref_cells = probes_of_set(layout.step, ref_q, layout.memory, layout.published)
    _, det_cells = probes_of_set(layout.step, det, layout.memory, layout.published)
    union = ref_cells | det_cells
    comp6 = BitString()
    for a in range(layout.memory.cell_count):
        if a not in union:
            comp6.append_bits(layout.memory.read(a), w)

    return EncodingRecord(
        published=comp1,
        detached_id=comp2,
        detached_answers=comp3,
        foot_reference=comp4,
        foot_detached=comp5,
        remaining=comp6,
        offset=d,
    )


# -- decode ---------------------------------------------------------------

def decode(record: EncodingRecord, params: dict, k: int, mode: str = "verbatim", layout_factory=None) -> BitArray:
    """Rebuild the array from a record plus the structure config."""
    if mode not in ("verbatim", "ensemble"):
        raise ValueError(f"unknown footprint mode {mode!r}")
    n = params["n"]
    w = params["word_bits"]
    cell_count = params["cell_count"]
    step = step_from_params(params)
    blocks = QueryBlocks(n, k)
    bs = blocks.block_size
    d = record.offset
    if not 0 < d < bs:
        raise CorruptEncoding(f"offset {d} outside (0, {bs})")

    # component 1: published ledger.  A bootstrap prefix (region contents
    # in address order plus zero padding slack) is present exactly when
    # the length admits it with (address, content) pairs after; a fresh
    # layout has an empty ledger and parses trivially.
    published = PublishedBits()
    comp1 = record.published
    pos = 0
    region = range(params.get("abs_base", cell_count), cell_count)
    addr_bits = max(1, (cell_count - 1).bit_length())
    pad = params["raw_cells"] * w - n
    boot_bits = len(region) * w + pad
    if (
        boot_bits
        and comp1.length >= boot_bits
        and (comp1.length - boot_bits) % (addr_bits + w) == 0
    ):
        for a in region:
            published.cells[a] = comp1.read_bits(pos, w)
            pos += w
        if comp1.read_bits(pos, pad):
            raise CorruptEncoding("padding slack bits not zero")
        pos += pad
        published.bootstrapped = True
    if (comp1.length - pos) % (addr_bits + w):
        raise CorruptEncoding("published ledger has a partial entry")
    while pos < comp1.length:
        a = comp1.read_bits(pos, addr_bits)
        pos += addr_bits
        if a >= cell_count:
            raise CorruptEncoding("published address out of range")
        published.cells[a] = comp1.read_bits(pos, w)
        pos += w
    published.length = comp1.length

    # component 2: detached set identity
    comp2 = record.detached_id
    hdr = subset_header_bits(k)
    if comp2.length < hdr:
        raise CorruptEncoding("detached-id header truncated")
    j = comp2.read_bits(0, hdr)
    if j > k:
        raise CorruptEncoding("detached set larger than block count")
    idx_bits = subset_index_bits(k, j)
    if comp2.length != hdr + idx_bits:
        raise CorruptEncoding("detached-id length mismatch")
    try:
        det_blocks = subset_unrank(k, j, comp2.read_bits(hdr, idx_bits))
    except ValueError as e:
        raise CorruptEncoding(str(e)) from None
    det = [b * bs + d for b in det_blocks]

    # component 3: detached answers
    comp3 = record.detached_answers
    codes = _increment_codes(n, bs, d, det_blocks)
    pos = 0
    det_answers = []
    prev = 0
    try:
        for code in codes:
            inc, pos = code.decode_symbol(comp3, pos)
            prev += inc
            det_answers.append(prev)
    except ValueError as e:
        raise CorruptEncoding(str(e)) from None
    if pos != comp3.length:
        raise CorruptEncoding("detached answers overlong")
    det_answers = tuple(det_answers)

    # components 4 and 5: footprints
    ref_q = blocks.offset_queries(0)
    if mode == "verbatim":
        f_ref = _verbatim_footprint(record.foot_reference, w)
        ref_answers, seen_ref = replay_from_footprint(step, ref_q, f_ref, published)
        f_det = _verbatim_footprint(record.foot_detached, w)
        det_replay, seen_det = replay_from_footprint(step, det, f_det, published)
    else:
        if layout_factory is None:
            raise ValueError("ensemble mode needs a layout factory")
        ref_tab, det_tab, expected_blocks = _ensemble_tables(
            layout_factory, params, k, d
        )
        if expected_blocks != det_blocks:
            raise CorruptEncoding("detached set disagrees with ensemble tables")
        try:
            ref_sym, used = ref_tab[det_answers].decode_symbol(record.foot_reference, 0)
        except (KeyError, ValueError) as e:
            raise CorruptEncoding(str(e)) from None
        if used != record.foot_reference.length:
            raise CorruptEncoding("reference footprint overlong")
        f_ref = Footprint(ref_sym, len(ref_sym), w)
        ref_answers, seen_ref = replay_from_footprint(step, ref_q, f_ref, published)
        ra = tuple(ref_answers[q] for q in ref_q)
        try:
            det_sym, used = det_tab[(det_answers, ra)].decode_symbol(
                record.foot_detached, 0
            )
        except (KeyError, ValueError) as e:
            raise CorruptEncoding(str(e)) from None
        if used != record.foot_detached.length:
            raise CorruptEncoding("detached footprint overlong")
        f_det = Footprint(det_sym, len(det_sym), w)
        det_replay, seen_det = replay_from_footprint(step, det, f_det, published)

    for q, ans in zip(det, det_answers):
        if det_replay[q] != ans:
            raise CorruptEncoding(
                f"replayed answer {det_replay[q]} != recorded {ans} at query {q}"
            )

    # component 6: everything probed by neither query set.  The encoder's
    # probe union counts charged probes only, so published cells that were
    # read for free are carried here as well; where comp1 already revealed
    # them the two copies must agree.
    recovered = {a for a in seen_ref if a not in published.cells}
    recovered.update(a for a in seen_det if a not in published.cells)
    cells = dict(published.cells)
    cells.update(seen_ref)
    cells.update(seen_det)
    comp6 = record.remaining
    pos = 0
    for a in range(cell_count):
        if a in recovered:
            continue
        if pos + w > comp6.length:
            raise CorruptEncoding("remaining-cells component truncated")
        val = comp6.read_bits(pos, w)
        pos += w
        if a in cells and cells[a] != val:
            raise CorruptEncoding(f"cell {a} disagrees with published copy")
        cells[a] = val
    if pos != comp6.length:
        raise CorruptEncoding("remaining-cells component overlong")

    memory = CellMemory(w, [cells[a] for a in range(cell_count)])
    free = PublishedBits(length=0, cells={})
    answers = {}
    for q in range(n):
        answers[q] = run_query(step, q, memory, free).answer
    out = BitArray(n)
    prev = 0
    for i in range(1, n + 1):
        cur = answers[i - 1]
        bit = cur - prev
        if bit not in (0, 1):
            raise CorruptEncoding(f"rank answers not unit-increment at {i}")
        if bit:
            out.set(i, 1)
        prev = cur
    return out


def _verbatim_footprint(comp: BitString, w: int) -> Footprint:
    if comp.length % w:
        raise CorruptEncoding("verbatim footprint not cell-aligned")
    count = comp.length // w
    return Footprint(
        tuple(comp.read_bits(i * w, w) for i in range(count)), count, w
    )


# -- size accounting ------------------------------------------------------

@dataclass
class SizeAccounting:
    """Empirical component sizes against their analytic yardsticks."""

    records: int
    n: int
    k: int
    mean_sizes: tuple
    mean_total: float
    mean_published: float
    detached_id_reference: float  # lg C(k, ceil(eps*k)) + header slack
    deficit_reference: float      # analytic deficit at the modal offset
    modal_offset: int


def size_accounting(records: list, n: int, k: int, epsilon: float = 0.05, min_records: int = 100) -> SizeAccounting:
    """Summarize a batch of records.  Refuses small samples: means over a
    handful of records would dress noise up as measurement."""
    if len(records) < min_records:
        raise RefusalError(
            f"need at least {min_records} records, got {len(records)}"
        )
    from .entropy import analytic_deficit

    sums = [0] * 6
    for r in records:
        for i, s in enumerate(r.sizes):
            sums[i] += s
    m = len(records)
    mean_sizes = tuple(s / m for s in sums)
    offsets = sorted(r.offset for r in records)
    modal = max(set(offsets), key=offsets.count)
    j = max(1, math.ceil(epsilon * k))
    ref_bits = math.log2(math.comb(k, j)) if j <= k else 0.0
    ref_bits += subset_header_bits(k)
    deficit = analytic_deficit(n, k, modal).deficit if n // k > modal > 0 else 0.0
    return SizeAccounting(
        records=m,
        n=n,
        k=k,
        mean_sizes=mean_sizes,
        mean_total=sum(mean_sizes),
        mean_published=mean_sizes[0],
        detached_id_reference=ref_bits,
        deficit_reference=deficit,
        modal_offset=modal,
    )

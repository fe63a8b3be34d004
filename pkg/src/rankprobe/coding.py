"""Canonical prefix-free codes and lexicographic subset indexing.

Both tools are deterministic by construction: Huffman ties are broken by
symbol order, and codeword assignment is canonical (sorted by length,
then symbol), so encoder and decoder rebuild identical tables from the
same weights.  Codewords are written most-significant bit first into the
LSB-first bit strings used everywhere else.
"""

from __future__ import annotations

import heapq
import math

from .bits import BitString


class CanonicalCode:
    """Canonical Huffman code over a finite symbol set.

    Weights may be floats or exact ints (big ints welcome).  A
    single-symbol alphabet gets a zero-bit codeword: the decoder emits
    the symbol without consuming input.
    """

    def __init__(self, lengths: dict):
        self.lengths = dict(lengths)
        order = sorted(self.lengths, key=lambda s: (self.lengths[s], s))
        self.codes = {}
        code = 0
        prev_len = 0
        for sym in order:
            length = self.lengths[sym]
            code <<= length - prev_len
            self.codes[sym] = code
            prev_len = length
            code += 1
        # canonical decoding table: per length, first code and symbol row
        self._by_len = {}
        for sym in order:
            self._by_len.setdefault(self.lengths[sym], []).append(sym)
        self._first = {}
        for sym in order:
            length = self.lengths[sym]
            if length not in self._first:
                self._first[length] = self.codes[sym]

    @classmethod
    def from_weights(cls, weights: dict) -> "CanonicalCode":
        syms = sorted(weights)
        if not syms:
            raise ValueError("empty alphabet")
        if len(syms) == 1:
            return cls({syms[0]: 0})
        heap = [(weights[s], i, i) for i, s in enumerate(syms)]
        heapq.heapify(heap)
        parent = {}
        nxt = len(syms)
        while len(heap) > 1:
            wa, _, ia = heapq.heappop(heap)
            wb, _, ib = heapq.heappop(heap)
            parent[ia] = parent[ib] = nxt
            heapq.heappush(heap, (wa + wb, nxt, nxt))
            nxt += 1
        depth = {heap[0][2]: 0}
        for node in range(nxt - 2, -1, -1):
            depth[node] = depth[parent[node]] + 1
        return cls({s: depth[i] for i, s in enumerate(syms)})

    def encode_symbol(self, out: BitString, sym) -> int:
        length = self.lengths[sym]
        code = self.codes[sym]
        for i in range(length - 1, -1, -1):
            out.append_bits((code >> i) & 1, 1)
        return length

    def decode_symbol(self, data: BitString, offset: int):
        """Returns (symbol, new offset)."""
        if not self.lengths:
            raise ValueError("empty code")
        if len(self.lengths) == 1:
            return next(iter(self.lengths)), offset
        code = 0
        length = 0
        max_len = max(self._by_len)
        while length < max_len:
            code = (code << 1) | data.read_bits(offset + length, 1)
            length += 1
            row = self._by_len.get(length)
            if row is None:
                continue
            idx = code - self._first[length]
            if 0 <= idx < len(row):
                return row[idx], offset + length
        raise ValueError("invalid codeword")

    def expected_bits(self, probs: dict) -> float:
        return math.fsum(probs[s] * self.lengths[s] for s in probs)


# -- subsets in lexicographic order ---------------------------------------

def subset_rank(k: int, subset) -> int:
    """Index of a sorted subset of [0, k) among same-size subsets in
    lexicographic order of the increasing sequence."""
    s = sorted(subset)
    j = len(s)
    if s and (s[0] < 0 or s[-1] >= k):
        raise ValueError("subset element out of range")
    rank = 0
    prev = -1
    for i, x in enumerate(s):
        for v in range(prev + 1, x):
            rank += math.comb(k - 1 - v, j - 1 - i)
        prev = x
    return rank

def subset_unrank(k: int, j: int, rank: int) -> tuple:
    """Inverse of subset_rank for size-j subsets of [0, k)."""
    if not 0 <= j <= k:
        raise ValueError("bad subset size")
    out = []
    prev = -1
    remaining = rank
    for i in range(j):
        for v in range(prev + 1, k):
            block = math.comb(k - 1 - v, j - 1 - i)
            if remaining < block:
                out.append(v)
                prev = v
                break
            remaining -= block
        else:
            raise ValueError("subset rank out of range")
    if remaining and j == 0:
        raise ValueError("subset rank out of range")
    return tuple(out)


def subset_index_bits(k: int, j: int) -> int:
    """Bits to store a lexicographic index among size-j subsets of [0, k)."""
    count = math.comb(k, j)
    return max(0, (count - 1).bit_length())


def subset_header_bits(k: int) -> int:
    """Bits to store a subset size in [0, k]."""
    return max(1, k.bit_length())

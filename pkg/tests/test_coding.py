import heapq
import math
from itertools import combinations

import numpy as np
import pytest

from rankprobe.bits import BitString
from rankprobe.coding import (
    CanonicalCode,
    subset_header_bits,
    subset_index_bits,
    subset_rank,
    subset_unrank,
)


def merge_cost(weights):
    """Independent optimality oracle: total weighted path length equals
    the sum of all merged-pair weights in any Huffman merge."""
    heap = list(weights.values())
    heapq.heapify(heap)
    cost = 0
    while len(heap) > 1:
        a = heapq.heappop(heap)
        b = heapq.heappop(heap)
        cost += a + b
        heapq.heappush(heap, a + b)
    return cost


def test_huffman_is_optimal():
    rng = np.random.default_rng(0)
    for trial in range(40):
        size = int(rng.integers(2, 12))
        weights = {f"s{i}": int(rng.integers(1, 100)) for i in range(size)}
        code = CanonicalCode.from_weights(weights)
        got = sum(weights[s] * code.lengths[s] for s in weights)
        assert got == merge_cost(weights), weights


def test_huffman_bigint_weights():
    weights = {"a": 1 << 200, "b": 1 << 200, "c": 1 << 201, "d": 3}
    code = CanonicalCode.from_weights(weights)
    got = sum(weights[s] * code.lengths[s] for s in weights)
    assert got == merge_cost(weights)


def test_kraft_equality():
    # Huffman trees are full: the Kraft sum is exactly 1
    weights = {i: w for i, w in enumerate([5, 9, 12, 13, 16, 45])}
    code = CanonicalCode.from_weights(weights)
    assert sum(2.0 ** -code.lengths[s] for s in weights) == pytest.approx(1.0)


def test_prefix_free_and_deterministic():
    weights = {i: (i % 3) + 1 for i in range(9)}
    a = CanonicalCode.from_weights(weights)
    b = CanonicalCode.from_weights(dict(reversed(list(weights.items()))))
    assert a.lengths == b.lengths and a.codes == b.codes
    words = [(a.codes[s], a.lengths[s]) for s in weights]
    for (c1, l1), (c2, l2) in combinations(words, 2):
        lo = min(l1, l2)
        assert (c1 >> (l1 - lo)) != (c2 >> (l2 - lo))


def test_canonical_order():
    code = CanonicalCode.from_weights({"x": 10, "y": 1, "z": 1, "w": 4})
    # shorter codes come numerically first; ties ordered by symbol
    order = sorted(code.lengths, key=lambda s: (code.lengths[s], s))
    vals = [code.codes[s] << (max(code.lengths.values()) - code.lengths[s]) for s in order]
    assert vals == sorted(vals)


def test_roundtrip_random_streams():
    rng = np.random.default_rng(1)
    weights = {i: int(w) for i, w in enumerate(rng.integers(1, 50, size=7))}
    code = CanonicalCode.from_weights(weights)
    for _ in range(20):
        syms = [int(s) for s in rng.integers(0, 7, size=30)]
        out = BitString()
        for s in syms:
            code.encode_symbol(out, s)
        out.append_bits(0b101, 3)  # trailing filler must not confuse decode
        pos = 0
        back = []
        for _ in syms:
            s, pos = code.decode_symbol(out, pos)
            back.append(s)
        assert back == syms
        assert pos == out.length - 3


def test_single_symbol_zero_bits():
    code = CanonicalCode.from_weights({"only": 17})
    assert code.lengths["only"] == 0
    out = BitString()
    assert code.encode_symbol(out, "only") == 0
    assert out.length == 0
    sym, pos = code.decode_symbol(out, 0)
    assert sym == "only" and pos == 0


def test_decode_rejects_unused_codeword():
    code = CanonicalCode({"a": 1, "b": 2})  # leaves the word 11 unassigned
    data = BitString()
    data.append_bits(0b11, 2)
    with pytest.raises(ValueError):
        code.decode_symbol(data, 0)


def test_expected_bits():
    code = CanonicalCode.from_weights({0: 3, 1: 1})
    assert code.expected_bits({0: 0.75, 1: 0.25}) == pytest.approx(1.0)


def test_empty_alphabet_rejected():
    with pytest.raises(ValueError):
        CanonicalCode.from_weights({})


def test_subset_rank_exhaustive():
    for k in range(0, 9):
        for j in range(0, k + 1):
            for want, subset in enumerate(combinations(range(k), j)):
                assert subset_rank(k, subset) == want
                assert subset_unrank(k, j, want) == subset


def test_subset_rank_order_independent():
    assert subset_rank(10, (7, 2, 4)) == subset_rank(10, (2, 4, 7))


def test_subset_roundtrip_large():
    rng = np.random.default_rng(2)
    k = 64
    for _ in range(50):
        j = int(rng.integers(0, k + 1))
        subset = tuple(sorted(rng.choice(k, size=j, replace=False).tolist()))
        assert subset_unrank(k, j, subset_rank(k, subset)) == subset


def test_subset_errors():
    with pytest.raises(ValueError):
        subset_rank(4, (4,))
    with pytest.raises(ValueError):
        subset_rank(4, (-1,))
    with pytest.raises(ValueError):
        subset_unrank(4, 2, math.comb(4, 2))
    with pytest.raises(ValueError):
        subset_unrank(4, 5, 0)


def test_index_and_header_bits():
    assert subset_index_bits(16, 8) == 14  # comb = 12870
    assert subset_index_bits(4, 0) == 0
    assert subset_index_bits(4, 4) == 0
    assert subset_header_bits(16) == 5
    assert subset_header_bits(1) == 1
    for k in range(1, 20):
        for j in range(k + 1):
            assert (1 << subset_index_bits(k, j)) >= math.comb(k, j)

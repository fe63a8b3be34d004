import numpy as np
import pytest

from rankprobe.bits import BitArray
from rankprobe.elimination import (
    EXHAUSTIVE_LIMIT,
    _sample_queries,
    overlap_probability,
    run_elimination,
)
from rankprobe.entropy import LabConfig
from rankprobe.structures import build_naive, build_two_level


def slim_layout(seed=0):
    a = BitArray.random(1 << 12, np.random.default_rng(seed))
    return build_two_level(a, superblock=1024, block=128)


def test_naive_small_drains_in_one_round():
    a = BitArray.random(64, np.random.default_rng(1))
    layout = build_naive(a)
    assert layout.redundancy_bits == 0
    traj = run_elimination(layout)
    # bootstrap floor is one raw bit; the single cell gets published at once
    assert traj.status == "drained"
    assert len(traj.rows) == 1
    row = traj.rows[0]
    assert row.published_bits == 1
    assert row.block_count == 4
    assert row.published_cells == 1
    assert row.avg_probes_after == 0.0


def test_trajectory_accounting():
    layout = slim_layout()
    cfg = LabConfig(saturation_fraction=1.0, final_full_round=True)
    traj = run_elimination(layout, config=cfg)
    assert traj.rows
    assert traj.structure == layout.kind
    assert traj.n == 1 << 12
    w = layout.memory.word_bits
    addr = layout.memory.address_bits()
    p = layout.redundancy_bits
    for row in traj.rows:
        assert row.published_bits == p
        assert row.avg_probes_after <= row.avg_probes_before
        assert 0.0 <= row.overlap_prob <= 1.0
        p += row.published_cells * (w + addr)
    assert layout.published.length == p
    # uncapped rows obey the block-count law exactly
    for row in traj.rows:
        if row.block_count < traj.n:
            assert row.block_count == int(np.ceil(traj.gamma * max(row.published_bits, 1)))


def test_published_bits_strictly_grow():
    layout = slim_layout(2)
    cfg = LabConfig(saturation_fraction=1.0, final_full_round=True)
    traj = run_elimination(layout, config=cfg)
    ps = [r.published_bits for r in traj.rows]
    assert all(a < b for a, b in zip(ps, ps[1:]))


def test_default_two_level_overflows_immediately():
    # default geometry at 2^12 publishes 1088 bits, so the very first
    # block count 4 * 1088 exceeds n: no rounds fit
    a = BitArray.random(1 << 12, np.random.default_rng(3))
    layout = build_two_level(a)
    assert layout.redundancy_bits == 1088
    traj = run_elimination(layout)
    assert traj.status == "block_overflow"
    assert traj.rows == []


def test_final_full_round_drains_overflow():
    a = BitArray.random(1 << 12, np.random.default_rng(4))
    layout = build_two_level(a)
    cfg = LabConfig(final_full_round=True)
    traj = run_elimination(layout, config=cfg)
    assert traj.status == "drained"
    assert len(traj.rows) == 1
    assert traj.rows[0].block_count == traj.n
    assert traj.rows[0].avg_probes_after == 0.0


def test_saturation_stop():
    layout = slim_layout(5)
    cfg = LabConfig(saturation_fraction=0.001)
    traj = run_elimination(layout, config=cfg)
    assert traj.status == "saturated"
    assert len(traj.rows) == 1
    assert layout.published.length >= 0.001 * layout.n


def test_overlap_probability_bounds():
    layout = slim_layout(6)
    assert overlap_probability(layout) == 0.0
    layout.publish_redundancy()
    ov1 = overlap_probability(layout)
    assert 0.0 < ov1 <= 1.0
    # publishing more cells can only widen the overlap
    run_elimination(layout, config=LabConfig(saturation_fraction=1.0), max_rounds=1)
    assert overlap_probability(layout) >= ov1


def test_sample_queries():
    assert _sample_queries(100, 50, 0) == list(range(100))
    assert _sample_queries(EXHAUSTIVE_LIMIT, 10, 0) == list(range(EXHAUSTIVE_LIMIT))
    big = _sample_queries(EXHAUSTIVE_LIMIT + 1, 64, 0)
    assert len(big) == 64
    assert big == _sample_queries(EXHAUSTIVE_LIMIT + 1, 64, 0)
    assert big != _sample_queries(EXHAUSTIVE_LIMIT + 1, 64, 1)


def test_csv_shape():
    layout = slim_layout(7)
    traj = run_elimination(layout, config=LabConfig(saturation_fraction=1.0, final_full_round=True))
    text = traj.to_csv()
    lines = text.strip().split("\n")
    assert lines[0].startswith("# structure=two_level n=4096 gamma=4.0 seed=0 status=")
    assert lines[1] == "round,published_bits,block_count,overlap_prob,avg_probes_before,avg_probes_after,published_cells"
    assert len(lines) == 2 + len(traj.rows)
    first = lines[2].split(",")
    assert first[0] == "0" and first[1] == str(layout.redundancy_bits)
    assert "." in first[3] and "." in first[4]

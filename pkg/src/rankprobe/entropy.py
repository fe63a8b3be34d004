"""Answer-entropy laboratory for uniform bit arrays.

Everything here is about one experiment shape.  Draw A uniform on {0,1}^n,
cut the query range into k stride blocks of bs = n // k queries, and
compare two answer tuples:

* the *reference* tuple: Rank at every block's right edge, one answer per
  block.  Its entropy is exactly k * h(bs), where h(m) is the entropy of
  Binomial(m, 1/2) in bits.
* an *offset* tuple: Rank at position b * bs + d for a chosen offset
  d in (0, bs) and a chosen subset of blocks.

The *deficit* H(reference) + H(offset) - H(joint) measures how correlated
the two tuples are.  It decomposes exactly across offset blocks; each
block past the first contributes at least block_deficit(bs, d) >= 1 bit
(minimized at the half-offset), which is the quantitative engine behind
the encoding argument.

Anchoring note: the reference tuple sits at block *right* edges
(positions (b+1) * bs), which is what makes its entropy exactly k * h(bs);
query index q in the simulator corresponds to position q + 1 here.

Three routes to the same numbers, kept deliberately separate:
analytic closed forms, exact enumeration (n <= 20), and conditioned
Monte-Carlo sampling.  Entropies are in bits throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RefusalError


# -- exact binomial entropy -----------------------------------------------

def _lg_int(x: int) -> float:
    """log2 of a positive int, safe for arbitrary size."""
    if x <= 0:
        raise ValueError("log of non-positive")
    d = x.bit_length()
    if d <= 53:
        return math.log2(x)
    return (d - 53) + math.log2(x >> (d - 53))


def binom_entropy_exact(m: int) -> float:
    """Oracle route: H(Binomial(m, 1/2)) by exact big-int terms.

    Each probability C(m, i) / 2^m is formed by correctly-rounded integer
    division; terms are accumulated with fsum.  O(m) big-int operations,
    use for modest m and for checking the fast route.
    """
    if m < 0:
        raise ValueError("negative m")
    if m == 0:
        return 0.0
    pow2 = 1 << m
    terms = []
    c = 1
    for i in range(m + 1):
        p = c / pow2
        if p > 0.0:
            terms.append(p * (m - _lg_int(c)))
        c = c * (m - i) // (i + 1)
    return math.fsum(terms)


_H_CACHE: dict = {0: 0.0}


def binom_entropy(m: int) -> float:
    """H(Binomial(m, 1/2)) in bits, exact to ~1e-12.

    Fast route: one exact central binomial seeds outward float recurrences
    for the pmf and for log2 C(m, i); terms below 2^-1080 are dropped
    (their total contribution is < 1e-300).  Agrees with the big-int
    oracle to well under the lab's 1e-9 tolerances.
    """
    if m < 0:
        raise ValueError("negative m")
    h = _H_CACHE.get(m)
    if h is not None:
        return h
    mid = m // 2
    c_mid = math.comb(m, mid)
    p_mid = c_mid / (1 << m)
    lg_mid = _lg_int(c_mid)

    i_up = np.arange(mid, m, dtype=np.float64)       # step i -> i+1
    ratio_up = (m - i_up) / (i_up + 1.0)
    i_dn = np.arange(mid, 0, -1, dtype=np.float64)   # step i -> i-1
    ratio_dn = i_dn / (m - i_dn + 1.0)

    p = np.empty(m + 1)
    lgc = np.empty(m + 1)
    p[mid] = p_mid
    lgc[mid] = lg_mid
    if mid < m:
        p[mid + 1 :] = p_mid * np.cumprod(ratio_up)
        lgc[mid + 1 :] = lg_mid + np.cumsum(np.log2(ratio_up))
    if mid > 0:
        p[mid - 1 :: -1] = p_mid * np.cumprod(ratio_dn)
        lgc[mid - 1 :: -1] = lg_mid + np.cumsum(np.log2(ratio_dn))

    live = p > 0.0
    h = math.fsum((p[live] * (m - lgc[live])).tolist())
    _H_CACHE[m] = h
    return h


def binom_entropy_estimate(m: int) -> float:
    """Closed-form estimate 0.5 * lg(pi * e * m / 2); error is O(1/m)."""
    if m < 1:
        raise ValueError("estimate needs m >= 1")
    return 0.5 * math.log2(math.pi * math.e * m / 2.0)


def block_deficit(m: int, d: int) -> float:
    """2 h(m) - h(d) - h(m - d): the correlation cost of pinning one
    interior point at offset d inside a block of m positions."""
    if not 0 < d < m:
        raise ValueError(f"offset {d} outside (0, {m})")
    return 2.0 * binom_entropy(m) - binom_entropy(d) - binom_entropy(m - d)


def block_deficit_argmin(m: int) -> list:
    """All offsets minimizing block_deficit(m, .), ties included."""
    vals = [(block_deficit(m, d), d) for d in range(1, m)]
    best = min(v for v, _ in vals)
    return [d for v, d in vals if v <= best + 1e-12]


# -- lab configuration ----------------------------------------------------

@dataclass
class LabConfig:
    """Shared experiment knobs.

    epsilon bounds the conditioning-event rarity: events must keep mass at
    least 2^(-epsilon * |offset blocks|).  gamma scales published bits into
    block counts for the elimination driver.
    """

    epsilon: float = 0.05
    gamma: float = 4.0
    montecarlo_trials: int = 20000
    rng_seed: int = 0
    bootstrap_rounds: int = 200
    saturation_fraction: float = 0.1
    final_full_round: bool = False
    footprint_mode: str = "verbatim"  # or "ensemble"

    def __post_init__(self):
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must sit in (0, 1)")


# -- analytic route -------------------------------------------------------

@dataclass
class EntropyReport:
    """Deficit accounting for one (n, k, offset, blocks) experiment.

    per_block_deficits[i] is the exact contribution of the i-th offset
    block (in increasing block order); they sum to `deficit` within 1e-9.
    The first block's contribution is >= 0 but carries no per-block lower
    bound; every later one is >= block_deficit(bs, offset).
    """

    n: int
    k: int
    offset: int
    blocks: tuple
    reference_entropy: float
    offset_entropy: float
    joint_entropy: float
    deficit: float
    per_block_deficits: tuple = field(default=())

    def __post_init__(self):
        if self.deficit < -1e-9:
            raise ValueError("negative deficit")
        if self.per_block_deficits:
            gap = abs(self.deficit - math.fsum(self.per_block_deficits))
            if gap > 1e-9:
                raise ValueError(f"per-block sum off by {gap}")


def _check_lab_args(n: int, k: int, d: int, blocks) -> tuple:
    if k < 1 or n < k:
        raise ValueError("need 1 <= k <= n")
    bs = n // k
    if not 0 < d < bs:
        raise ValueError(f"offset {d} outside (0, {bs})")
    blocks = tuple(sorted(set(blocks)))
    if not blocks:
        raise ValueError("need at least one offset block")
    if blocks[0] < 0 or blocks[-1] >= k:
        raise ValueError("block index out of range")
    return blocks


def analytic_deficit(n: int, k: int, d: int, blocks=None) -> EntropyReport:
    """Closed-form deficit from independent-increment entropies.

    blocks defaults to all k blocks.  Exact for uniform A; the only
    numerics are float sums of exact binomial entropies.
    """
    if blocks is None:
        blocks = range(k)
    blocks = _check_lab_args(n, k, d, blocks)
    bs = n // k
    h_bs = binom_entropy(bs)
    h_d = binom_entropy(d)
    h_rest = binom_entropy(bs - d)

    reference = k * h_bs

    off_terms = [binom_entropy(blocks[0] * bs + d)]
    per_block = [binom_entropy(blocks[0] * bs + d) + h_bs - h_d - h_rest]
    for prev, b in zip(blocks, blocks[1:]):
        gap_h = binom_entropy((b - prev) * bs)
        off_terms.append(gap_h)
        per_block.append(gap_h + h_bs - h_d - h_rest)
    offset_entropy = math.fsum(off_terms)

    joint = (k - len(blocks)) * h_bs + len(blocks) * (h_d + h_rest)
    deficit = math.fsum([reference, offset_entropy, -joint])
    return EntropyReport(
        n=n,
        k=k,
        offset=d,
        blocks=blocks,
        reference_entropy=reference,
        offset_entropy=offset_entropy,
        joint_entropy=joint,
        deficit=deficit,
        per_block_deficits=tuple(per_block),
    )


def reference_entropy(n: int, k: int) -> float:
    """Entropy of the k right-edge answers: exactly k * h(n // k)."""
    if k < 1 or n < k:
        raise ValueError("need 1 <= k <= n")
    return k * binom_entropy(n // k)


# -- exact enumeration route ---------------------------------------------

ENUM_LIMIT = 20


def signature_counts(n: int, k: int, d: int, blocks=None):
    """Count arrays by joint answer signature.

    Returns (blocks, dict mapping (reference tuple, offset tuple) -> count
    over all 2^n arrays).  Refuses n > 20: past that the enumeration is no
    longer honest desk-scale work.
    """
    if n > ENUM_LIMIT:
        raise RefusalError(f"exact enumeration capped at n = {ENUM_LIMIT}")
    if blocks is None:
        blocks = range(k)
    blocks = _check_lab_args(n, k, d, blocks)
    bs = n // k

    vs = np.arange(1 << n, dtype=np.int64)
    bits = (vs[:, None] >> np.arange(n, dtype=np.int64)) & 1
    csum = np.cumsum(bits, axis=1)  # csum[:, p-1] = Rank(p)
    ref = csum[:, [b * bs + bs - 1 for b in range(k)]]
    off = csum[:, [b * bs + d - 1 for b in blocks]]

    counts: dict = {}
    for i in range(1 << n):
        sig = (tuple(int(x) for x in ref[i]), tuple(int(x) for x in off[i]))
        counts[sig] = counts.get(sig, 0) + 1
    return blocks, counts


def _entropy_of_counts(counts) -> float:
    total = sum(counts)
    if total <= 0:
        raise ValueError("empty distribution")
    lg_total = _lg_int(total)
    terms = [c * (_lg_int(c)) for c in counts if c]
    return lg_total - math.fsum(terms) / total


def deficit_from_counts(sig_counts: dict) -> tuple:
    """(reference H, offset H, joint H, deficit) from signature counts.

    Counts may be any non-negative weights (a conditioning event keeps a
    sub-count of each signature class); entropies stay exact because the
    weights are integers.
    """
    ref_c: dict = {}
    off_c: dict = {}
    joint = []
    for (r, o), c in sig_counts.items():
        if c < 0:
            raise ValueError("negative weight")
        if c == 0:
            continue
        ref_c[r] = ref_c.get(r, 0) + c
        off_c[o] = off_c.get(o, 0) + c
        joint.append(c)
    h_r = _entropy_of_counts(ref_c.values())
    h_o = _entropy_of_counts(off_c.values())
    h_j = _entropy_of_counts(joint)
    return h_r, h_o, h_j, h_r + h_o - h_j


def brute_force_deficit(n: int, k: int, d: int, blocks=None, weights: dict | None = None) -> EntropyReport:
    """Deficit by exact enumeration of all 2^n arrays (n <= 20).

    `weights` optionally restricts to a conditioning event: a map from
    answer signature to how many arrays of that class the event keeps
    (arrays sharing a signature are exchangeable for these entropies).
    """
    blocks, counts = signature_counts(n, k, d, blocks)
    if weights is not None:
        trimmed = {}
        for sig, keep in weights.items():
            if keep < 0 or keep > counts.get(sig, 0):
                raise ValueError("event keeps more arrays than exist")
            if keep:
                trimmed[sig] = keep
        counts = trimmed
        if not counts:
            raise ValueError("empty conditioning event")
    h_r, h_o, h_j, deficit = deficit_from_counts(counts)
    return EntropyReport(
        n=n,
        k=k,
        offset=d,
        blocks=blocks,
        reference_entropy=h_r,
        offset_entropy=h_o,
        joint_entropy=h_j,
        deficit=max(deficit, 0.0),
    )


def event_mass(n: int, weights: dict) -> float:
    """Probability mass of a conditioning event given per-class keep counts."""
    kept = sum(weights.values())
    return kept / (1 << n)


# -- Monte-Carlo route ----------------------------------------------------

@dataclass
class MonteCarloReport:
    n: int
    k: int
    offset: int
    blocks: tuple
    trials: int
    accepted: int
    deficit: float
    ci_low: float
    ci_high: float


def _plugin_deficit(ref_rows, off_rows) -> float:
    """Plug-in deficit with Miller-Madow bias correction."""

    def h(rows) -> float:
        _, counts = np.unique(rows, axis=0, return_counts=True)
        tot = counts.sum()
        p = counts / tot
        plug = -float(np.sum(p * np.log2(p)))
        return plug + (len(counts) - 1) / (2.0 * tot * math.log(2.0))

    both = np.concatenate([ref_rows, off_rows], axis=1)
    return h(ref_rows) + h(off_rows) - h(both)


def montecarlo_deficit(
    n: int,
    k: int,
    d: int,
    blocks=None,
    event=None,
    config: LabConfig | None = None,
) -> MonteCarloReport:
    """Estimate the deficit by sampling, optionally under a conditioning
    event, with a bootstrap confidence interval.

    The sampler draws the per-segment Binomial increments directly (their
    joint law is exactly that of a uniform array), so `event` must be a
    function of the answers: event(ref_matrix, off_matrix) -> bool mask.
    Rejection sampling keeps rows where the mask is true; if fewer than
    100 samples survive, the event is too rare for an honest estimate and
    the run refuses.
    """
    if config is None:
        config = LabConfig()
    if blocks is None:
        blocks = range(k)
    blocks = _check_lab_args(n, k, d, blocks)
    bs = n // k
    rng = np.random.default_rng(config.rng_seed)
    trials = config.montecarlo_trials

    # segment lengths between consecutive interesting positions
    positions = sorted(
        {(b + 1) * bs for b in range(k)} | {b * bs + d for b in blocks}
    )
    lengths = np.diff([0] + positions)
    draws = rng.binomial(lengths, 0.5, size=(trials, len(lengths)))
    ranks = np.cumsum(draws, axis=1)
    pos_index = {p: i for i, p in enumerate(positions)}
    ref = ranks[:, [pos_index[(b + 1) * bs] for b in range(k)]]
    off = ranks[:, [pos_index[b * bs + d] for b in blocks]]

    if event is not None:
        mask = np.asarray(event(ref, off), dtype=bool)
        ref, off = ref[mask], off[mask]
    accepted = len(ref)
    if accepted < 100:
        raise RefusalError(
            f"conditioning event too rare: {accepted}/{trials} samples survive"
        )

    point = _plugin_deficit(ref, off)
    boots = []
    for _ in range(config.bootstrap_rounds):
        idx = rng.integers(0, accepted, size=accepted)
        boots.append(_plugin_deficit(ref[idx], off[idx]))
    # normal-approximation bootstrap: percentile intervals sit off-center
    # for plug-in entropies (resampling shrinks the support)
    spread = 1.96 * float(np.std(boots))
    lo, hi = point - spread, point + spread
    return MonteCarloReport(
        n=n,
        k=k,
        offset=d,
        blocks=blocks,
        trials=trials,
        accepted=accepted,
        deficit=point,
        ci_low=float(lo),
        ci_high=float(hi),
    )

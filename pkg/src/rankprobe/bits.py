"""Bit arrays and bit strings.

Two containers with different jobs:

* :class:`BitArray` is the data under study: a fixed-length 0/1 array
  ``A[1..n]`` (1-indexed, as rank queries are phrased) backed by packed
  64-bit little-endian words.  It answers exact prefix-sum queries and
  round-trips through the ``RPL1`` file format.
* :class:`BitString` is a growable bit buffer used for published bits and
  encodings, backed by a Python int (LSB first) with an explicit length so
  trailing zeros survive.
"""

from __future__ import annotations

import struct

import numpy as np

RPL1_MAGIC = b"RPL1"


class BitArray:
    """Fixed-length bit array A[1..n] over packed uint64 words."""

    __slots__ = ("n", "words", "_prefix")

    def __init__(self, n: int, words: np.ndarray | None = None):
        if n < 0:
            raise ValueError("negative length")
        self.n = n
        n_words = (n + 63) // 64
        if words is None:
            words = np.zeros(n_words, dtype=np.uint64)
        else:
            words = np.ascontiguousarray(words, dtype=np.uint64)
            if words.shape != (n_words,):
                raise ValueError("word buffer does not match length")
        self.words = words
        self._mask_tail()
        self._prefix = None  # lazy cumulative popcounts, one entry per word

    def _mask_tail(self) -> None:
        tail = self.n % 64
        if tail and len(self.words):
            self.words[-1] &= np.uint64((1 << tail) - 1)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_bits(cls, bits) -> "BitArray":
        arr = np.asarray(bits, dtype=np.uint8)
        n = len(arr)
        padded = np.zeros(((n + 63) // 64) * 64, dtype=np.uint8)
        padded[:n] = arr
        words = np.packbits(padded, bitorder="little").view(np.uint64)
        return cls(n, words)

    @classmethod
    def from_int(cls, n: int, value: int) -> "BitArray":
        # bit i of value (LSB first) becomes A[i+1]
        raw = value.to_bytes(((n + 63) // 64) * 8, "little")
        return cls(n, np.frombuffer(raw, dtype=np.uint64).copy())

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "BitArray":
        n_bytes = ((n + 63) // 64) * 8
        raw = rng.integers(0, 256, size=n_bytes, dtype=np.uint8)
        return cls(n, raw.view(np.uint64).copy())

    # -- access -----------------------------------------------------------

    def get(self, i: int) -> int:
        """A[i], 1-indexed."""
        if not 1 <= i <= self.n:
            raise IndexError(f"bit index {i} outside [1, {self.n}]")
        j = i - 1
        return int((self.words[j // 64] >> np.uint64(j % 64)) & np.uint64(1))

    def set(self, i: int, bit: int) -> None:
        if not 1 <= i <= self.n:
            raise IndexError(f"bit index {i} outside [1, {self.n}]")
        j = i - 1
        mask = np.uint64(1) << np.uint64(j % 64)
        if bit:
            self.words[j // 64] |= mask
        else:
            self.words[j // 64] &= ~mask
        self._prefix = None

    def rank(self, k: int) -> int:
        """Number of ones among A[1..k].  O(1) after a lazy prefix pass."""
        if not 0 <= k <= self.n:
            raise IndexError(f"rank position {k} outside [0, {self.n}]")
        if k == 0:
            return 0
        if self._prefix is None:
            counts = np.bitwise_count(self.words).astype(np.int64)
            self._prefix = np.concatenate(([0], np.cumsum(counts)))
        j = k - 1
        word = int(self.words[j // 64]) & ((1 << (j % 64 + 1)) - 1)
        return int(self._prefix[j // 64]) + word.bit_count()

    def popcount(self) -> int:
        return int(np.bitwise_count(self.words).sum())

    def to_int(self) -> int:
        return int.from_bytes(self.words.tobytes(), "little")

    def to_bits(self) -> np.ndarray:
        flat = np.unpackbits(self.words.view(np.uint8), bitorder="little")
        return flat[: self.n]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitArray)
            and self.n == other.n
            and bool(np.array_equal(self.words, other.words))
        )

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"BitArray(n={self.n}, ones={self.popcount()})"

    # -- RPL1 format ------------------------------------------------------
    # magic "RPL1", n as 8-byte little-endian unsigned, then ceil(n/8)
    # payload bytes; bit i (1-indexed) lives in byte (i-1)//8 at bit
    # position (i-1) % 8.

    def to_rpl1(self) -> bytes:
        n_bytes = (self.n + 7) // 8
        payload = self.words.tobytes()[:n_bytes]
        return RPL1_MAGIC + struct.pack("<Q", self.n) + payload

    @classmethod
    def from_rpl1(cls, blob: bytes) -> "BitArray":
        if blob[:4] != RPL1_MAGIC:
            raise ValueError("not an RPL1 payload (bad magic)")
        if len(blob) < 12:
            raise ValueError("truncated RPL1 header")
        (n,) = struct.unpack("<Q", blob[4:12])
        n_bytes = (n + 7) // 8
        payload = blob[12 : 12 + n_bytes]
        if len(payload) != n_bytes:
            raise ValueError("truncated RPL1 payload")
        padded = payload + b"\x00" * (((n + 63) // 64) * 8 - n_bytes)
        return cls(n, np.frombuffer(padded, dtype=np.uint64).copy())

    def write_rpl1(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_rpl1())

    @classmethod
    def read_rpl1(cls, path) -> "BitArray":
        with open(path, "rb") as fh:
            return cls.from_rpl1(fh.read())


class BitString:
    """Growable bit string, LSB-first, with explicit length."""

    __slots__ = ("value", "length")

    def __init__(self, value: int = 0, length: int = 0):
        if length < 0 or value < 0 or value >> length:
            raise ValueError("value wider than declared length")
        self.value = value
        self.length = length

    def append_bits(self, value: int, width: int) -> None:
        """Append `width` bits of `value`, LSB first."""
        if width < 0 or value < 0 or value >> width:
            raise ValueError(f"value {value} does not fit in {width} bits")
        self.value |= value << self.length
        self.length += width

    def append(self, other: "BitString") -> None:
        self.value |= other.value << self.length
        self.length += other.length

    def read_bits(self, offset: int, width: int) -> int:
        if offset < 0 or width < 0 or offset + width > self.length:
            raise ValueError("bit read outside string")
        return (self.value >> offset) & ((1 << width) - 1)

    def to_bytes(self) -> bytes:
        return self.value.to_bytes((self.length + 7) // 8, "little")

    @classmethod
    def from_bytes(cls, data: bytes, length: int) -> "BitString":
        if (length + 7) // 8 != len(data):
            raise ValueError("byte payload does not match bit length")
        value = int.from_bytes(data, "little")
        if value >> length:
            raise ValueError("padding bits are not zero")
        return cls(value, length)

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitString)
            and self.length == other.length
            and self.value == other.value
        )

    def __repr__(self) -> str:
        return f"BitString(length={self.length})"

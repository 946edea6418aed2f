"""Two-universal hashing of raw symbols by random binary matrices over GF(2).

Each input substring of ``n`` bits is multiplied (mod 2) by an ``n x l``
random binary matrix. Matrices are stored row-packed: row ``i`` occupies
``ceil(l / 64)`` little-endian 64-bit words, column ``j`` being bit ``j % 64``
of word ``j // 64``.

Pseudo-random matrices are drawn from a Philox-4x64 stream whose 128-bit key
is the first 16 bytes of SHA-256 over the matrix seed followed by the
substring index as 8 big-endian bytes. Words are consumed row after row, so the
matrix is a documented, deterministic function of (seed, index).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numba
import numpy as np

from .errors import (
    InvalidParameterError,
    NothingExtractableError,
    SeedExhaustedError,
)
from .seeding import SeedLike, seed_to_int
from .states import Partition

WORD = 64


class MatrixMode(str, Enum):
    FULL = "full"
    TOEPLITZ = "toeplitz"


def output_length(n: int, h_low: float, b: int, margin: float = 0.0) -> int:
    """Extractable output bits per ``n``-bit substring, ``floor(n h_low / b - margin)``.

    ``margin`` is an optional security margin in bits, e.g. ``2 log2(1/eps)``
    for an eps-secure leftover-hash extractor. The default applies none.
    """
    if n < 1 or b < 1:
        raise InvalidParameterError("n and b must be positive")
    if not h_low > 0:
        raise NothingExtractableError(f"h_low = {h_low} leaves nothing to extract")
    if h_low > b:
        raise InvalidParameterError(f"h_low = {h_low} exceeds the {b}-bit encoding")
    # a tiny tolerance keeps h_low == b (full entropy) from losing a bit to rounding
    length = math.floor(n * h_low / b - margin + 1e-9)
    if length < 1:
        raise NothingExtractableError("security margin consumes the whole output")
    return min(n, length)


def security_margin(eps: float) -> float:
    """Leftover-hash margin ``2 log2(1/eps)`` in bits."""
    if not 0 < eps < 1:
        raise InvalidParameterError("eps must lie in (0, 1)")
    return 2 * math.log2(1 / eps)


@dataclass(frozen=True, eq=False)
class HashMatrix:
    """Row-packed ``n x l`` binary matrix."""

    rows: np.ndarray
    n: int
    l: int

    @property
    def words(self) -> int:
        return self.rows.shape[1]

    def to_dense(self) -> np.ndarray:
        as_bytes = np.ascontiguousarray(self.rows).view(np.uint8)
        bits = np.unpackbits(as_bytes, axis=1, bitorder="little")
        return bits[:, : self.l]

    @classmethod
    def from_dense(cls, dense) -> "HashMatrix":
        dense = np.asarray(dense, dtype=np.uint8)
        if dense.ndim != 2:
            raise InvalidParameterError("matrix must be 2-d")
        n, l = dense.shape
        if l == 0 or n == 0:
            raise InvalidParameterError("matrix must be non-empty")
        words = -(-l // WORD)
        padded = np.zeros((n, words * WORD), dtype=np.uint8)
        padded[:, :l] = dense & 1
        packed = np.packbits(padded, axis=1, bitorder="little")
        return cls(packed.view(np.uint64).copy(), n, l)


def _matrix_key(seed: SeedLike, index: int) -> int:
    if isinstance(seed, str):
        raw = seed.encode()
    elif isinstance(seed, (bytes, bytearray)):
        raw = bytes(seed)
    else:
        value = seed_to_int(seed)
        raw = value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")
    if not raw:
        raise InvalidParameterError("matrix seed must be non-empty")
    digest = hashlib.sha256(raw + int(index).to_bytes(8, "big")).digest()
    return int.from_bytes(digest[:16], "big")


def random_matrix(
    seed: Optional[SeedLike],
    n: int,
    l: int,
    *,
    index: int = 0,
    mode: Union[MatrixMode, str] = MatrixMode.FULL,
    raw_bits=None,
) -> HashMatrix:
    """Random ``n x l`` hash matrix.

    Parameters
    ----------
    seed : int, bytes or str
        Key material for the pseudo-random expansion. Ignored when
        ``raw_bits`` is given.
    n, l : int
        Input and output lengths.
    index : int
        Substring index, so every substring can use a fresh matrix.
    mode : {"full", "toeplitz"}
        ``toeplitz`` needs only ``n + l - 1`` random bits; it is an extension
        for throughput, the full matrix is the default.
    raw_bits : array of 0/1, optional
        True-random mode: the matrix bits are taken verbatim (row-major for
        ``full``, the diagonal sequence for ``toeplitz``).
    """
    if not (n >= 1 and 1 <= l <= n):
        raise InvalidParameterError(f"need 1 <= l <= n, got n={n}, l={l}")
    mode = MatrixMode(mode)
    needed = n * l if mode is MatrixMode.FULL else n + l - 1
    if raw_bits is not None:
        bits = np.asarray(raw_bits, dtype=np.uint8).ravel()
        if bits.size < needed:
            raise SeedExhaustedError(f"{needed} raw bits required, {bits.size} given")
        bits = bits[:needed] & 1
        if mode is MatrixMode.FULL:
            return HashMatrix.from_dense(bits.reshape(n, l))
        return toeplitz_matrix(bits, n, l)

    if seed is None:
        raise InvalidParameterError("a seed or raw_bits is required")
    gen = np.random.Philox(key=_matrix_key(seed, index))
    if mode is MatrixMode.TOEPLITZ:
        words = gen.random_raw(-(-needed // WORD)).astype(np.uint64)
        bits = np.unpackbits(words.view(np.uint8), bitorder="little")[:needed]
        return toeplitz_matrix(bits, n, l)
    W = -(-l // WORD)
    rows = gen.random_raw(n * W).astype(np.uint64).reshape(n, W)
    tail = l % WORD
    if tail:
        rows[:, -1] &= np.uint64((1 << tail) - 1)
    return HashMatrix(rows, n, l)


def toeplitz_matrix(diagonals, n: int, l: int) -> HashMatrix:
    """Toeplitz matrix ``T[i, j] = s[i - j + l - 1]`` from ``n + l - 1`` bits."""
    s = np.asarray(diagonals, dtype=np.uint8).ravel()
    if s.size < n + l - 1:
        raise SeedExhaustedError(f"{n + l - 1} bits required, {s.size} given")
    # row i reads s[i + l - 1], s[i + l - 2], ..., s[i]: a window of reversed s
    rev = s[: n + l - 1][::-1]
    windows = np.lib.stride_tricks.sliding_window_view(rev, l)
    return HashMatrix.from_dense(windows[::-1])


@numba.njit(cache=True)
def _xor_rows(bits, rows, out):
    # bits: (B, n) uint8, rows: (n, W) uint64, out: (B, W) uint64
    B, n = bits.shape
    W = rows.shape[1]
    for b in range(B):
        for i in range(n):
            if bits[b, i]:
                for w in range(W):
                    out[b, w] ^= rows[i, w]


TABLE_BITS = 6
BATCH = 1024


@numba.njit(cache=True)
def _chunk_tables(rows, k):
    # tables[g, v] = XOR of rows k*g + i over the set bits i of v
    n, W = rows.shape
    G = (n + k - 1) // k
    V = 1 << k
    tables = np.zeros((G, V, W), dtype=np.uint64)
    for g in range(G):
        for v in range(1, V):
            low = v & (-v)
            bit = 0
            while (1 << bit) != low:
                bit += 1
            i = k * g + bit
            prev = v ^ low
            for w in range(W):
                r = rows[i, w] if i < n else np.uint64(0)
                tables[g, v, w] = tables[g, prev, w] ^ r
    return tables


@numba.njit(cache=True)
def _xor_tables(chunks, tables, out):
    # group-major loop keeps one table hot across the whole batch
    B, G = chunks.shape
    W = tables.shape[2]
    for g in range(G):
        Tg = tables[g]
        for b in range(B):
            row = Tg[chunks[b, g]]
            acc = out[b]
            for w in range(W):
                acc[w] ^= row[w]


@numba.njit(cache=True)
def _pack_chunks(bits, k, G):
    B, n = bits.shape
    chunks = np.zeros((B, G), dtype=np.uint16)
    for b in range(B):
        for g in range(G):
            v = 0
            base = g * k
            for t in range(min(k, n - base)):
                v |= np.int64(bits[b, base + t]) << t
            chunks[b, g] = v
    return chunks


class FixedMatrixHasher:
    """Batch hasher for a matrix reused across substrings (benchmark mode).

    Uses precomputed XOR tables over groups of ``TABLE_BITS`` rows (the
    "method of four Russians").
    """

    def __init__(self, matrix: HashMatrix, k: int = TABLE_BITS):
        self.matrix = matrix
        self.k = k
        self._tables = _chunk_tables(matrix.rows, k)

    def __call__(self, blocks) -> np.ndarray:
        blocks = _as_block_batch(blocks, self.matrix.n)
        out = np.zeros((blocks.shape[0], self.matrix.words), dtype=np.uint64)
        for start in range(0, blocks.shape[0], BATCH):
            sl = slice(start, start + BATCH)
            chunks = _pack_chunks(blocks[sl], self.k, self._tables.shape[0])
            _xor_tables(chunks, self._tables, out[sl])
        return _unpack_words(out, self.matrix.l)


def _as_block_batch(blocks, n: int) -> np.ndarray:
    arr = np.asarray(blocks, dtype=np.uint8)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != n:
        raise InvalidParameterError(f"input blocks must have length {n}, got {arr.shape[-1]}")
    if arr.size and arr.max() > 1:
        raise InvalidParameterError("input must be a 0/1 bit array")
    return np.ascontiguousarray(arr)


def _unpack_words(words: np.ndarray, l: int) -> np.ndarray:
    as_bytes = np.ascontiguousarray(words).view(np.uint8)
    return np.unpackbits(as_bytes, axis=1, bitorder="little")[:, :l]


def hash_block(bits, matrix: HashMatrix) -> np.ndarray:
    """GF(2) product of an ``n``-bit input with the ``n x l`` matrix.

    Returns the ``l`` output bits as a uint8 0/1 array.
    """
    arr = np.asarray(bits)
    if arr.ndim != 1 or arr.size != matrix.n:
        raise InvalidParameterError(
            f"input length {arr.size} does not match matrix rows {matrix.n}"
        )
    return hash_blocks(arr[None, :], matrix)[0]


def hash_blocks(blocks, matrix: HashMatrix) -> np.ndarray:
    """Hash a ``(B, n)`` batch of inputs with one matrix; returns ``(B, l)`` bits."""
    batch = _as_block_batch(blocks, matrix.n)
    out = np.zeros((batch.shape[0], matrix.words), dtype=np.uint64)
    _xor_rows(batch, matrix.rows, out)
    return _unpack_words(out, matrix.l)


@numba.njit(cache=True)
def _encode(symbols, offset, b, out):
    top = (1 << b) - 1
    for i in range(symbols.size):
        code = min(max(symbols[i] + offset, 0), top)
        for k in range(b):
            out[i * b + k] = (code >> (b - 1 - k)) & 1


def encode_symbols(symbols, partition: Partition, b: int) -> np.ndarray:
    """Offset-binary encoding ``label + M`` on ``b`` bits, most significant first.

    Overflow labels and any code outside ``0 .. 2**b - 1`` saturate.
    """
    if not 1 <= b <= 16:
        raise InvalidParameterError("bits per symbol must lie in 1..16")
    symbols = np.ascontiguousarray(symbols, dtype=np.int64).ravel()
    out = np.empty(symbols.size * b, dtype=np.uint8)
    _encode(symbols, partition.max_index, b, out)
    return out


@dataclass
class ExtractorSpec:
    """Extractor parameters.

    Attributes
    ----------
    n : int
        Input substring length in bits; a multiple of ``b``.
    b : int
        Bits per encoded measurement.
    matrix_seed : int, bytes or str
        Key for pseudo-random matrix generation.
    l : int, optional
        Fixed output length. When ``None`` it is derived per substring from the
        certified ``h_low`` via :func:`output_length`.
    mode : MatrixMode
    regenerate : bool
        Fresh matrix for every substring (default) or a single reused matrix.
    margin : float
        Security margin in bits subtracted before flooring the output length.
    """

    n: int = 10000
    b: int = 5
    matrix_seed: SeedLike = 0
    l: Optional[int] = None
    mode: MatrixMode = MatrixMode.FULL
    regenerate: bool = True
    margin: float = 0.0
    _fixed: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.mode = MatrixMode(self.mode)
        if self.n < 1 or self.b < 1:
            raise InvalidParameterError("n and b must be positive")
        if self.n % self.b:
            raise InvalidParameterError(f"n={self.n} is not divisible by b={self.b}")
        if self.l is not None and not 0 < self.l <= self.n:
            raise InvalidParameterError("need 0 < l <= n")

    def length_for(self, h_low: float) -> int:
        if self.l is not None:
            return self.l
        return output_length(self.n, h_low, self.b, self.margin)

    def matrix(self, index: int, l: int) -> HashMatrix:
        if self.regenerate:
            return random_matrix(self.matrix_seed, self.n, l, index=index, mode=self.mode)
        if l not in self._fixed:
            self._fixed[l] = random_matrix(self.matrix_seed, self.n, l, index=0, mode=self.mode)
        return self._fixed[l]

    def fixed_hasher(self, l: int) -> FixedMatrixHasher:
        key = ("hasher", l)
        if key not in self._fixed:
            self._fixed[key] = FixedMatrixHasher(self.matrix(0, l))
        return self._fixed[key]

    def describe(self) -> dict:
        seed = self.matrix_seed
        if isinstance(seed, (bytes, bytearray)):
            seed = seed.hex()
        return {
            "n": self.n,
            "b": self.b,
            "l": self.l,
            "mode": self.mode.value,
            "regenerate": self.regenerate,
            "margin": self.margin,
            "matrix_seed": seed,
        }


@dataclass
class ExtractionResult:
    """Packed extractor output: first bit is the LSB of byte 0."""

    packed: bytes
    n_bits: int
    blocks: list

    def bits(self) -> np.ndarray:
        raw = np.frombuffer(self.packed, dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[: self.n_bits]


def pack_bits(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def extract_stream(
    symbols,
    partition: Partition,
    spec: ExtractorSpec,
    h_low: Union[float, Sequence[float]],
    *,
    first_index: int = 0,
) -> ExtractionResult:
    """Encode, split into ``n``-bit substrings and hash each one.

    Parameters
    ----------
    symbols : array of int
        Data-quadrature outcome labels.
    partition : Partition
    spec : ExtractorSpec
    h_low : float or sequence of float
        Certified bound, either one value or one per substring.
    first_index : int
        Global index of the first substring (selects the matrices).

    The trailing partial substring is discarded.
    """
    raw = encode_symbols(symbols, partition, spec.b)
    n_blocks = raw.size // spec.n
    h = np.broadcast_to(np.asarray(h_low, dtype=float), (n_blocks,)) if np.ndim(h_low) == 0 \
        else np.asarray(h_low, dtype=float)
    if h.size < n_blocks:
        raise InvalidParameterError("fewer h_low values than substrings")
    outputs = []
    blocks = []
    inputs = raw[: n_blocks * spec.n].reshape(n_blocks, spec.n)
    if spec.regenerate:
        for k in range(n_blocks):
            l = spec.length_for(float(h[k]))
            matrix = spec.matrix(first_index + k, l)
            outputs.append(hash_blocks(inputs[k : k + 1], matrix).ravel())
            blocks.append({"index": first_index + k, "l": l, "h_low": float(h[k])})
    else:
        lengths = [spec.length_for(float(x)) for x in h[:n_blocks]]
        for l in sorted(set(lengths)):
            sel = np.flatnonzero(np.asarray(lengths) == l)
            out = spec.fixed_hasher(l)(inputs[sel])
            for row, k in zip(out, sel):
                outputs.append((k, row))
        outputs = [row for _, row in sorted(outputs, key=lambda kv: kv[0])]
        blocks = [{"index": first_index + k, "l": lengths[k], "h_low": float(h[k])}
                  for k in range(n_blocks)]
    bits = np.concatenate(outputs) if outputs else np.zeros(0, dtype=np.uint8)
    return ExtractionResult(pack_bits(bits), int(bits.size), blocks)

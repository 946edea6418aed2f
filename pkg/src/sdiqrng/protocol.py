"""Source-device-independent protocol: check selection, certification and rates.

Each recalibration block of ``L`` measurements proceeds in four steps:

1. ``n_Q`` check instants are chosen uniformly from the seed pool,
2. check instants measure Q, all others measure P,
3. the Q outcomes give an estimate of ``H_max`` and hence ``h_low``,
4. the P outcomes are hashed down to ``h_low`` bits per measurement.

Check outcomes are estimation data only and never reach the output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .combinatorics import seed_cost, select_check_instants
from .entropy import (
    EntropyReport,
    Estimator,
    classical_min_entropy,
    estimate_max_entropy,
    max_entropy,
    min_entropy_lower_bound,
    overlap_constant,
    tail_error_bound,
)
from .errors import (
    InsufficientDataError,
    InvalidParameterError,
    SeedExhaustedError,
)
from .extractor import ExtractionResult, ExtractorSpec, extract_stream, pack_bits
from .seeding import GeneratedSeedPool, SeedLike, SeedPool, seed_sequence
from .states import (
    DiscreteDistribution,
    GaussianState,
    Partition,
    Quadrature,
    SampleBlock,
    sample_quadrature,
)

DEFAULT_BLOCK = 2**20


def ceil_sqrt(m: int) -> int:
    r = math.isqrt(int(m))
    return r + (r * r < m)


def secure_rate(m: int, n_q: int, h_low: float, t: float) -> float:
    """Net output bits per measurement, ``max(0, ((m - n_Q) h_low - t) / m)``."""
    if not m > n_q:
        raise InvalidParameterError(f"need m > n_Q, got m={m}, n_Q={n_q}")
    return max(0.0, ((m - n_q) * float(h_low) - float(t)) / m)


def seed_expansion_ratio(m: int, h_low: float, n_q: Optional[int] = None) -> float:
    """Produced bits ``(m - n_Q) h_low`` per consumed seed bit ``t(m)``."""
    n_q = ceil_sqrt(m) if n_q is None else int(n_q)
    return (m - n_q) * max(0.0, h_low) / seed_cost(m, n_q)


@dataclass
class ProtocolConfig:
    """Parameters of a protocol run.

    Attributes
    ----------
    m : int
        Total number of measurements.
    partition : Partition
        Shared by both quadratures (``dq = dp = partition.delta``).
    n_q : int, optional
        Checks per block; ``ceil(sqrt(L))`` for a block of length ``L`` if unset.
    estimator : {"bayesian", "plugin"}
    recalibration_block : int
        Measurements per certification window. The last block may be shorter.
    seed : SeedPool, bytes or int
        Selection randomness. Bytes and pools are used bit for bit; an
        integer seeds an unbounded pseudo-random pool (simulation
        convenience).
    extractor : ExtractorSpec, optional
        Hash the data outcomes when given.
    reinvest : bool
        Append extracted bits to the seed pool after each block.
    """

    m: int
    partition: Partition
    n_q: Optional[int] = None
    estimator: Estimator = Estimator.BAYESIAN
    recalibration_block: int = DEFAULT_BLOCK
    seed: Union[SeedPool, bytes, int] = 0
    extractor: Optional[ExtractorSpec] = None
    reinvest: bool = False

    def __post_init__(self):
        self.estimator = Estimator(self.estimator)
        if self.estimator is Estimator.EXACT:
            raise InvalidParameterError("protocol runs need the plugin or bayesian estimator")
        if self.m < 2:
            raise InvalidParameterError("m must be >= 2")
        if self.recalibration_block < 2:
            raise InvalidParameterError("recalibration_block must be >= 2")
        for length in set(self.block_lengths()):
            k = self.checks_for(length)
            if not 1 <= k < length:
                raise InvalidParameterError(
                    f"need 1 <= n_Q < block length, got n_Q={k} for a block of {length}"
                )
        first = self.block_lengths()[0]
        if isinstance(self.seed, (bytes, bytearray, SeedPool)):
            available = self._pool().remaining
            if available < seed_cost(first, self.checks_for(first)):
                raise SeedExhaustedError(
                    f"seed holds {available} bits, the first block needs "
                    f"{seed_cost(first, self.checks_for(first))}"
                )

    def block_lengths(self) -> List[int]:
        full, rest = divmod(self.m, min(self.recalibration_block, self.m))
        lengths = [min(self.recalibration_block, self.m)] * full
        if rest:
            # a tail too short for one check is merged into the previous block
            if rest < 2 and lengths:
                lengths[-1] += rest
            else:
                lengths.append(rest)
        return lengths

    def checks_for(self, length: int) -> int:
        return ceil_sqrt(length) if self.n_q is None else int(self.n_q)

    def seed_bits_required(self) -> int:
        return sum(seed_cost(L, self.checks_for(L)) for L in self.block_lengths())

    def _pool(self) -> SeedPool:
        if isinstance(self.seed, SeedPool):
            return self.seed.copy()
        if isinstance(self.seed, (bytes, bytearray)):
            return SeedPool.from_bytes(self.seed)
        return GeneratedSeedPool(self.seed)

    def describe(self) -> dict:
        seed = self.seed
        if isinstance(seed, SeedPool):
            seed = {"pool_bits": seed.remaining}
        elif isinstance(seed, (bytes, bytearray)):
            seed = {"bytes": len(seed)}
        return {
            "m": self.m,
            "n_q": self.n_q,
            "partition": self.partition.describe(),
            "estimator": self.estimator.value,
            "recalibration_block": self.recalibration_block,
            "seed": seed,
            "reinvest": self.reinvest,
            "extractor": None if self.extractor is None else self.extractor.describe(),
        }


def _bin_centres(labels: np.ndarray, partition: Partition) -> np.ndarray:
    labels = np.clip(labels, -partition.max_index, partition.max_index)
    shift = 0.0 if partition.centered else 0.5
    return np.clip((labels + shift) * partition.delta, -partition.p_max, partition.p_max)


def estimate_sigma(symbols, partition: Partition) -> float:
    """Standard deviation estimated from bin centres with Sheppard's correction."""
    x = _bin_centres(np.asarray(symbols, dtype=np.int64), partition)
    var = float(np.mean(x * x)) - partition.delta**2 / 12
    return math.sqrt(max(var, partition.delta**2 / 12))


def certify(samples: SampleBlock, check_indices, config: ProtocolConfig) -> EntropyReport:
    """Entropy bound of one block from its check outcomes.

    ``h_inf`` is the plug-in min-entropy of the data outcomes (informational)
    and ``tail_error`` the overflow bound for the check count with the
    standard deviation estimated from the check outcomes.
    """
    check_indices = np.asarray(check_indices, dtype=np.int64)
    if check_indices.size == 0:
        raise InsufficientDataError("no check measurements")
    if check_indices.min() < 0 or check_indices.max() >= len(samples):
        raise InvalidParameterError("check index outside the block")
    is_check = samples.tags == SampleBlock.CHECK
    if not is_check[check_indices].all() or is_check.sum() != check_indices.size:
        raise InvalidParameterError("sample tags disagree with the check indices")
    q = samples.symbols[check_indices]
    q_counts = DiscreteDistribution.from_symbols(samples.partition, q)
    h_max = estimate_max_entropy(q_counts, config.estimator)
    data = samples.data_symbols()
    h_inf = None
    if data.size:
        h_inf = classical_min_entropy(
            DiscreteDistribution.from_symbols(samples.partition, data).frequencies()
        )
    delta = samples.partition.delta
    tail = tail_error_bound(estimate_sigma(q, samples.partition), samples.partition, q.size)
    return min_entropy_lower_bound(
        delta,
        delta,
        h_max,
        h_inf=h_inf,
        estimator=config.estimator,
        tail_error=tail,
        n_check=int(q.size),
    )


def certify_distributions(
    p_dist: DiscreteDistribution, q_dist: DiscreteDistribution
) -> EntropyReport:
    """Bound from exact outcome distributions (no sampling, no estimation)."""
    delta = q_dist.partition.delta
    return min_entropy_lower_bound(
        delta,
        delta,
        max_entropy(q_dist),
        h_inf=classical_min_entropy(p_dist),
        estimator=Estimator.EXACT,
    )


@dataclass
class BlockReport:
    index: int
    start: int
    length: int
    n_q: int
    t_bits: int
    entropy: EntropyReport
    r_sec: float
    extracted_bits: int = 0
    variance: Optional[float] = None
    seed_drawn: int = 0

    def to_dict(self) -> dict:
        out = {
            "index": self.index,
            "start": self.start,
            "length": self.length,
            "n_q": self.n_q,
            "t_bits": self.t_bits,
            "r_sec": self.r_sec,
            "extracted_bits": self.extracted_bits,
            "variance": self.variance,
            "seed_drawn": self.seed_drawn,
        }
        out.update(self.entropy.to_dict())
        return out


@dataclass
class RunReport:
    """Outcome of :func:`run_protocol`.

    ``entropy`` aggregates the blocks with length weights; with a single
    block it is that block's report. ``r_sec`` is the length-weighted mean of
    the clamped per-block rates.
    """

    config: dict
    blocks: List[BlockReport]
    entropy: Optional[EntropyReport]
    t_bits: int
    r_sec: float
    extracted_bits: int
    output: Optional[ExtractionResult] = None
    seed_consumed: int = 0
    seed_reinvested: int = 0
    partial: bool = False
    error: Optional[str] = None

    @property
    def h_low_trace(self) -> np.ndarray:
        return np.array([b.entropy.h_low for b in self.blocks])

    @property
    def measurements(self) -> int:
        return sum(b.length for b in self.blocks)

    def to_dict(self) -> dict:
        ent = self.entropy.to_dict() if self.entropy is not None else {}
        return {
            "config": self.config,
            "h_inf": ent.get("h_inf"),
            "h_max": ent.get("h_max"),
            "estimator": self.config.get("estimator"),
            "c": ent.get("c"),
            "h_low": ent.get("h_low"),
            "tail_error": ent.get("tail_error"),
            "t_bits": self.t_bits,
            "r_sec": self.r_sec,
            "extracted_bits": self.extracted_bits,
            "seed_consumed": self.seed_consumed,
            "seed_reinvested": self.seed_reinvested,
            "partial": self.partial,
            "error": self.error,
            "blocks": [b.to_dict() for b in self.blocks],
        }


def _aggregate(blocks: Sequence[BlockReport]) -> Optional[EntropyReport]:
    if not blocks:
        return None
    if len(blocks) == 1:
        return blocks[0].entropy
    w = np.array([b.length for b in blocks], dtype=float)
    w /= w.sum()

    def mean(values):
        return float(np.dot(w, values))

    ents = [b.entropy for b in blocks]
    h_inf = None
    if all(e.h_inf is not None for e in ents):
        h_inf = mean([e.h_inf for e in ents])
    return EntropyReport(
        h_inf=h_inf,
        h_max=mean([e.h_max for e in ents]),
        estimator=ents[0].estimator,
        overlap=ents[0].overlap,
        h_low=mean([e.h_low for e in ents]),
        tail_error=float(sum(e.tail_error for e in ents)),
        n_check=int(sum(e.n_check for e in ents)),
    )


def _subseed(seed: SeedLike, *keys: int) -> int:
    state = seed_sequence(seed, *keys).generate_state(2, np.uint64)
    return int(state[0]) << 64 | int(state[1])


Source = Union[GaussianState, Sequence[GaussianState], SampleBlock]


def _block_samples(source, b: int, start: int, length: int, checks: np.ndarray,
                   partition: Partition, source_seed: SeedLike) -> Tuple[SampleBlock, Optional[float]]:
    if isinstance(source, SampleBlock):
        if source.partition != partition:
            raise InvalidParameterError("ingested samples use a different partition")
        return source.slice(start, start + length).retag(checks), None
    state = source if isinstance(source, GaussianState) else source[b]
    k = checks.size
    symbols = np.empty(length, dtype=np.int32)
    tags = np.zeros(length, dtype=np.uint8)
    mask = np.zeros(length, dtype=bool)
    mask[checks] = True
    if length > k:
        data = sample_quadrature(state, Quadrature.P, partition, length - k,
                                 _subseed(source_seed, b, 0))
        symbols[~mask] = data.symbols
    q = sample_quadrature(state, Quadrature.Q, partition, k, _subseed(source_seed, b, 1))
    symbols[mask] = q.symbols
    tags[mask] = SampleBlock.CHECK
    meta = {"state": state.describe(), "block": b}
    return SampleBlock(partition, symbols, tags, meta), state.variance(Quadrature.P)


def protocol_blocks(
    config: ProtocolConfig,
    source: Source,
    source_seed: SeedLike = 0,
    pool: Optional[SeedPool] = None,
) -> Iterator[Tuple[BlockReport, SampleBlock]]:
    """Yield ``(report, samples)`` per recalibration block, without extraction.

    Raises :class:`SeedExhaustedError` when the pool cannot fund the next
    block's check selection.
    """
    pool = config._pool() if pool is None else pool
    lengths = config.block_lengths()
    if isinstance(source, SampleBlock):
        if len(source) < config.m:
            raise InsufficientDataError(f"source holds {len(source)} of {config.m} measurements")
    elif not isinstance(source, GaussianState) and len(source) < len(lengths):
        raise InvalidParameterError(f"need one state per block ({len(lengths)})")
    start = 0
    for b, length in enumerate(lengths):
        k = config.checks_for(length)
        before = pool.consumed
        checks = select_check_instants(length, k, pool)
        samples, variance = _block_samples(source, b, start, length, checks,
                                           config.partition, source_seed)
        entropy = certify(samples, checks, config)
        t = seed_cost(length, k)
        report = BlockReport(
            index=b,
            start=start,
            length=length,
            n_q=k,
            t_bits=t,
            entropy=entropy,
            r_sec=secure_rate(length, k, entropy.h_low, t),
            variance=variance,
            seed_drawn=pool.consumed - before,
        )
        yield report, samples
        start += length


def run_protocol(config: ProtocolConfig, source: Source, source_seed: SeedLike = 0) -> RunReport:
    """Run the protocol over ``config.m`` measurements.

    Parameters
    ----------
    config : ProtocolConfig
    source : GaussianState, sequence of GaussianState or SampleBlock
        A state (or one state per block) is sampled with ``source_seed``;
        an ingested block supplies the outcomes directly and its check
        positions are re-tagged from the selected instants.
    source_seed : int, bytes or str

    Returns
    -------
    RunReport
        Partial (``partial=True``) when the seed pool runs dry.
    """
    pool = config._pool()
    blocks: List[BlockReport] = []
    outputs = []
    reinvested = 0
    matrix_index = 0
    error = None
    spec = config.extractor
    gen = protocol_blocks(config, source, source_seed, pool)
    while True:
        try:
            report, samples = next(gen)
        except StopIteration:
            break
        except SeedExhaustedError as exc:
            error = str(exc)
            break
        if spec is not None and report.entropy.h_low > 0:
            result = extract_stream(samples.data_symbols(), config.partition, spec,
                                    report.entropy.h_low, first_index=matrix_index)
            matrix_index += len(result.blocks)
            bits = result.bits()
            report.extracted_bits = int(bits.size)
            outputs.append(bits)
            if config.reinvest and bits.size:
                pool.feed(bits)
                reinvested += int(bits.size)
        blocks.append(report)
    output = None
    if spec is not None:
        bits = np.concatenate(outputs) if outputs else np.zeros(0, dtype=np.uint8)
        output = ExtractionResult(pack_bits(bits), int(bits.size), [])
    total = sum(b.length for b in blocks)
    r_sec = sum(b.r_sec * b.length for b in blocks) / total if total else 0.0
    return RunReport(
        config=config.describe(),
        blocks=blocks,
        entropy=_aggregate(blocks),
        t_bits=int(sum(b.t_bits for b in blocks)),
        r_sec=float(r_sec),
        extracted_bits=int(sum(b.extracted_bits for b in blocks)),
        output=output,
        seed_consumed=pool.consumed,
        seed_reinvested=reinvested,
        partial=error is not None,
        error=error,
    )


def overlap_for(partition: Partition) -> float:
    """``-log2 c`` for equal bin widths on both quadratures."""
    return overlap_constant(partition.delta, partition.delta).neg_log2

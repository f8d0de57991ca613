"""Goodput, verification delay and buffer-memory accounting."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Sequence

from .channel import PacketLayout
from .mac import Key
from .receiver import AuthOutcome, flush_count, process_trace
from .schemes import SchemeConfig, wire_tag_bits_at


def transmitted_bits(layout: PacketLayout, config: SchemeConfig, n_packets: int) -> int:
    per_packet = layout.header_bits + layout.payload_bits
    if config.kind == "agg":
        tagged = n_packets // config.n
        return n_packets * per_packet + tagged * -(-config.s // 8) * 8
    return n_packets * (per_packet + wire_tag_bits_at(config, 0))


def flush_bits(config: SchemeConfig, key: Key | None, layout: PacketLayout, stream_len: int) -> int:
    """Bits of the tag-only packets sent after the stream (empty-tag packets are skipped)."""
    total = 0
    for i in range(stream_len, stream_len + flush_count(config, key, stream_len)):
        tag = wire_tag_bits_at(config, i)
        if tag:
            total += layout.header_bits + tag
    return total


def goodput_exact(outcomes: Sequence[AuthOutcome], layout: PacketLayout, config: SchemeConfig,
                  flushed_extra_bits: int = 0) -> Fraction:
    auth = sum(1 for o in outcomes if o.auth_at is not None)
    return Fraction(layout.payload_bits * auth,
                    transmitted_bits(layout, config, len(outcomes)) + flushed_extra_bits)


def goodput(outcomes: Sequence[AuthOutcome], layout: PacketLayout, config: SchemeConfig,
            flushed_extra_bits: int = 0) -> float:
    """Authenticated payload over everything transmitted (lost packets, headers, tags, flush)."""
    return float(goodput_exact(outcomes, layout, config, flushed_extra_bits))


def goodput_norm(outcomes: Sequence[AuthOutcome], layout: PacketLayout, config: SchemeConfig,
                 flushed_extra_bits: int = 0) -> float:
    """Goodput relative to sending the same trace with no integrity protection at all."""
    received = sum(1 for o in outcomes if o.received)
    if received == 0:
        return 0.0
    baseline = Fraction(layout.payload_bits * received, (layout.header_bits + layout.payload_bits) * len(outcomes))
    return float(goodput_exact(outcomes, layout, config, flushed_extra_bits) / baseline)


def _delays(outcomes: Sequence[AuthOutcome]) -> list[int]:
    return sorted(o.delay for o in outcomes if o.auth_at is not None)


def delay_cdf(outcomes: Sequence[AuthOutcome]) -> list[tuple[int, float]] | None:
    """Empirical CDF over authenticated messages; None when nothing authenticated."""
    delays = _delays(outcomes)
    if not delays:
        return None
    k = len(delays)
    cdf = []
    for i, d in enumerate(delays):
        if i + 1 == k or delays[i + 1] != d:
            cdf.append((d, (i + 1) / k))
    return cdf


def percentile(sorted_values: Sequence[int], q: float) -> int | None:
    if not sorted_values:
        return None
    rank = max(1, math.ceil(q * len(sorted_values)))
    return sorted_values[rank - 1]


def memory_model(config: SchemeConfig) -> dict[str, int]:
    """Bytes buffered for tag aggregation at sender and receiver."""
    s, L = config.s, config.tag_bits
    if config.kind == "trad":
        return {"sender_bytes": 0, "receiver_bytes": 0}
    if config.kind == "agg":
        return {"sender_bytes": -(-s // 8), "receiver_bytes": -(-s // 8)}
    if config.kind == "comp":
        # receiver: compound tag of the block being checked plus the one being assembled
        return {"sender_bytes": -(-s // 8), "receiver_bytes": 2 * -(-s // 8)}
    if config.kind == "sw":
        nl = config.n * L
        return {"sender_bytes": -(-nl // 8), "receiver_bytes": -(-nl // 8)}
    W = config.r2d2_window
    counter_bits = max(1, config.coverage_bits.bit_length())
    return {"sender_bytes": -(-W * L // 8), "receiver_bytes": -(-(W * L + W * counter_bits) // 8)}


@dataclass
class MetricsReport:
    scheme: str
    goodput: float
    goodput_norm: float
    authenticated_count: int
    received_count: int
    total_count: int
    flush_packets: int
    mean_delay: float | None
    p95_delay: int | None
    max_delay: int | None
    delay_cdf: list[tuple[int, float]] | None
    sender_mem_bytes: int
    receiver_mem_bytes: int

    @property
    def never_fraction(self) -> float:
        return 1 - self.authenticated_count / self.total_count

    def to_dict(self) -> dict:
        d = asdict(self)
        d["delay_cdf"] = None if self.delay_cdf is None else [list(p) for p in self.delay_cdf]
        return d


def report(outcomes: Sequence[AuthOutcome], layout: PacketLayout, config: SchemeConfig,
           flushed_extra_bits: int = 0, flush_packets: int = 0) -> MetricsReport:
    delays = _delays(outcomes)
    mem = memory_model(config)
    return MetricsReport(
        scheme=config.spec,
        goodput=goodput(outcomes, layout, config, flushed_extra_bits),
        goodput_norm=goodput_norm(outcomes, layout, config, flushed_extra_bits),
        authenticated_count=len(delays),
        received_count=sum(1 for o in outcomes if o.received),
        total_count=len(outcomes),
        flush_packets=flush_packets,
        mean_delay=(sum(delays) / len(delays)) if delays else None,
        p95_delay=percentile(delays, 0.95),
        max_delay=delays[-1] if delays else None,
        delay_cdf=delay_cdf(outcomes),
        sender_mem_bytes=mem["sender_bytes"],
        receiver_mem_bytes=mem["receiver_bytes"],
    )


def evaluate(config: SchemeConfig, key: Key | None, trace, layout: PacketLayout, flush: bool = False,
             mode: str = "dependency", seed: int = 0) -> MetricsReport:
    """Receiver run plus metrics for one configuration on one trace."""
    outcomes = process_trace(config, key, trace, mode=mode, flush=flush, seed=seed)
    n = len(outcomes)
    fbits = flush_bits(config, key, layout, n) if flush else 0
    fpk = flush_count(config, key, n) if flush else 0
    return report(outcomes, layout, config, fbits, fpk)

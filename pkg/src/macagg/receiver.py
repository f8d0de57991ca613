"""Verification engine: which tag slots verify, and when messages authenticate.

A slot of packet ``i`` is verifiable iff packet ``i`` arrived and every real
message it references arrived. Each verifiable slot credits one security
bit to every message it references; a message authenticates at the first
packet that lifts its credit to the security level.
"""
from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import IntegrityFailure, UnsupportedScheme
from .mac import Bits, Key, compute_full_tag
from .schemes import FRAGMENTED_RUNS, SchemeConfig, Sender, TagMatrix, dependency_model

NEVER = None
MODES = ("dependency", "full")


@dataclass(frozen=True)
class ReceptionEvent:
    packet_index: int
    received: bool
    payload: bytes | None = None
    tag_bits: Bits | None = None


@dataclass(frozen=True)
class AuthOutcome:
    message_index: int
    received: bool
    credited_bits: int
    auth_at: int | None
    timeline: tuple[tuple[int, int], ...] | None = None

    @property
    def delay(self) -> int | None:
        return None if self.auth_at is None else self.auth_at - self.message_index

    @property
    def authenticated(self) -> bool:
        return self.auth_at is not None


def _flags(trace) -> list[bool]:
    flags = getattr(trace, "flags", trace)
    return [bool(f) for f in flags]


def _phase_credit(model, phase: int):
    """Offsets of one phase, an offset->column map, group membership, group counts and totals."""
    memo = model.__dict__.setdefault("_credit_memo", {})
    if phase not in memo:
        groups = model._groups[phase]
        offsets = sorted({d for offs, _ in groups for d in offs})
        col = {d: k for k, d in enumerate(offsets)}
        member = np.zeros((len(groups), len(offsets)), dtype=np.int64)
        for g, (offs, _) in enumerate(groups):
            for d in offs:
                member[g, col[d]] = 1
        cnts = np.array([c for _, c in groups], dtype=np.int64)
        memo[phase] = (offsets, col, member, cnts, cnts @ member)
    return memo[phase]


class Receiver:
    """Incremental verifier for one stream of ``stream_len`` real messages.

    Packets at index >= stream_len are flush packets: they carry tags only and
    the messages at those indices are virtual, as are all negative indices.
    """

    def __init__(self, config: SchemeConfig, key: Key | None, stream_len: int, full_crypto: bool = False,
                 strict: bool = True, timeline: bool = False):
        if full_crypto and key is None:
            raise ValueError("full-crypto verification needs a key")
        self.config = config
        self.key = key
        self.model = dependency_model(config, key)
        self.N = stream_len
        self.full_crypto = full_crypto
        self.strict = strict
        self.failures: list[IntegrityFailure] = []
        self._received: list[bool] = []
        self._payloads: dict[int, bytes] = {}
        self._tags: dict[int, Bits] = {}
        self._matrix: TagMatrix | None = None
        self._lost: list[int] = []
        self.credits = [0] * stream_len
        self.auth_at: list[int | None] = [None] * stream_len
        self._timeline = [[] for _ in range(stream_len)] if timeline else None
        self._next = 0

    def _arrived(self, m: int) -> bool:
        if m < 0 or m >= self.N:
            return True
        return m < len(self._received) and self._received[m]

    def _lost_offsets(self, i: int) -> set[int]:
        # offsets (from packet i) of lost real messages still inside the window
        out = set()
        reach = self.model.max_offset
        for m in reversed(self._lost):
            if i - m > reach:
                break
            out.add(i - m)
        return out

    def _full_tag(self, m: int) -> Bits:
        t = self._tags.get(m)
        if t is None:
            payload = self._payloads.get(m, b"") if 0 <= m < self.N else b""
            t = compute_full_tag(self.key, m, payload, self.config.coverage_bits).bits
            self._tags[m] = t
        return t

    def receive(self, event: ReceptionEvent) -> None:
        i = event.packet_index
        if i != self._next:
            raise ValueError(f"expected packet {self._next}, got {i}")
        self._next += 1
        if i < self.N:
            self._received.append(bool(event.received))
            if not event.received:
                self._lost.append(i)
            if event.received and self.full_crypto:
                if event.payload is None:
                    raise ValueError(f"full-crypto mode needs the payload of packet {i}")
                self._payloads[i] = event.payload
        if not event.received:
            return
        s, N, credits = self.config.s, self.N, self.credits
        phase = i % self.model.period
        gone = self._lost_offsets(i)
        touched = set()
        if self.full_crypto:
            if event.tag_bits is None or len(event.tag_bits) != self.model.tag_bits(i):
                raise ValueError(f"packet {i} carries a malformed tag")
            L = len(event.tag_bits)
            runs = self.model.runs(i)
            g = self.model.gather(i) if len(runs) > FRAGMENTED_RUNS else None
            if g is not None:
                if self._matrix is None:
                    self._matrix = TagMatrix(self.config.coverage_bits, self.model.max_offset,
                                             lambda m: self._full_tag(m) if self._arrived(m) else None)
                expected = self._matrix.assemble(i, g)
            else:
                expected = 0
                for d, src, slot, length in runs:
                    m = i - d
                    if self._arrived(m):
                        expected ^= self._full_tag(m).chunk(src, length) << (L - slot - length)
            diff = expected ^ event.tag_bits.value
            for offs, mask in self.model._slot_masks[phase]:
                if not gone.isdisjoint(offs):
                    continue
                bad = diff & mask
                if bad:
                    failure = IntegrityFailure(i, L - bad.bit_length())
                    if self.strict:
                        raise failure
                    self.failures.append(failure)
                    mask &= ~diff
                cnt = bin(mask).count("1")
                for d in offs:
                    m = i - d
                    if 0 <= m < N:
                        credits[m] += cnt
                        touched.add(m)
        else:
            offsets, col, member, cnts, totals = _phase_credit(self.model, phase)
            hit = [col[d] for d in gone if d in col]
            if hit:
                # groups mixing in a lost message are void; the rest credit every offset they hold
                alive = ~member[:, hit].any(axis=1)
                per_offset = (cnts * alive) @ member
            else:
                per_offset = totals
            for d, c in zip(offsets, per_offset.tolist()):
                m = i - d
                if c and 0 <= m < N:
                    credits[m] += c
                    touched.add(m)
        for m in sorted(touched):
            if self._timeline is not None:
                self._timeline[m].append((i, self.credits[m]))
            if self.auth_at[m] is None and self.credits[m] >= s:
                self.auth_at[m] = i

    def outcomes(self) -> list[AuthOutcome]:
        out = []
        for m in range(self.N):
            received = m < len(self._received) and self._received[m]
            tl = tuple(self._timeline[m]) if self._timeline is not None else None
            out.append(AuthOutcome(m, received, self.credits[m], self.auth_at[m], tl))
        return out


def synth_payload(seed: int, m: int, size: int = 16) -> bytes:
    """Deterministic filler payload for message m."""
    out = b""
    ctr = 0
    while len(out) < size:
        out += hashlib.sha256(b"macagg-payload|%d|%d|%d" % (seed, m, ctr)).digest()
        ctr += 1
    return out[:size]


def flush_count(config: SchemeConfig, key: Key | None, stream_len: int) -> int:
    return dependency_model(config, key).flush_packets(stream_len)


def build_events(config: SchemeConfig, key: Key, trace, flush: bool = False, seed: int = 0,
                 payload_size: int = 16) -> list[ReceptionEvent]:
    """Honest sender: deterministic payloads, real tags, delivered per the trace.

    Flush packets are assumed delivered.
    """
    flags = _flags(trace)
    N = len(flags)
    payloads = {m: synth_payload(seed, m, payload_size) for m in range(N) if flags[m]}
    # the sender knows every payload; lost ones are only needed for tags of later packets
    sender_payloads = _LazyPayloads(seed, payload_size)
    sender = Sender(config, key, sender_payloads, stream_len=N)
    events = []
    total = N + (flush_count(config, key, N) if flush else 0)
    for i in range(total):
        received = flags[i] if i < N else True
        if not received:
            events.append(ReceptionEvent(i, False))
            continue
        tag = sender.emit(i).tag_bits
        events.append(ReceptionEvent(i, True, payloads.get(i), tag))
    return events


class _LazyPayloads:
    def __init__(self, seed: int, size: int):
        self.seed, self.size = seed, size

    def __getitem__(self, m: int) -> bytes:
        return synth_payload(self.seed, m, self.size)


def process_events(config: SchemeConfig, key: Key | None, events: Iterable[ReceptionEvent], stream_len: int,
                   full_crypto: bool = True, strict: bool = True, timeline: bool = False) -> Receiver:
    rx = Receiver(config, key, stream_len, full_crypto=full_crypto, strict=strict, timeline=timeline)
    for ev in events:
        rx.receive(ev)
    return rx


def _stacked_groups(model, phase: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Slot groups of one phase, stacked into arrays by dependency count."""
    memo = model.__dict__.setdefault("_stacked_memo", {})
    if phase not in memo:
        by_len: dict[int, list] = {}
        for offs, cnt in model._groups[phase]:
            by_len.setdefault(len(offs), []).append((tuple(offs), cnt))
        memo[phase] = [(np.array([o for o, _ in g], dtype=np.int64).reshape(len(g), k),
                        np.array([c for _, c in g], dtype=np.int32))
                       for k, g in sorted(by_len.items()) if k]
    return memo[phase]


def vector_outcomes(config: SchemeConfig, key: Key | None, flags: Sequence[bool], flush: bool = False) -> list[AuthOutcome]:
    """Dependency-only evaluation of a whole trace at once (same results as :class:`Receiver`).

    ``contrib[m, d]`` holds the bits packet ``m + d`` credits to message ``m``;
    a cumulative sum over ``d`` gives the authentication point.
    """
    model = dependency_model(config, key)
    N = len(flags)
    total = N + (model.flush_packets(N) if flush else 0)
    D = model.max_offset
    # arrived[x + D] for message/packet x in [-D, total); virtual and flush entries are True
    arrived = np.ones(total + D, dtype=bool)
    arrived[D:D + N] = np.asarray(flags, dtype=bool)
    contrib = np.zeros((N, D + 1), dtype=np.int32)
    P = model.period
    for phase in range(P):
        pkts = np.arange(phase, total, P)
        if not len(pkts):
            continue
        for offs, cnts in _stacked_groups(model, phase):
            # offs: (G, k) offsets of G groups with k dependencies each
            ok = arrived[pkts + D][:, None] & arrived[pkts[:, None, None] - offs[None] + D].all(axis=2)
            w = ok * cnts[None]
            for col in range(offs.shape[1]):
                m = pkts[:, None] - offs[None, :, col]
                sel = (m >= 0) & (m < N)
                np.add.at(contrib, (m[sel], np.broadcast_to(offs[None, :, col], m.shape)[sel]), w[sel])
    cum = np.cumsum(contrib, axis=1)
    credits = cum[:, -1]
    reached = cum >= config.s
    first = np.argmax(reached, axis=1)
    has = reached[np.arange(N), first]
    received = arrived[D:D + N]
    out = []
    for m in range(N):
        auth = int(m + first[m]) if has[m] else None
        out.append(AuthOutcome(m, bool(received[m]), int(credits[m]), auth))
    return out


def process_trace(config: SchemeConfig, key: Key | None, trace, mode: str = "dependency", flush: bool = False,
                  seed: int = 0, timeline: bool = False, engine: str = "vector") -> list[AuthOutcome]:
    """Authentication outcome of every message of a trace.

    ``mode="full"`` synthesizes payloads, emits real tags and verifies them;
    ``mode="dependency"`` evaluates reachability only. In dependency mode the
    ``vector`` engine is used unless a timeline is requested.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    flags = _flags(trace)
    if not flags:
        raise ValueError("trace must be non-empty")
    N = len(flags)
    if mode == "full":
        if key is None:
            raise ValueError("full-crypto mode needs a key")
        events = build_events(config, key, flags, flush=flush, seed=seed)
        return process_events(config, key, events, N, full_crypto=True, timeline=timeline).outcomes()
    if engine == "vector" and not timeline:
        return vector_outcomes(config, key, flags, flush)
    if engine not in ("vector", "incremental"):
        raise ValueError(f"unknown engine {engine!r}")
    rx = Receiver(config, key, N, timeline=timeline)
    total = N + (flush_count(config, key, N) if flush else 0)
    for i in range(total):
        rx.receive(ReceptionEvent(i, flags[i] if i < N else True))
    return rx.outcomes()


def authenticated_set(outcomes: Sequence[AuthOutcome]) -> set[int]:
    return {o.message_index for o in outcomes if o.auth_at is not None}


def security_timeline(outcomes: Sequence[AuthOutcome], config: SchemeConfig) -> dict[int, list[tuple[int, int]]]:
    if not config.progressive:
        raise UnsupportedScheme(f"{config.spec} is not a progressive scheme")
    if outcomes and outcomes[0].timeline is None:
        raise ValueError("outcomes were produced without timeline=True")
    return {o.message_index: list(o.timeline) for o in outcomes}


def outcomes_csv(outcomes: Sequence[AuthOutcome]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["message_index", "received", "credited_bits", "auth_at", "delay"])
    for o in outcomes:
        w.writerow([o.message_index, int(o.received), o.credited_bits,
                    "" if o.auth_at is None else o.auth_at, "" if o.delay is None else o.delay])
    return buf.getvalue()

"""Sender-side scheme definitions: tag sizes, dependency structure, tag emission.

Every scheme is described by a periodic *pattern*: for packet ``i`` with
phase ``i % period``, each tag slot (bit) lists ``(offset, source_bit)``
entries, meaning bit ``source_bit`` of the full tag of message ``i - offset``
is XORed into that slot. Message indices below zero are virtual (empty
payload, always received), which removes stream-start special cases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Mapping, Sequence

import numpy as np

from .errors import StateError
from .mac import Bits, FullTag, Key, compute_full_tag

KINDS = ("trad", "agg", "comp", "sw", "r2d2")
DEFAULT_SECURITY = 128

Entry = tuple[int, int]  # (message_index, source_bit)
Slot = tuple[Entry, ...]


def overprovisioned_bits(s: int, n: int, o: int) -> int:
    """Per-packet tag length of SW/R2D2: ceil(s/n * (1 + o/100)), rounded up to bytes."""
    raw = -(-s * (100 + o) // (100 * n))
    return -(-raw // 8) * 8


def default_r2d2_window(n: int, g: int) -> int:
    # Keyed dependency sets are only secret if each cell is spread evenly over
    # the window; a message then loses about L*n^2/W entries to its nearest
    # neighbour, so W ~ n^2/g is the smallest window with uniform cells.
    return max(2 * n, -(-n * n // g))


@dataclass(frozen=True)
class SchemeConfig:
    kind: str
    n: int = 1
    g: int = 1
    o: int = 0
    s: int = DEFAULT_SECURITY
    window: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < self.s <= 4096:
            raise ValueError("security level must be in (0, 4096]")
        if self.o < 0:
            raise ValueError("overprovisioning must be >= 0")
        if self.kind == "trad" and (self.n != 1 or self.o != 0):
            raise ValueError("trad implies n=1, o=0")
        if self.kind in ("agg", "comp") and self.o != 0:
            raise ValueError(f"{self.kind} takes no overprovisioning")
        if self.kind == "comp" and self.s % self.n:
            raise ValueError(f"comp:{self.n} needs n to divide the security level {self.s}")
        if self.kind == "r2d2":
            if self.g < 1:
                raise ValueError("g must be >= 1")
            if self.window is not None and self.window < self.n:
                raise ValueError("R2D2 window must be >= n")
        elif self.window is not None:
            raise ValueError("window only applies to r2d2")

    @classmethod
    def parse(cls, text: str, s: int = DEFAULT_SECURITY) -> "SchemeConfig":
        parts = text.strip().lower().split(":")
        kind, args = parts[0], parts[1:]
        try:
            nums = [int(a) for a in args]
        except ValueError:
            raise ValueError(f"malformed scheme spec {text!r}") from None
        arity = {"trad": (0,), "agg": (1,), "comp": (1,), "sw": (2,), "r2d2": (3, 4)}
        if kind not in arity or len(nums) not in arity[kind]:
            raise ValueError(
                f"malformed scheme spec {text!r}; expected trad, agg:n, comp:n, sw:n:o or r2d2:n:g:o[:window]"
            )
        if kind == "trad":
            return cls("trad", s=s)
        if kind in ("agg", "comp"):
            return cls(kind, n=nums[0], s=s)
        if kind == "sw":
            return cls("sw", n=nums[0], o=nums[1], s=s)
        return cls("r2d2", n=nums[0], g=nums[1], o=nums[2], s=s, window=nums[3] if len(nums) == 4 else None)

    @property
    def spec(self) -> str:
        if self.kind == "trad":
            return "trad"
        if self.kind in ("agg", "comp"):
            return f"{self.kind}:{self.n}"
        if self.kind == "sw":
            return f"sw:{self.n}:{self.o}"
        base = f"r2d2:{self.n}:{self.g}:{self.o}"
        return base if self.window is None else f"{base}:{self.window}"

    def __str__(self) -> str:
        return self.spec

    @property
    def progressive(self) -> bool:
        return self.kind in ("sw", "r2d2")

    @property
    def tag_bits(self) -> int:
        """Length of a non-empty tag."""
        if self.kind in ("trad", "agg"):
            return self.s
        if self.kind == "comp":
            return self.s // self.n
        return overprovisioned_bits(self.s, self.n, self.o)

    @property
    def coverage_bits(self) -> int:
        """Potential security bits each message accrues (C)."""
        if self.kind in ("trad", "agg", "comp"):
            return self.s
        return self.n * self.tag_bits

    @property
    def r2d2_window(self) -> int:
        if self.kind != "r2d2":
            raise ValueError("not an r2d2 config")
        return self.window if self.window is not None else default_r2d2_window(self.n, self.g)

    @property
    def mean_tag_bits(self) -> float:
        if self.kind == "agg":
            return self.s / self.n
        return float(self.tag_bits)

    def to_dict(self) -> dict:
        d = {"spec": self.spec, "kind": self.kind, "n": self.n, "s": self.s,
             "tag_bits": self.tag_bits, "coverage_bits": self.coverage_bits}
        if self.kind in ("sw", "r2d2"):
            d["o"] = self.o
        if self.kind == "r2d2":
            d["g"] = self.g
            d["window"] = self.r2d2_window
        return d


def tag_bits_at(config: SchemeConfig, i: int) -> int:
    if config.kind == "agg":
        return config.s if i % config.n == config.n - 1 else 0
    return config.tag_bits


def wire_tag_bits_at(config: SchemeConfig, i: int) -> int:
    return -(-tag_bits_at(config, i) // 8) * 8


@dataclass(frozen=True)
class TagEmission:
    packet_index: int
    tag_bits: Bits


@dataclass(frozen=True)
class DependencySpec:
    packet_index: int
    slots: tuple[Slot, ...]

    @cached_property
    def messages(self) -> frozenset[int]:
        return frozenset(m for slot in self.slots for m, _ in slot)


# (offset, source_bit) per entry, per slot
RelSlot = tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class DependencyModel:
    """Periodic dependency structure of one configured scheme.

    Patterns are indexed by packet phase ``i % period``. ``groups`` and
    ``runs`` are derived views used by the receiver and by tag emission.
    """

    config: SchemeConfig
    period: int
    patterns: tuple[tuple[RelSlot, ...], ...]
    salt: int = 0

    @cached_property
    def max_offset(self) -> int:
        return max((d for pat in self.patterns for slot in pat for d, _ in slot), default=0)

    @cached_property
    def _groups(self) -> tuple[tuple[tuple[tuple[int, ...], int], ...], ...]:
        out = []
        for pat in self.patterns:
            counts: dict[tuple[int, ...], int] = {}
            for slot in pat:
                offs = tuple(sorted(d for d, _ in slot))
                counts[offs] = counts.get(offs, 0) + 1
            out.append(tuple(counts.items()))
        return tuple(out)

    @cached_property
    def _slot_masks(self) -> tuple[tuple[tuple[tuple[int, ...], int], ...], ...]:
        # distinct offset set -> bitmask of tag slots (MSB = slot 0)
        out = []
        for pat in self.patterns:
            L = len(pat)
            masks: dict[tuple[int, ...], int] = {}
            for j, slot in enumerate(pat):
                offs = tuple(sorted(d for d, _ in slot))
                masks[offs] = masks.get(offs, 0) | (1 << (L - 1 - j))
            out.append(tuple(masks.items()))
        return tuple(out)

    @cached_property
    def _runs(self) -> tuple[tuple[tuple[int, int, int, int], ...], ...]:
        out = []
        for pat in self.patterns:
            entries = sorted((d, j, src) for j, slot in enumerate(pat) for d, src in slot)
            runs: list[list[int]] = []
            for d, j, src in entries:
                if runs:
                    r = runs[-1]
                    if r[0] == d and r[2] + r[3] == j and r[1] + r[3] == src:
                        r[3] += 1
                        continue
                runs.append([d, src, j, 1])
            out.append(tuple(tuple(r) for r in runs))
        return tuple(out)

    def tag_bits(self, i: int) -> int:
        return len(self.patterns[i % self.period])

    def spec(self, i: int) -> DependencySpec:
        pat = self.patterns[i % self.period]
        return DependencySpec(i, tuple(tuple((i - d, src) for d, src in slot) for slot in pat))

    def groups(self, i: int) -> list[tuple[tuple[int, ...], int]]:
        """Distinct message sets among packet i's slots, with slot multiplicity."""
        return [(tuple(i - d for d in offs), cnt) for offs, cnt in self._groups[i % self.period]]

    def slot_masks(self, i: int) -> list[tuple[tuple[int, ...], int]]:
        return [(tuple(i - d for d in offs), mask) for offs, mask in self._slot_masks[i % self.period]]

    def runs(self, i: int) -> tuple[tuple[int, int, int, int], ...]:
        """Contiguous (offset, source_start, slot_start, length) chunks of packet i's slots."""
        return self._runs[i % self.period]

    @cached_property
    def _gathers(self):
        out = []
        for pat in self.patterns:
            width = len(pat[0]) if pat else 0
            if not pat or any(len(slot) != width for slot in pat):
                out.append(None)
                continue
            offs = sorted({d for slot in pat for d, _ in slot})
            row = {d: r for r, d in enumerate(offs)}
            R = np.array([[row[d] for d, _ in slot] for slot in pat], dtype=np.intp)
            S = np.array([[src for _, src in slot] for slot in pat], dtype=np.intp)
            out.append((np.array(offs, dtype=np.intp), R, S))
        return tuple(out)

    def gather(self, i: int):
        """(offsets, row index, source bit) arrays for vectorized assembly, or None."""
        return self._gathers[i % self.period]

    @cached_property
    def _offset_sets(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(d for slot in pat for d, _ in slot) for pat in self.patterns)

    def last_carrier(self, m: int) -> int:
        """Index of the last packet that carries an entry of message m."""
        for d in range(self.max_offset, -1, -1):
            if d in self._offset_sets[(m + d) % self.period]:
                return m + d
        return m

    def flush_packets(self, stream_len: int) -> int:
        """Tag-only packets needed after the stream so every real message is fully covered."""
        if stream_len <= 0:
            return 0
        memo = self._flush_memo
        if stream_len not in memo:
            lo = max(0, stream_len - self.max_offset - self.period)
            last = max(self.last_carrier(m) for m in range(lo, stream_len))
            memo[stream_len] = max(0, last - (stream_len - 1))
        return memo[stream_len]

    @cached_property
    def _flush_memo(self) -> dict[int, int]:
        return {}


def _pattern_trad(c: SchemeConfig):
    return 1, ((tuple(((0, j),) for j in range(c.s))),)


def _pattern_agg(c: SchemeConfig):
    n = c.n
    pats = [() for _ in range(n)]
    pats[n - 1] = tuple(tuple((d, j) for d in range(n)) for j in range(c.s))
    return n, tuple(pats)


def _pattern_comp(c: SchemeConfig):
    # Packet i in block b carries chunk (i mod n) of block b-1's compound tag.
    n, L = c.n, c.tag_bits
    pats = []
    for ph in range(n):
        # messages (b-1)n .. bn-1 sit at offsets ph+1 .. ph+n from packet bn+ph
        pats.append(tuple(tuple((ph + n - q, ph * L + j) for q in range(n)) for j in range(L)))
    return n, tuple(pats)


def _pattern_sw(c: SchemeConfig):
    n, L = c.n, c.tag_bits
    return 1, (tuple(tuple((d, d * L + j) for d in range(n)) for j in range(L)),)


@lru_cache(maxsize=256)
def dependency_model(config: SchemeConfig, key: Key | None = None) -> DependencyModel:
    if config.kind == "r2d2":
        if key is None:
            raise StateError("r2d2 dependencies are keyed; a key is required")
        from .r2d2 import R2D2Params, build_assignment

        params = R2D2Params.from_config(config)
        table = build_assignment(params, key, horizon=params.W + 1)
        return table.model
    builder = {"trad": _pattern_trad, "agg": _pattern_agg, "comp": _pattern_comp, "sw": _pattern_sw}
    period, patterns = builder[config.kind](config)
    return DependencyModel(config, period, patterns)


def dependency_spec(config: SchemeConfig, key: Key | None, i: int) -> DependencySpec:
    return dependency_model(config, key).spec(i)


FRAGMENTED_RUNS = 64  # above this many chunks per tag, assemble bits with numpy


def bit_array(bits: Bits) -> np.ndarray:
    return np.unpackbits(np.frombuffer(bits.to_bytes(), dtype=np.uint8))[: bits.length]


def array_value(arr: np.ndarray) -> int:
    n = len(arr)
    return int.from_bytes(np.packbits(arr).tobytes(), "big") >> (-n % 8)


class TagMatrix:
    """Full-tag bits of each message as matrix rows, computed on first use.

    ``fetch(m)`` returns the tag of message m, or None for an all-zero row.
    Row ``m + base`` holds message m, so ``base`` must cover the deepest
    negative (virtual) index.
    """

    def __init__(self, width: int, base: int, fetch):
        self.width, self.base, self.fetch = width, base, fetch
        self.rows = np.zeros((max(64, base + 1), width), dtype=np.uint8)
        self.filled = np.zeros(len(self.rows), dtype=bool)

    def assemble(self, i: int, gather) -> int:
        offs, R, S = gather
        idx = (i + self.base) - offs
        top = int(idx.max()) + 1
        if top > len(self.filled):
            size = max(top, 2 * len(self.filled))
            self.rows = np.vstack([self.rows, np.zeros((size - len(self.rows), self.width), dtype=np.uint8)])
            self.filled = np.concatenate([self.filled, np.zeros(size - len(self.filled), dtype=bool)])
        for r in idx[~self.filled[idx]]:
            t = self.fetch(int(r) - self.base)
            if t is not None:
                self.rows[r] = bit_array(t)
            self.filled[r] = True
        return array_value(np.bitwise_xor.reduce(self.rows[idx[R], S], axis=1))


class Sender:
    """Emits aggregated tags for a message stream, caching each message's full tag.

    ``messages`` maps real indices (>= 0) to payloads. Indices below zero,
    and indices >= ``stream_len`` when given (flush packets), are virtual.
    """

    def __init__(self, config: SchemeConfig, key: Key, messages: Mapping[int, bytes] | Sequence[bytes],
                 stream_len: int | None = None):
        self.config = config
        self.key = key
        self.model = dependency_model(config, key)
        self.messages = messages
        self.stream_len = stream_len
        self._tags: dict[int, Bits] = {}
        self._matrix: TagMatrix | None = None

    def payload(self, m: int) -> bytes:
        if m < 0 or (self.stream_len is not None and m >= self.stream_len):
            return b""
        try:
            return self.messages[m]
        except (KeyError, IndexError):
            raise StateError(f"payload of message {m} is not available") from None

    def full_tag(self, m: int) -> Bits:
        t = self._tags.get(m)
        if t is None:
            t = compute_full_tag(self.key, m, self.payload(m), self.config.coverage_bits).bits
            self._tags[m] = t
        return t

    def emit(self, i: int) -> TagEmission:
        L = self.model.tag_bits(i)
        runs = self.model.runs(i)
        g = self.model.gather(i) if len(runs) > FRAGMENTED_RUNS else None
        if g is not None:
            if self._matrix is None:
                self._matrix = TagMatrix(self.config.coverage_bits, self.model.max_offset, self.full_tag)
            return TagEmission(i, Bits(self._matrix.assemble(i, g), L))
        value = 0
        for d, src, slot, length in self.model.runs(i):
            value ^= self.full_tag(i - d).chunk(src, length) << (L - slot - length)
        return TagEmission(i, Bits(value, L))


def emit_tag(config: SchemeConfig, key: Key, messages: Mapping[int, bytes] | Sequence[bytes], i: int,
             stream_len: int | None = None) -> TagEmission:
    return Sender(config, key, messages, stream_len).emit(i)


def emit_tag_reference(config: SchemeConfig, key: Key, messages, i: int) -> Bits:
    """Bit-by-bit emission straight from the dependency spec (slow, for cross-checks)."""
    spec = dependency_spec(config, key, i)
    tags: dict[int, FullTag] = {}
    out = 0
    for slot in spec.slots:
        bit = 0
        for m, src in slot:
            if m not in tags:
                tags[m] = compute_full_tag(key, m, b"" if m < 0 else messages[m], config.coverage_bits)
            bit ^= tags[m].bits[src]
        out = (out << 1) | bit
    return Bits(out, len(spec.slots))

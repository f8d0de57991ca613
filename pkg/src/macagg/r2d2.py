"""Keyed, loss-bounded dependency construction for R2D2(n, g, o).

Each tag bit ``j`` gets a secret set of ``n`` message offsets drawn from
``[0, W)``; position ``k`` of that set contributes source bit ``k*L + j`` of
the referenced message's full tag. Sets are grown greedily under a load
budget on offset differences so that losing any one packet voids at most
``g*L`` coverage bits of any other message. Sender and receiver re-derive
the same sets from the key.
"""
from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field
from functools import cached_property

from .errors import InfeasibleParameters
from .mac import Key
from .schemes import DependencyModel, DependencySpec, SchemeConfig

DEFAULT_RETRY_BUDGET = 1024


@dataclass(frozen=True)
class R2D2Params:
    n: int
    g: int
    o: int
    s: int = 128
    window: int | None = None

    @classmethod
    def from_config(cls, config: SchemeConfig) -> "R2D2Params":
        if config.kind != "r2d2":
            raise ValueError("not an r2d2 config")
        return cls(config.n, config.g, config.o, config.s, config.window)

    @cached_property
    def config(self) -> SchemeConfig:
        return SchemeConfig("r2d2", n=self.n, g=self.g, o=self.o, s=self.s, window=self.window)

    @property
    def L(self) -> int:
        return self.config.tag_bits

    @property
    def C(self) -> int:
        return self.n * self.L

    @property
    def W(self) -> int:
        return self.config.r2d2_window

    @property
    def bound(self) -> int:
        return self.g * self.L


class _KeyedStream:
    """Deterministic stream of integers from HMAC-SHA256 in counter mode."""

    def __init__(self, key: Key, label: bytes):
        self._key = key.material
        self._label = label
        self._ctr = 0
        self._buf = b""

    def _refill(self):
        self._buf += hmac.new(self._key, self._label + self._ctr.to_bytes(8, "little"), hashlib.sha256).digest()
        self._ctr += 1

    def below(self, bound: int) -> int:
        if bound <= 1:
            return 0
        nbytes = (bound.bit_length() + 7) // 8
        limit = (256 ** nbytes // bound) * bound
        while True:
            if len(self._buf) < nbytes:
                self._refill()
            x = int.from_bytes(self._buf[:nbytes], "little")
            self._buf = self._buf[nbytes:]
            if x < limit:
                return x % bound

    def shuffle(self, items: list) -> list:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items


def _label(params: R2D2Params, salt: int, j: int) -> bytes:
    return b"r2d2|%d|%d|%d|%d|%d|%d|%d" % (params.n, params.g, params.o, params.s, params.W, salt, j)


def _try_build(params: R2D2Params, key: Key, salt: int) -> tuple[tuple[int, ...], ...] | None:
    n, L, W, bound = params.n, params.L, params.W, params.bound
    # impact[delta + W]: entries of a message m voided by losing l = m + delta,
    # either as the carrier (delta = offset) or as a co-member of the slot.
    impact = [0] * (2 * W + 1)
    sets: list[tuple[int, ...] | None] = [None] * L
    order = _KeyedStream(key, _label(params, salt, -1)).shuffle(list(range(L)))
    for j in order:
        rng = _KeyedStream(key, _label(params, salt, j))
        chosen: list[int] = []
        while len(chosen) < n:
            # first feasible offset in keyed order = uniform among feasible ones
            for c in rng.shuffle([c for c in range(W) if c not in chosen]):
                deltas = [c] if c else []
                for x in chosen:
                    deltas += (x - c, c - x)
                if all(impact[d + W] + deltas.count(d) <= bound for d in deltas):
                    break
            else:
                return None
            for d in deltas:
                impact[d + W] += 1
            chosen.append(c)
        # keyed position order: which offset contributes source chunk k
        sets[j] = tuple(rng.shuffle(chosen))
    return tuple(sets)


@dataclass(frozen=True)
class AssignmentTable:
    """Per-bit offset sets plus the salt that produced them.

    ``offsets[j][k]`` is the message offset at position ``k`` of slot ``j``:
    packet ``i`` slot ``j`` position ``k`` holds message ``i - offsets[j][k]``
    and its source bit ``k*L + j``.
    """

    params: R2D2Params
    offsets: tuple[tuple[int, ...], ...]
    salt: int
    horizon: int

    @cached_property
    def model(self) -> DependencyModel:
        L = self.params.L
        pattern = tuple(tuple((d, k * L + j) for k, d in enumerate(offs)) for j, offs in enumerate(self.offsets))
        return DependencyModel(self.params.config, 1, (pattern,), salt=self.salt)

    def cell(self, i: int, j: int, k: int) -> tuple[int, int]:
        return i - self.offsets[j][k], k * self.params.L + j

    def rows(self, horizon: int | None = None):
        """(packet, slot, position, message, source_bit) for every cell up to the horizon."""
        for i in range(self.horizon if horizon is None else horizon):
            for j, offs in enumerate(self.offsets):
                for k in range(len(offs)):
                    m, src = self.cell(i, j, k)
                    yield i, j, k, m, src


_TABLES: dict[tuple[R2D2Params, Key], AssignmentTable] = {}


def build_assignment(params: R2D2Params, key: Key, horizon: int,
                     retry_budget: int = DEFAULT_RETRY_BUDGET) -> AssignmentTable:
    if horizon < params.W:
        raise ValueError(f"horizon {horizon} shorter than the dependency window {params.W}")
    cached = _TABLES.get((params, key))
    if cached is not None:
        return AssignmentTable(params, cached.offsets, cached.salt, horizon)
    # Necessary condition: a message loses (n-1)L carrier entries plus n(n-1)L
    # co-member entries in total, spread over at most 2(W-1) other packets.
    need = (params.n * params.n - 1) * params.L
    if need > 2 * params.bound * (params.W - 1):
        raise InfeasibleParameters(
            f"r2d2:{params.n}:{params.g}:{params.o} cannot meet its loss bound of {params.bound} bits "
            f"within a window of {params.W} packets; need W >= {-(-(params.n * params.n - 1) // (2 * params.g)) + 1}"
        )
    for salt in range(retry_budget):
        offsets = _try_build(params, key, salt)
        if offsets is None:
            continue
        table = AssignmentTable(params, offsets, salt, horizon)
        # offsets are time-invariant, so one message with a full past and future window suffices
        report = validate_bounds(table, params, horizon=2 * params.W, messages=[params.W - 1])
        if report.passed:
            _TABLES[(params, key)] = table
            return table
    raise InfeasibleParameters(
        f"no valid r2d2:{params.n}:{params.g}:{params.o} table found within {retry_budget} salts (W={params.W})"
    )


@dataclass
class BoundsReport:
    bound: int
    max_impact: int
    violating_pairs: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violating_pairs


def impact_matrix(table: AssignmentTable, horizon: int, only=None) -> dict[int, dict[int, int]]:
    """impact[m][l]: coverage entries of message m voided by losing packet l alone.

    Brute-force enumeration over every cell of every packet in the horizon;
    independent of how the table was constructed.
    """
    impact: dict[int, dict[int, int]] = {}
    for i in range(horizon):
        for slot in table.model.spec(i).slots:
            msgs = [m for m, _ in slot]
            for m in msgs:
                if m < 0 or (only is not None and m not in only):
                    continue
                row = impact.setdefault(m, {})
                hit = {i} | {x for x in msgs if x != m and x >= 0}
                hit.discard(m)
                for l in hit:
                    row[l] = row.get(l, 0) + 1
    return impact


def validate_bounds(table: AssignmentTable, params: R2D2Params, horizon: int | None = None,
                    messages=None, partial: bool = False) -> BoundsReport:
    """Check impact(m, l) <= g*L for every message fully covered inside the horizon.

    ``messages`` restricts the check to the given message indices; ``partial``
    also checks messages whose window runs past the horizon (on the entries
    that fall inside it).
    """
    H = table.horizon if horizon is None else horizon
    W = params.W
    if H < W:
        raise ValueError(f"horizon {H} shorter than the window {W}")
    last = H - 1 if partial else H - W  # H - W: last message whose whole window fits
    checked = [m for m in (range(last + 1) if messages is None else messages) if 0 <= m <= last]
    impact = impact_matrix(table, H, only=set(checked))
    report = BoundsReport(params.bound, 0)
    for m in checked:
        for l, v in impact.get(m, {}).items():
            report.max_impact = max(report.max_impact, v)
            if v > params.bound:
                report.violating_pairs.append((m, l, v))
    return report


def coverage_counts(table: AssignmentTable, horizon: int | None = None) -> dict[int, list[int]]:
    """Source bits referenced per real message across the horizon."""
    H = table.horizon if horizon is None else horizon
    cov: dict[int, list[int]] = {}
    for i in range(H):
        for slot in table.model.spec(i).slots:
            for m, src in slot:
                if m >= 0:
                    cov.setdefault(m, []).append(src)
    return cov


def r2d2_dependency_spec(params: R2D2Params, key: Key, i: int) -> DependencySpec:
    return build_assignment(params, key, horizon=max(i + 1, params.W)).model.spec(i)

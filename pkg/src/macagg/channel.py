"""Loss traces: synthetic generators, text format, statistics, scenario presets."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import TraceParseError


@dataclass(frozen=True)
class LossTrace:
    flags: tuple[bool, ...]
    source: str = ""

    def __post_init__(self):
        if not self.flags:
            raise ValueError("a loss trace must be non-empty")

    def __len__(self) -> int:
        return len(self.flags)

    def __iter__(self):
        return iter(self.flags)

    def __getitem__(self, i):
        return self.flags[i]

    @classmethod
    def from_flags(cls, flags, source: str = "") -> "LossTrace":
        return cls(tuple(bool(f) for f in flags), source)

    def with_losses(self, lost: set[int] | frozenset[int], source: str | None = None) -> "LossTrace":
        return LossTrace(tuple(f and i not in lost for i, f in enumerate(self.flags)),
                         self.source if source is None else source)


@dataclass(frozen=True)
class PacketLayout:
    header_bits: int
    payload_bits: int

    def __post_init__(self):
        if self.header_bits < 0:
            raise ValueError("header_bits must be >= 0")
        if self.payload_bits < 1:
            raise ValueError("payload_bits must be >= 1")

    @classmethod
    def from_bytes(cls, header: int, payload: int) -> "PacketLayout":
        return cls(header * 8, payload * 8)


@dataclass(frozen=True)
class GilbertElliottParams:
    p_good_to_bad: float
    p_bad_to_good: float
    loss_good: float = 0.0
    loss_bad: float = 1.0

    def __post_init__(self):
        for name in ("p_good_to_bad", "p_bad_to_good", "loss_good", "loss_bad"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @classmethod
    def from_per_burst(cls, per: float, mean_burst: float) -> "GilbertElliottParams":
        """Gilbert channel (lossless good state, lossy bad state) with a target PER and mean loss run."""
        if not 0 <= per < 1 or mean_burst < 1:
            raise ValueError("need 0 <= per < 1 and mean_burst >= 1")
        p_bg = 1.0 / mean_burst
        p_gb = per * p_bg / (1 - per)
        if p_gb > 1:
            raise ValueError("per/mean_burst combination not reachable")
        return cls(p_gb, p_bg, 0.0, 1.0)

    @property
    def stationary_bad(self) -> float:
        tot = self.p_good_to_bad + self.p_bad_to_good
        return 0.0 if tot == 0 else self.p_good_to_bad / tot

    @property
    def stationary_per(self) -> float:
        pb = self.stationary_bad
        return pb * self.loss_bad + (1 - pb) * self.loss_good


def gen_bernoulli(p_loss: float, length: int, seed: int) -> LossTrace:
    if not 0.0 <= p_loss <= 1.0:
        raise ValueError("p_loss must be in [0, 1]")
    rng = np.random.default_rng(seed)
    flags = rng.random(length) >= p_loss
    return LossTrace(tuple(flags.tolist()), f"bernoulli:{p_loss}:{length}:{seed}")


def gen_gilbert_elliott(params: GilbertElliottParams, length: int, seed: int, start_bad: bool = False) -> LossTrace:
    rng = np.random.default_rng(seed)
    states = np.empty(length, dtype=bool)  # True = bad
    bad = start_bad
    pos = 0
    while pos < length:
        leave = params.p_bad_to_good if bad else params.p_good_to_bad
        # sojourn time in the current state (geometric, >= 1); absorbing if leave == 0
        stay = length - pos if leave == 0 else int(rng.geometric(leave))
        end = min(length, pos + stay)
        states[pos:end] = bad
        pos = end
        bad = not bad
    loss_p = np.where(states, params.loss_bad, params.loss_good)
    flags = rng.random(length) >= loss_p
    p = params
    return LossTrace(tuple(flags.tolist()),
                     f"ge:{p.p_good_to_bad}:{p.p_bad_to_good}:{p.loss_good}:{p.loss_bad}:{length}:{seed}")


def per_from_ber(ber: float, total_bits: int) -> float:
    if not 0.0 <= ber <= 1.0:
        raise ValueError("ber must be in [0, 1]")
    return 1.0 - (1.0 - ber) ** total_bits


def parse_trace(text: str, source: str = "") -> LossTrace:
    flags = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.lstrip().startswith("#"):
            continue
        for col, ch in enumerate(line, 1):
            if ch == "1":
                flags.append(True)
            elif ch == "0":
                flags.append(False)
            elif not ch.isspace():
                raise TraceParseError(f"unexpected character {ch!r}", lineno, col)
    if not flags:
        raise TraceParseError("trace contains no packets", 1, 1)
    return LossTrace(tuple(flags), source)


def write_trace(trace: LossTrace, width: int = 80) -> str:
    s = "".join("1" if f else "0" for f in trace.flags)
    return "".join(s[i:i + width] + "\n" for i in range(0, len(s), width))


@dataclass
class TraceStats:
    length: int
    lost: int
    per: float
    mean_burst: float
    max_burst: int
    burst_histogram: dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"length": self.length, "lost": self.lost, "per": self.per, "mean_burst": self.mean_burst,
                "max_burst": self.max_burst,
                "burst_histogram": {str(k): v for k, v in sorted(self.burst_histogram.items())}}


def loss_runs(flags) -> list[int]:
    runs, cur = [], 0
    for f in flags:
        if f:
            if cur:
                runs.append(cur)
            cur = 0
        else:
            cur += 1
    if cur:
        runs.append(cur)
    return runs


def trace_stats(trace) -> TraceStats:
    flags = getattr(trace, "flags", trace)
    if not len(flags):
        raise ValueError("empty trace")
    runs = loss_runs(flags)
    lost = sum(runs)
    return TraceStats(len(flags), lost, lost / len(flags), (lost / len(runs)) if runs else 0.0,
                      max(runs, default=0), dict(Counter(runs)))


@dataclass(frozen=True)
class Scenario:
    name: str
    layout: PacketLayout
    per: float
    packets: int
    protocol: str
    duration: str
    mean_burst: float
    description: str

    def channel(self) -> GilbertElliottParams:
        if self.mean_burst <= 1:
            return GilbertElliottParams(0.0, 1.0, self.per, self.per)
        return GilbertElliottParams.from_per_burst(self.per, self.mean_burst)

    def synth_trace(self, length: int | None = None, seed: int = 0) -> LossTrace:
        t = gen_gilbert_elliott(self.channel(), length or self.packets, seed)
        return LossTrace(t.flags, f"scenario:{self.name}:{len(t)}:{seed}")


# Header/payload/PER/#pkts per deployment; burst lengths are coarse stand-ins
# for the qualitative burstiness of each environment.
SCENARIOS: dict[str, Scenario] = {
    s.name: s for s in (
        Scenario("ics", PacketLayout(88, 160), 0.0479, 57648, "IEEE 802.15.4", "8 hours", 2.0,
                 "production hall, short loss bursts"),
        Scenario("office", PacketLayout(80, 256), 0.0322, 79032, "BLE", "22 hours", 1.5,
                 "office rooms, short bursts of a few packets"),
        Scenario("city-static", PacketLayout(104, 128), 0.0197, 18790, "LoRaWAN", "131 days", 1.0,
                 "stationary LoRaWAN sender, mostly isolated losses"),
        Scenario("city-mobile", PacketLayout(104, 192), 0.0709, 17415, "LoRaWAN", "250 days", 5.0,
                 "mobile LoRaWAN sender, bursty losses"),
        Scenario("underwater", PacketLayout(31, 128), 0.1646, 334, "GUWMANET", "327 min", 20.0,
                 "acoustic link, long loss bursts between good periods"),
    )
}


def load_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}") from None

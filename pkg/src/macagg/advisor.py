"""Scheme comparison on a trace, payload-length sweeps, and rule-based recommendations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .channel import LossTrace, PacketLayout, per_from_ber
from .mac import DEMO_KEY, Key
from .metrics import MetricsReport, evaluate, goodput
from .receiver import process_trace
from .schemes import SchemeConfig, tag_bits_at, wire_tag_bits_at

GRID_N = (2, 4, 8, 16)
GRID_O = (100, 200)
FRAME_PAYLOAD_MAX = 115  # bytes, IEEE 802.15.4


def default_schemes() -> list[SchemeConfig]:
    out = [SchemeConfig("trad")]
    out += [SchemeConfig("agg", n=n) for n in GRID_N]
    out += [SchemeConfig("comp", n=n) for n in GRID_N]
    out += [SchemeConfig("sw", n=n, o=o) for n in GRID_N for o in GRID_O]
    out += [SchemeConfig("r2d2", n=n, g=1, o=o) for n in GRID_N for o in GRID_O]
    return out


def max_tag_bits(config: SchemeConfig) -> int:
    return max(wire_tag_bits_at(config, i) for i in range(config.n))


def applicable(config: SchemeConfig, layout: PacketLayout) -> bool:
    """A tag must leave room for data inside the payload field."""
    return max_tag_bits(config) < layout.payload_bits


@dataclass
class ComparisonRow:
    scheme: SchemeConfig
    applicable: bool
    goodput: float | None = None
    goodput_norm: float | None = None
    mean_delay: float | None = None
    p95_delay: int | None = None
    never_fraction: float | None = None
    sender_mem: int | None = None
    receiver_mem: int | None = None
    report: MetricsReport | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"scheme": self.scheme.spec, "applicable": self.applicable, "goodput": self.goodput,
                "goodput_norm": self.goodput_norm, "mean_delay": self.mean_delay, "p95_delay": self.p95_delay,
                "never_fraction": self.never_fraction, "sender_mem": self.sender_mem,
                "receiver_mem": self.receiver_mem}


def evaluate_row(config: SchemeConfig, trace, layout: PacketLayout, key: Key | None, flush: bool = False,
                 force: bool = False) -> ComparisonRow:
    if not force and not applicable(config, layout):
        return ComparisonRow(config, False)
    r = evaluate(config, key, trace, layout, flush=flush)
    return ComparisonRow(config, True, r.goodput, r.goodput_norm, r.mean_delay, r.p95_delay,
                         r.never_fraction, r.sender_mem_bytes, r.receiver_mem_bytes, r)


def rank(rows: Iterable[ComparisonRow], by: str = "goodput") -> list[ComparisonRow]:
    """Applicable rows by descending metric (ties keep input order), then inapplicable ones."""
    rows = list(rows)
    ok = [r for r in rows if r.applicable]
    lower_is_better = by in ("mean_delay", "p95_delay", "never_fraction", "sender_mem", "receiver_mem")

    def keyf(r):
        v = getattr(r, by)
        if v is None:
            return float("inf")
        return v if lower_is_better else -v

    return sorted(ok, key=keyf) + [r for r in rows if not r.applicable]


def compare_all(trace, layout: PacketLayout, key: Key | None, scheme_list: Sequence[SchemeConfig] | None = None,
                flush: bool = False) -> list[ComparisonRow]:
    schemes = default_schemes() if scheme_list is None else list(scheme_list)
    return [evaluate_row(c, trace, layout, key, flush) for c in schemes]


@dataclass
class SweepResult:
    ber: float
    payloads: list[int]
    schemes: list[SchemeConfig]
    grid: dict[tuple[str, int], float | None]  # (scheme spec, payload bytes) -> goodput

    def best(self) -> tuple[int, SchemeConfig, float] | None:
        best = None
        for c in self.schemes:
            for p in self.payloads:
                g = self.grid[(c.spec, p)]
                if g is not None and (best is None or g > best[2]):
                    best = (p, c, g)
        return best

    def best_payload(self, config: SchemeConfig) -> tuple[int, float] | None:
        best = None
        for p in self.payloads:
            g = self.grid[(config.spec, p)]
            if g is not None and (best is None or g > best[1]):
                best = (p, g)
        return best


def sweep_trace(config: SchemeConfig, ber: float, header_bits: int, payload_bits: int, uniforms: np.ndarray) -> list[bool]:
    """Per-packet losses from the packet's own length; shared uniforms keep the grid smooth."""
    periods = {}
    flags = []
    for i in range(len(uniforms)):
        tb = tag_bits_at(config, i)
        per = periods.get(tb)
        if per is None:
            per = periods[tb] = per_from_ber(ber, header_bits + payload_bits + -(-tb // 8) * 8)
        flags.append(bool(uniforms[i] >= per))
    return flags


def payload_sweep(ber: float, header_bits: int, payload_range: Sequence[int] = range(1, FRAME_PAYLOAD_MAX + 1),
                  schemes: Sequence[SchemeConfig] | None = None, trace_len: int = 5000, seed: int = 0,
                  key: Key | None = None, frame_limit: int | None = FRAME_PAYLOAD_MAX) -> SweepResult:
    """Goodput over payload lengths (bytes) for one bit error rate.

    A config is skipped (None) where data plus its largest tag exceeds the
    frame's payload field. Without a key R2D2 uses the public demo key.
    """
    schemes = default_schemes() if schemes is None else list(schemes)
    key = DEMO_KEY if key is None else key
    uniforms = np.random.default_rng(seed).random(trace_len)
    grid: dict[tuple[str, int], float | None] = {}
    for c in schemes:
        tag_bytes = max_tag_bits(c) // 8
        for p in payload_range:
            if frame_limit is not None and p + tag_bytes > frame_limit:
                grid[(c.spec, p)] = None
                continue
            layout = PacketLayout(header_bits, p * 8)
            flags = sweep_trace(c, ber, header_bits, p * 8, uniforms)
            outcomes = process_trace(c, key, flags)
            grid[(c.spec, p)] = goodput(outcomes, layout, c)
    return SweepResult(ber, list(payload_range), schemes, grid)


BURSTINESS = ("isolated", "short-bursts", "long-bursts")
ADVICE_NOTE = ("indicative: thresholds come from one synthetic channel and the decision structure is "
               "reconstructed from the published guidelines; confirm with `macagg compare` on a real trace")


@dataclass(frozen=True)
class AdvisorInput:
    per: float
    burstiness: str = "short-bursts"
    payload_bytes: int | None = None
    needs_constant_delay: bool = False
    needs_dos_resilience: bool = False
    processing_constrained: bool = False
    fixed_message_size: bool = False

    def __post_init__(self):
        if not 0.0 <= self.per <= 1.0:
            raise ValueError("per must be in [0, 1]")
        if self.burstiness not in BURSTINESS:
            raise ValueError(f"burstiness must be one of {BURSTINESS}")


@dataclass(frozen=True)
class Recommendation:
    scheme: SchemeConfig
    rationale: str


def _n_for(per: float) -> int:
    if per < 0.004:
        return 16
    if per < 0.02:
        return 8
    if per < 0.05:
        return 4
    return 2


def recommend(inp: AdvisorInput) -> list[Recommendation]:
    per = inp.per
    n = _n_for(per)
    recs: list[tuple[SchemeConfig, str]] = []

    def add(c: SchemeConfig, why: str):
        if all(c != r[0] for r in recs):
            recs.append((c, why))

    if per > 0.185:
        add(SchemeConfig("trad"), "PER above ~18.5%: lost packets void most aggregates, plain tags win")
        add(SchemeConfig("agg", n=2), "if aggregation is wanted at all, keep it to two messages")
    elif inp.burstiness == "long-bursts":
        add(SchemeConfig("sw", n=4, o=100), "long loss bursts with good delivery otherwise favour sliding windows")
        add(SchemeConfig("comp", n=4), "compound tags also tolerate long bursts well")
        add(SchemeConfig("agg", n=n), "simple aggregation as a fallback")
    elif per > 0.085:
        add(SchemeConfig("agg", n=2), "PER between ~8.5% and ~18.5%: aggregate at most two tags")
        add(SchemeConfig("trad"), "close second at this loss level")
    elif per >= 0.004 and inp.burstiness in ("isolated", "short-bursts"):
        add(SchemeConfig("r2d2", n=max(n, 4), g=1, o=100),
            "PER between ~0.4% and ~8.5% with short bursts: R2D2 spreads each loss thinly (g=1, o=100)")
        add(SchemeConfig("agg", n=n), "simpler alternative with comparable goodput near the low end")
        add(SchemeConfig("comp", n=n), "constant-size alternative")
    else:
        add(SchemeConfig("agg", n=n), "low PER: simple aggregation of many tags has the best goodput")
        add(SchemeConfig("comp", n=n), "same average tag length with a constant tag size")
        add(SchemeConfig("r2d2", n=max(n, 4), g=1, o=100), "progressive alternative")

    if per <= 0.185:
        add(SchemeConfig("trad"), "baseline without aggregation")

    ordered = list(recs)
    if inp.fixed_message_size:
        comp = SchemeConfig("comp", n=_n_for(per) if per <= 0.085 else 2)
        ordered = [r for r in ordered if r[0].kind not in ("trad", "agg") and r[0] != comp]
        ordered.insert(0, (comp, "fixed message sizes rule out periodic 16-byte tags; Comp keeps every tag equal"))
        ordered += [r for r in recs if r[0].kind in ("trad", "agg")]
    if inp.needs_constant_delay:
        sw = next((r for r in ordered if r[0].kind == "sw"), None) or (
            SchemeConfig("sw", n=4, o=100), "")
        ordered = [r for r in ordered if r[0] != sw[0]]
        ordered.insert(0, (sw[0], "SW verifies with an almost constant delay, suited to control loops"))
    if inp.needs_dos_resilience:
        r2 = next((r for r in ordered if r[0].kind == "r2d2"), None) or (
            SchemeConfig("r2d2", n=max(n, 4), g=1, o=100), "")
        ordered = [r for r in ordered if r[0] != r2[0]]
        ordered.insert(0, (r2[0], "secret randomized dependencies make R2D2 the most resilient to selective jamming"))
    if inp.processing_constrained:
        slow = [r for r in ordered if r[0].kind == "r2d2"]
        ordered = [r for r in ordered if r[0].kind != "r2d2"] + [
            (c, why + "; demoted: bitwise R2D2 processing is costly on slow hardware") for c, why in slow]
    if inp.payload_bytes is not None:
        lay = PacketLayout(0, inp.payload_bytes * 8)
        fits = [r for r in ordered if applicable(r[0], lay)]
        ordered = fits + [(c, why + "; tag does not fit the payload") for c, why in ordered if not applicable(c, lay)]
    return [Recommendation(c, f"{why} ({ADVICE_NOTE})") for c, why in ordered]

"""Selective jamming: per-scheme analytic plans, a greedy optimizer, resilience curves."""
from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from typing import Sequence

from .channel import LossTrace, PacketLayout, SCENARIOS
from .mac import Key
from .metrics import goodput
from .receiver import process_trace
from .schemes import SchemeConfig, dependency_model

DEFAULT_LAYOUT = SCENARIOS["city-mobile"].layout


@dataclass(frozen=True)
class JamPlan:
    jam_set: frozenset[int]
    budget: float
    strategy: str

    def __len__(self) -> int:
        return len(self.jam_set)


def max_jams(budget: float, trace_len: int) -> int:
    if not 0.0 <= budget <= 1.0:
        raise ValueError("budget must be in [0, 1]")
    return min(trace_len, math.floor(budget * trace_len + 1e-9))


def _evenly_spaced(k: int, candidates: Sequence[int]) -> list[int]:
    if k <= 0 or not candidates:
        return []
    k = min(k, len(candidates))
    return [candidates[(t * len(candidates)) // k] for t in range(k)]


def sw_kill_period(config: SchemeConfig) -> int:
    """Sparsest jamming period that leaves every SW message short of the security level.

    A jam at l voids the tags of packets l..l+n-1. Message m needs ceil(s/L)
    of its n covering tags, so the unjammed gap between voided stretches must
    stay below that.
    """
    need = -(-config.s // config.tag_bits)
    return max(1, config.n + need - 1)


def _priority(config: SchemeConfig, N: int) -> list[int]:
    n = config.n
    if config.kind == "agg":
        return list(range(n - 1, N, n))
    if config.kind == "comp":
        # a jam in block b voids block b (its message) and block b-1 (its chunk)
        blocks = -(-N // n)
        order = [b * n for b in range(1, blocks, 2)]
        if blocks % 2:
            order.append((blocks - 1) * n)
        return order
    if config.kind == "sw":
        return list(range(0, N, sw_kill_period(config)))
    return []


def analytic_jam(config: SchemeConfig, trace_len: int, budget: float, base_trace=None) -> JamPlan:
    """Scheme-specific plan; with a base trace, packets already lost are not jammed again."""
    k = max_jams(budget, trace_len)
    if base_trace is None:
        alive = list(range(trace_len))
    else:
        alive = [i for i, f in enumerate(getattr(base_trace, "flags", base_trace)) if f]
    if config.kind in ("trad", "r2d2"):
        chosen = _evenly_spaced(k, alive)
        name = "uniform" if config.kind == "r2d2" else "arbitrary"
        return JamPlan(frozenset(chosen), budget, f"analytic-{name}")
    ok = set(alive)
    chosen = [i for i in _priority(config, trace_len) if i in ok][:k]
    rest = k - len(chosen)
    if rest > 0:
        taken = set(chosen)
        chosen += _evenly_spaced(rest, [i for i in alive if i not in taken])
    return JamPlan(frozenset(chosen), budget, f"analytic-{config.kind}")


def apply_jam(base_trace, plan: JamPlan | set[int] | frozenset[int]) -> LossTrace:
    jam = plan.jam_set if isinstance(plan, JamPlan) else plan
    base = base_trace if isinstance(base_trace, LossTrace) else LossTrace.from_flags(base_trace)
    return base.with_losses(jam)


def _auth_count(config: SchemeConfig, key: Key | None, flags: list[bool]) -> int:
    return sum(1 for o in process_trace(config, key, flags) if o.auth_at is not None)


def average_case_keys(count: int, seed: int = 0) -> list[Key]:
    return [Key(hashlib.sha256(b"macagg-attacker-key|%d|%d" % (seed, i)).digest()) for i in range(count)]


def greedy_jam(config: SchemeConfig, key: Key | None, base_trace, budget: float, average_case: bool = False,
               n_keys: int = 32, key_seed: int = 0, lookahead: bool = True, refine: bool = True) -> JamPlan:
    """Repeatedly jam the packet whose loss removes the most authenticated messages.

    Ties go to the lowest index. With ``lookahead`` each step also scores pairs
    of packets close enough to share messages, and commits a pair when it beats
    the two best single jams. ``refine`` then moves single jams while that
    strictly lowers the score. ``average_case`` (R2D2 without the key) scores
    damage against ``n_keys`` attacker-chosen keys instead of the real one.
    """
    flags = [bool(f) for f in getattr(base_trace, "flags", base_trace)]
    N = len(flags)
    k = max_jams(budget, N)
    keys = average_case_keys(n_keys, key_seed) if average_case else [key]
    reach = max(dependency_model(config, kk).max_offset for kk in keys) + config.n

    def score(fl: list[bool]) -> float:
        return sum(_auth_count(config, kk, fl) for kk in keys) / len(keys)

    current = list(flags)
    cur_score = score(current)
    jam: list[int] = []
    while len(jam) < k:
        cands = [i for i in range(N) if current[i]]
        if not cands:
            break
        gains = {}
        for i in cands:
            current[i] = False
            gains[i] = cur_score - score(current)
            current[i] = True
        order = sorted(cands, key=lambda i: (-gains[i], i))
        pick = [order[0]] if gains[order[0]] > 1e-12 else []
        if lookahead and len(jam) + 2 <= k:
            best_pair, best_gain = None, sum(gains[i] for i in order[:2])
            for a_idx, a in enumerate(cands):
                current[a] = False
                for b in cands[a_idx + 1:]:
                    if b - a > reach:
                        break
                    current[b] = False
                    gain = cur_score - score(current)
                    current[b] = True
                    if gain > best_gain + 1e-12:
                        best_pair, best_gain = [a, b], gain
                current[a] = True
            if best_pair is not None:
                pick = best_pair
        if not pick:
            break
        for i in pick:
            current[i] = False
            jam.append(i)
        cur_score = score(current)
    if refine:
        # 1-swap local search: move a jam elsewhere while that strictly helps
        improved = True
        while improved:
            improved = False
            for j, a in enumerate(jam):
                current[a] = flags[a]
                best_b, best_s = None, cur_score
                for b in range(N):
                    if not current[b] or b == a:
                        continue
                    current[b] = False
                    sc = score(current)
                    current[b] = True
                    if sc < best_s - 1e-12:
                        best_b, best_s = b, sc
                if best_b is None:
                    current[a] = False
                    continue
                current[best_b] = False
                jam[j], cur_score, improved = best_b, best_s, True
    label = "greedy-average" if average_case else "greedy-known"
    return JamPlan(frozenset(jam), budget, label)


def brute_force_jam(config: SchemeConfig, key: Key | None, base_trace, n_jams: int) -> tuple[frozenset[int], int]:
    """Exhaustive optimum over all jam sets of the given size (small instances only)."""
    from itertools import combinations

    flags = [bool(f) for f in getattr(base_trace, "flags", base_trace)]
    best_set, best_auth = frozenset(), None
    for combo in combinations(range(len(flags)), n_jams):
        fl = list(flags)
        for i in combo:
            fl[i] = False
        a = _auth_count(config, key, fl)
        if best_auth is None or a < best_auth:
            best_set, best_auth = frozenset(combo), a
    return best_set, best_auth


@dataclass(frozen=True)
class CurvePoint:
    budget: float
    overall_loss: float
    goodput: float
    strategy: str


def resilience_curve(config: SchemeConfig, base_trace, budgets: Sequence[float], key: Key | None = None,
                     layout: PacketLayout = DEFAULT_LAYOUT, strategy: str = "analytic") -> list[CurvePoint]:
    if list(budgets) != sorted(budgets):
        raise ValueError("budgets must be sorted")
    base = base_trace if isinstance(base_trace, LossTrace) else LossTrace.from_flags(base_trace)
    N = len(base)
    out = []
    for b in budgets:
        if strategy == "analytic":
            plan = analytic_jam(config, N, b, base)
        elif strategy == "greedy":
            plan = greedy_jam(config, key, base, b)
        else:
            raise ValueError(f"unknown strategy {strategy!r}")
        attacked = apply_jam(base, plan)
        outcomes = process_trace(config, key, attacked)
        lost = sum(1 for f in attacked.flags if not f)
        out.append(CurvePoint(b, lost / N, goodput(outcomes, layout, config), plan.strategy))
    return out


def curve_csv(points: Sequence[CurvePoint], scheme: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["budget", "overall_loss", "goodput", "strategy"]
    w.writerow((["scheme"] if scheme else []) + header)
    for p in points:
        w.writerow(([scheme] if scheme else []) + [f"{p.budget:.6f}", f"{p.overall_loss:.6f}", f"{p.goodput:.6f}", p.strategy])
    return buf.getvalue()

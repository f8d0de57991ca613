import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chi2_contingency

from macagg.channel import (SCENARIOS, GilbertElliottParams, LossTrace, PacketLayout, gen_bernoulli,
                            gen_gilbert_elliott, load_scenario, loss_runs, parse_trace, per_from_ber,
                            trace_stats, write_trace)
from macagg.errors import TraceParseError


def test_bernoulli_extremes():
    assert all(gen_bernoulli(0.0, 500, 1).flags)
    assert not any(gen_bernoulli(1.0, 500, 1).flags)


def test_bernoulli_per():
    t = gen_bernoulli(0.05, 100_000, 3)
    assert abs(trace_stats(t).per - 0.05) <= 0.005


def test_seed_determinism_and_independence():
    assert gen_bernoulli(0.3, 1000, 9) == gen_bernoulli(0.3, 1000, 9)
    a = np.array(gen_bernoulli(0.5, 100_000, 1).flags, dtype=float)
    b = np.array(gen_bernoulli(0.5, 100_000, 2).flags, dtype=float)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01
    g = GilbertElliottParams.from_per_burst(0.1, 3)
    assert gen_gilbert_elliott(g, 5000, 4) == gen_gilbert_elliott(g, 5000, 4)


def test_ge_all_good():
    t = gen_gilbert_elliott(GilbertElliottParams(0.0, 0.5, 0.0, 1.0), 10_000, 1)
    assert all(t.flags)


def test_ge_mean_burst():
    params = GilbertElliottParams.from_per_burst(0.1, 5.0)
    st_ = trace_stats(gen_gilbert_elliott(params, 1_000_000, 11))
    assert abs(st_.mean_burst - 5.0) <= 0.5
    assert abs(st_.per - 0.1) <= 0.01
    assert params.stationary_per == pytest.approx(0.1)


def _run_hist(flags, cap=6):
    h = np.zeros(cap, dtype=int)
    for r in loss_runs(flags):
        h[min(r, cap) - 1] += 1
    return h


def test_ge_degenerate_matches_bernoulli():
    p = 0.2
    ge = gen_gilbert_elliott(GilbertElliottParams(0.3, 0.3, p, p), 200_000, 5)
    be = gen_bernoulli(p, 200_000, 6)
    table = np.vstack([_run_hist(ge.flags), _run_hist(be.flags)])
    assert chi2_contingency(table).pvalue > 0.01


def test_ge_validation():
    with pytest.raises(ValueError):
        GilbertElliottParams(1.2, 0.1)
    with pytest.raises(ValueError):
        GilbertElliottParams.from_per_burst(0.5, 0.5)


def test_per_from_ber():
    assert per_from_ber(0.0, 552) == 0.0
    assert per_from_ber(1e-4, 0) == 0.0
    assert per_from_ber(1e-4, 552) == pytest.approx(0.0537, abs=1e-4)
    with pytest.raises(ValueError):
        per_from_ber(1.5, 10)


@given(st.floats(0, 0.01), st.floats(0, 0.01), st.integers(0, 2000), st.integers(0, 2000))
def test_per_from_ber_monotone(b1, b2, n1, n2):
    lo_b, hi_b = sorted((b1, b2))
    lo_n, hi_n = sorted((n1, n2))
    assert per_from_ber(lo_b, lo_n) <= per_from_ber(hi_b, lo_n) + 1e-15
    assert per_from_ber(lo_b, lo_n) <= per_from_ber(lo_b, hi_n) + 1e-15


def test_parse_examples():
    assert parse_trace("1101").flags == (True, True, False, True)
    assert parse_trace("# header\n11 0\n\n1\n").flags == (True, True, False, True)
    with pytest.raises(TraceParseError) as err:
        parse_trace("12")
    assert (err.value.line, err.value.column) == (1, 2)
    with pytest.raises(TraceParseError) as err:
        parse_trace("11\n0x1")
    assert (err.value.line, err.value.column) == (2, 2)
    with pytest.raises(TraceParseError):
        parse_trace("# only a comment\n")


@given(st.lists(st.booleans(), min_size=1, max_size=400))
def test_round_trip(flags):
    t = LossTrace(tuple(flags))
    text = write_trace(t)
    assert parse_trace(text).flags == t.flags
    assert write_trace(parse_trace(text)) == text


def test_write_canonical():
    assert write_trace(parse_trace(" 1 1\n0  1 ")) == "1101\n"


def test_stats_examples():
    s = trace_stats(parse_trace("111111"))
    assert s.per == 0 and s.mean_burst == 0 and s.burst_histogram == {}
    s = trace_stats(parse_trace("101010"))
    assert s.per == 0.5 and s.mean_burst == 1 and s.burst_histogram == {1: 3}
    s = trace_stats(parse_trace("1001110001"))
    assert s.burst_histogram == {2: 1, 3: 1} and s.max_burst == 3 and s.mean_burst == 2.5


def test_underwater_stand_in_echoes_per():
    sc = load_scenario("underwater")
    t = sc.synth_trace(2_000_000, seed=3)
    assert abs(trace_stats(t).per - 0.1646) < 0.01


@pytest.mark.parametrize("name,layout,per", [
    ("ics", (88, 160), 0.0479), ("office", (80, 256), 0.0322), ("city-static", (104, 128), 0.0197),
    ("city-mobile", (104, 192), 0.0709), ("underwater", (31, 128), 0.1646)])
def test_scenarios(name, layout, per):
    sc = load_scenario(name)
    assert (sc.layout.header_bits, sc.layout.payload_bits) == layout
    assert sc.per == per
    assert abs(sc.channel().stationary_per - per) < 1e-12


def test_unknown_scenario():
    with pytest.raises(KeyError):
        load_scenario("factory")
    assert set(SCENARIOS) == {"ics", "office", "city-static", "city-mobile", "underwater"}


def test_layout():
    assert PacketLayout.from_bytes(5, 48) == PacketLayout(40, 384)
    with pytest.raises(ValueError):
        PacketLayout(0, 0)
    with pytest.raises(ValueError):
        LossTrace(())

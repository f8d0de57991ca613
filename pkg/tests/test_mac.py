import hashlib
import hmac
import os
import random

import pytest
from hypothesis import given, strategies as st

from macagg.mac import Bits, Key, compute_full_tag, encode_seq, truncate_tag
from oracles import hmac_bits

# RFC 4231 test cases 1-3 (raw HMAC-SHA256, checked before any framing)
RFC4231 = [
    (bytes([0x0B] * 20), b"Hi There",
     "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7"),
    (b"Jefe", b"what do ya want for nothing?",
     "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"),
    (bytes([0xAA] * 20), bytes([0xDD] * 50),
     "773ea91e36800e46854db8ebd09181a72959098b3ef8c122d9635514ced565fe"),
]


@pytest.mark.parametrize("k,data,digest", RFC4231)
def test_rfc4231_raw(k, data, digest):
    assert hmac.new(k, data, hashlib.sha256).hexdigest() == digest


def test_case2_data_through_framing():
    # the first 8 bytes of the case-2 data, read as the sequence number,
    # reproduce the RFC framing exactly; only the key has to be 32 bytes here
    data = b"what do ya want for nothing?"
    seq = int.from_bytes(data[:8], "little")
    assert encode_seq(seq) + data[8:] == data
    k = Key(bytes(range(32)))
    tag = compute_full_tag(k, seq, data[8:], 256)
    assert tag.bits.to_bytes() == hmac.new(k.material, data, hashlib.sha256).digest()


def test_matches_reference(key):
    for seq in (0, 1, 7, 2**40, -1, -16):
        for nbits in (8, 128, 256, 384, 600):
            got = str(compute_full_tag(key, seq, b"payload", nbits).bits)
            assert got == hmac_bits(key.material, seq, b"payload", nbits)


def test_counter_extension(key):
    tag = compute_full_tag(key, 5, b"abc", 384).bits
    base = hmac.new(key.material, encode_seq(5) + b"abc", hashlib.sha256).digest()
    ext = hmac.new(key.material, encode_seq(5) + b"abc" + (1).to_bytes(4, "little"), hashlib.sha256).digest()
    assert tag.prefix(256).to_bytes() == base
    assert tag.chunk(256, 128) == int.from_bytes(ext[:16], "big")


def test_negative_seq_is_twos_complement():
    assert encode_seq(-1) == b"\xff" * 8
    assert encode_seq(-2) == b"\xfe" + b"\xff" * 7
    assert compute_full_tag(Key(bytes(32)), -1, b"", 8).origin_seq == 2**64 - 1


@given(st.integers(-2**63, 2**64 - 1), st.binary(max_size=40), st.integers(1, 700), st.integers(1, 700))
def test_prefix_stability(seq, payload, a, b):
    k = Key(bytes(range(32)))
    lo, hi = sorted((a, b))
    short = compute_full_tag(k, seq, payload, lo).bits
    long = compute_full_tag(k, seq, payload, hi).bits
    assert long.prefix(lo) == short
    assert len(short) == lo and len(long) == hi


def test_determinism(key):
    assert compute_full_tag(key, 3, b"x", 200) == compute_full_tag(key, 3, b"x", 200)


def test_key_sensitivity(key):
    rng = random.Random(7)
    base = truncate_tag(compute_full_tag(key, 11, b"sensor reading", 256), 128)
    differing = 0
    for _ in range(128):
        bit = rng.randrange(256)
        flipped = bytearray(key.material)
        flipped[bit // 8] ^= 0x80 >> (bit % 8)
        t = truncate_tag(compute_full_tag(Key(bytes(flipped)), 11, b"sensor reading", 256), 128)
        differing += t != base
    assert differing >= 120


def test_required_bits_zero(key):
    with pytest.raises(ValueError):
        compute_full_tag(key, 0, b"", 0)


def test_truncate(key):
    tag = compute_full_tag(key, 0, b"m", 256)
    assert truncate_tag(tag, 128) == tag.bits.prefix(128)
    assert str(truncate_tag(tag, 128)) == str(tag.bits)[:128]
    assert truncate_tag(tag, 0) == Bits.empty()
    with pytest.raises(ValueError):
        truncate_tag(tag, 257)


def test_key_validation():
    with pytest.raises(ValueError):
        Key(b"short")
    with pytest.raises(ValueError):
        Key.from_hex("abcd")
    k = Key.from_hex("00" * 32)
    assert k.hex() == "00" * 32
    assert "00" * 32 not in repr(k)


def test_key_from_env(monkeypatch):
    monkeypatch.setenv("MACAGG_KEY", "11" * 32)
    assert Key.from_env() == Key(bytes([0x11] * 32))
    monkeypatch.delenv("MACAGG_KEY")
    assert Key.from_env() is None


@given(st.binary(max_size=20))
def test_bits_roundtrip(data):
    b = Bits.from_bytes(data)
    assert b.to_bytes() == data
    assert Bits.from_str(str(b)) == b


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
def test_bits_xor(a, b):
    x, y = Bits(a, 64), Bits(b, 64)
    assert (x ^ y).value == a ^ b
    assert (x ^ y ^ y) == x


def test_bits_indexing():
    b = Bits.from_str("1011")
    assert list(b) == [1, 0, 1, 1]
    assert b[0] == 1 and b[1] == 0
    assert b.chunk(1, 2) == 0b01
    assert b.chunk(2, 2) == 0b11
    with pytest.raises(IndexError):
        b[4]
    with pytest.raises(ValueError):
        Bits(4, 2)


def test_random_payloads_against_reference():
    rng = random.Random(3)
    k = Key(os.urandom(32))
    for _ in range(50):
        payload = bytes(rng.randrange(256) for _ in range(rng.randrange(30)))
        seq = rng.randrange(-1000, 10**6)
        n = rng.randrange(1, 800)
        assert str(compute_full_tag(k, seq, payload, n).bits) == hmac_bits(k.material, seq, payload, n)

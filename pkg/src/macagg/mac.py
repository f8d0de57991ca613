"""Keyed tag generation on top of HMAC-SHA256.

Tags are handled as :class:`Bits`, an immutable MSB-first bit string backed
by a Python int. Bit 0 is the most significant bit of the first digest byte.
"""
from __future__ import annotations

import hashlib
import hmac
import os
from dataclasses import dataclass

KEY_BYTES = 32
DIGEST_BITS = 256
KEY_ENV_VAR = "MACAGG_KEY"

_SEQ_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class Bits:
    value: int
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("negative bit length")
        if self.value < 0 or self.value >> self.length:
            raise ValueError(f"value does not fit in {self.length} bits")

    @classmethod
    def empty(cls) -> "Bits":
        return cls(0, 0)

    @classmethod
    def from_bytes(cls, data: bytes, length: int | None = None) -> "Bits":
        full = len(data) * 8
        value = int.from_bytes(data, "big")
        if length is None:
            return cls(value, full)
        if length > full:
            raise ValueError("not enough bytes")
        return cls(value >> (full - length), length)

    @classmethod
    def from_str(cls, text: str) -> "Bits":
        return cls(int(text, 2) if text else 0, len(text))

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.value >> (self.length - 1 - i)) & 1

    def __iter__(self):
        for i in range(self.length):
            yield (self.value >> (self.length - 1 - i)) & 1

    def __xor__(self, other: "Bits") -> "Bits":
        if self.length != other.length:
            raise ValueError("length mismatch")
        return Bits(self.value ^ other.value, self.length)

    def prefix(self, bits: int) -> "Bits":
        if not 0 <= bits <= self.length:
            raise ValueError(f"cannot take {bits} bits of a {self.length}-bit string")
        return Bits(self.value >> (self.length - bits), bits)

    def chunk(self, start: int, length: int) -> int:
        """Integer value of bits [start, start+length)."""
        return (self.value >> (self.length - start - length)) & ((1 << length) - 1)

    def to_bytes(self) -> bytes:
        """Left-aligned, zero-padded to whole bytes."""
        nbytes = (self.length + 7) // 8
        return (self.value << (nbytes * 8 - self.length)).to_bytes(nbytes, "big")

    def __str__(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""


@dataclass(frozen=True)
class Key:
    material: bytes

    def __post_init__(self):
        if len(self.material) != KEY_BYTES:
            raise ValueError(f"key must be exactly {KEY_BYTES} bytes, got {len(self.material)}")

    @classmethod
    def from_hex(cls, text: str) -> "Key":
        text = text.strip()
        if len(text) != 2 * KEY_BYTES:
            raise ValueError(f"key must be {2 * KEY_BYTES} hex characters")
        return cls(bytes.fromhex(text))

    @classmethod
    def from_env(cls, var: str = KEY_ENV_VAR) -> "Key | None":
        text = os.environ.get(var)
        return cls.from_hex(text) if text else None

    def hex(self) -> str:
        return self.material.hex()

    def fingerprint(self) -> str:
        return hashlib.sha256(b"macagg-key-fp" + self.material).hexdigest()[:16]

    def __repr__(self) -> str:
        return f"Key(fp={self.fingerprint()})"


# Public, fixed key for dependency-only runs where no key is given. Only
# R2D2's table depends on it; never use it to protect real traffic.
DEMO_KEY = Key(hashlib.sha256(b"macagg public demo key").digest())


@dataclass(frozen=True)
class FullTag:
    bits: Bits
    origin_seq: int


def encode_seq(seq: int) -> bytes:
    """64-bit little-endian nonce; negative (virtual) indices wrap as two's complement."""
    return (seq & _SEQ_MASK).to_bytes(8, "little")


def compute_full_tag(key: Key, seq: int, payload: bytes, required_bits: int) -> FullTag:
    if required_bits < 1:
        raise ValueError("required_bits must be >= 1")
    msg = encode_seq(seq) + payload
    out = hmac.new(key.material, msg, hashlib.sha256).digest()
    ctr = 1
    while len(out) * 8 < required_bits:
        out += hmac.new(key.material, msg + ctr.to_bytes(4, "little"), hashlib.sha256).digest()
        ctr += 1
    return FullTag(Bits.from_bytes(out, required_bits), seq & _SEQ_MASK)


def truncate_tag(tag: FullTag | Bits, bits: int) -> Bits:
    b = tag.bits if isinstance(tag, FullTag) else tag
    if bits < 0 or bits > b.length:
        raise ValueError(f"cannot truncate a {b.length}-bit tag to {bits} bits")
    return b.prefix(bits)

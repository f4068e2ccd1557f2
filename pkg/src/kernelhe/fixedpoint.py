"""Signed fixed-point words used by the Boolean backend.

A layout of width ``l`` keeps ``l/2`` fractional bits, ``l/2 - 1`` integer
bits and one sign bit.  Words are two's complement and stored least
significant bit first.

Besides encoding and decoding, this module holds the plaintext reference
semantics of every word-level operation (``fx_add``, ``fx_mul`` ...).  They
work on raw signed integers and are what the gate-level circuits are checked
against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class RangeError(ValueError):
    """Value does not fit the fixed-point layout."""


@dataclass(frozen=True)
class FixedPointLayout:
    l: int

    def __post_init__(self):
        if not isinstance(self.l, int) or self.l < 4 or self.l % 2:
            raise ValueError(f"bit width must be an even integer >= 4, got {self.l!r}")

    @property
    def frac_bits(self) -> int:
        return self.l // 2

    @property
    def int_bits(self) -> int:
        return self.l // 2 - 1

    @property
    def sign_bits(self) -> int:
        return 1

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def modulus(self) -> int:
        return 1 << self.l

    @property
    def max_raw(self) -> int:
        return (1 << (self.l - 1)) - 1

    @property
    def min_raw(self) -> int:
        return -(1 << (self.l - 1))

    @property
    def bound(self) -> float:
        """Exclusive magnitude bound for encodable reals."""
        return float(1 << self.int_bits)


@dataclass(frozen=True)
class FixedPointWord:
    bits: tuple[int, ...]
    layout: FixedPointLayout

    def __post_init__(self):
        if len(self.bits) != self.layout.l:
            raise ValueError("bit count does not match layout width")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("bits must be 0 or 1")

    @property
    def unsigned(self) -> int:
        return sum(b << i for i, b in enumerate(self.bits))

    @property
    def raw(self) -> int:
        return to_signed(self.unsigned, self.layout.l)

    @classmethod
    def from_raw(cls, raw: int, layout: FixedPointLayout) -> "FixedPointWord":
        u = raw % layout.modulus
        return cls(tuple((u >> i) & 1 for i in range(layout.l)), layout)


def to_signed(u: int, l: int) -> int:
    u &= (1 << l) - 1
    return u - (1 << l) if u >> (l - 1) else u


def wrap(v: int, l: int) -> int:
    """Reduce an integer to the signed l-bit range (two's complement wrap)."""
    return to_signed(v % (1 << l), l)


def quantize(x: float, layout: FixedPointLayout) -> int:
    """Raw integer for ``x``, rounding half away from zero."""
    if not math.isfinite(x) or abs(x) >= layout.bound:
        raise RangeError(f"{x!r} outside (-{layout.bound}, {layout.bound}) for l={layout.l}")
    k = math.floor(abs(x) * layout.scale + 0.5)
    if k > layout.max_raw:
        raise RangeError(f"{x!r} rounds outside the l={layout.l} range")
    return -k if x < 0 else k


def encode(x: float, layout: FixedPointLayout) -> FixedPointWord:
    return FixedPointWord.from_raw(quantize(x, layout), layout)


def decode(w: FixedPointWord) -> float:
    return w.raw / w.layout.scale


# Plaintext reference semantics on raw signed integers.  These mirror the
# wrap-around behaviour of the circuits bit for bit.

def fx_add(a: int, b: int, l: int) -> int:
    return wrap(a + b, l)


def fx_sub(a: int, b: int, l: int) -> int:
    return wrap(a - b, l)


def fx_neg(a: int, l: int) -> int:
    return wrap(-a, l)


def fx_abs(a: int, l: int) -> int:
    # the most negative value has no positive twin and maps to itself
    return wrap(abs(a), l)


def fx_mul(a: int, b: int, l: int) -> int:
    # full product, arithmetic shift (floor) by the fractional width
    return wrap((a * b) >> (l // 2), l)


def fx_div(a: int, b: int, l: int) -> tuple[int, bool]:
    """Quotient truncated toward zero, plus the out-of-domain flag.

    The divider works on the low ``l - 1`` magnitude bits of the dividend, so
    the most negative dividend acts as zero.  A zero divisor saturates the
    magnitude to all ones before the sign is applied.  Both cases are flagged.
    """
    mask = (1 << l) - 1
    flagged = b == 0 or a == -(1 << (l - 1))
    mag_a = abs(a) & ((1 << (l - 1)) - 1)
    mag_b = abs(b) & mask
    if mag_b == 0:
        q = mask
    else:
        q = ((mag_a << (l // 2)) // mag_b) & mask
    negative = (a < 0) != (b < 0)
    return wrap(-q if negative else q, l), flagged


def fx_leq(a: int, b: int) -> int:
    return int(a <= b)


def fx_eq(a: int, b: int) -> int:
    return int(a == b)

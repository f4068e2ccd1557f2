"""Fixed-point word circuits built from simulated gates.

Each circuit is a plain ripple design whose gate-unit cost is a closed form
in the word width ``l``:

=================  ======================
add / sub          5l - 3
negate             2l - 1
abs_value          4l - 1
leq / eq           3l
mux_word           2l
mult               6l^2 + 15l - 6
divide             13.5l^2 - 1.5l + 1
argmin / argmax    k(k - 1)(3l + 1)
min_max            11l
bubble_sort        11(n - 1)^2 l
count_class        ks(8l - 3)
=================  ======================

``gate_cost`` evaluates these formulas; the circuits are tested against it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from . import gatesim as gs
from .fixedpoint import FixedPointLayout, quantize, to_signed
from .gatesim import GateLedger, SimBit


@dataclass
class WordCipher:
    bits: list[SimBit]
    layout: FixedPointLayout
    # lanes whose value came out of a flagged operation (divide by zero ...)
    flags: int = field(default=0, compare=False)

    def __post_init__(self):
        if len(self.bits) != self.layout.l:
            raise ValueError("word length does not match layout")

    @property
    def ledger(self) -> GateLedger:
        return self.bits[0].ledger

    def raws(self) -> list[int]:
        led = self.ledger
        out = []
        for lane in range(led.lanes):
            u = sum(((b.value >> lane) & 1) << i for i, b in enumerate(self.bits))
            out.append(to_signed(u, self.layout.l))
        return out

    def reals(self) -> list[float]:
        return [r / self.layout.scale for r in self.raws()]

    @property
    def raw(self) -> int:
        return self.raws()[0]

    @property
    def real(self) -> float:
        return self.reals()[0]


def encrypt_raw(ledger: GateLedger, raws: int | Sequence[int], layout: FixedPointLayout) -> WordCipher:
    """Word holding one raw integer per lane (a single int fills every lane)."""
    if isinstance(raws, int):
        raws = [raws] * ledger.lanes
    if len(raws) != ledger.lanes:
        raise ValueError(f"expected {ledger.lanes} lane values, got {len(raws)}")
    lo, hi = layout.min_raw, layout.max_raw
    us = []
    for r in raws:
        if not lo <= r <= hi:
            raise ValueError(f"raw value {r} outside l={layout.l} range")
        us.append(r % layout.modulus)
    bits = []
    for i in range(layout.l):
        v = 0
        for lane, u in enumerate(us):
            v |= ((u >> i) & 1) << lane
        bits.append(ledger.input(v))
    return WordCipher(bits, layout)


def encrypt(ledger: GateLedger, xs: float | Sequence[float], layout: FixedPointLayout) -> WordCipher:
    if isinstance(xs, (int, float)):
        xs = [xs] * ledger.lanes
    return encrypt_raw(ledger, [quantize(x, layout) for x in xs], layout)


def const_word(ledger: GateLedger, raw: int, layout: FixedPointLayout) -> WordCipher:
    u = raw % layout.modulus
    return WordCipher([ledger.const((u >> i) & 1) for i in range(layout.l)], layout)


def bit_word(bit: SimBit, layout: FixedPointLayout) -> WordCipher:
    """Word worth 1.0 where ``bit`` is set and 0.0 elsewhere (wiring only)."""
    zero = bit.ledger.const(0)
    bits = [zero] * layout.l
    bits[layout.frac_bits] = bit
    return WordCipher(bits, layout)


def _check(a: WordCipher, b: WordCipher) -> None:
    if a.layout != b.layout:
        raise ValueError(f"layout mismatch: l={a.layout.l} vs l={b.layout.l}")


# bit-vector building blocks; widths are arbitrary

def _ripple_add(a: list[SimBit], b: list[SimBit]) -> tuple[list[SimBit], SimBit]:
    """Sum and carry out; 5w - 3 units."""
    s = [gs.xor(a[0], b[0])]
    c = gs.and_(a[0], b[0])
    for x, y in zip(a[1:], b[1:]):
        t = gs.xor(x, y)
        s.append(gs.xor(t, c))
        c = gs.or_(gs.and_(x, y), gs.and_(t, c))
    return s, c


def _ripple_sub(a: list[SimBit], b: list[SimBit]) -> tuple[list[SimBit], SimBit]:
    """Difference and borrow out; 5w - 3 units."""
    d = [gs.xor(a[0], b[0])]
    bw = gs.and_(gs.not_(a[0]), b[0])
    for x, y in zip(a[1:], b[1:]):
        t = gs.xor(x, y)
        d.append(gs.xor(t, bw))
        bw = gs.or_(gs.and_(gs.not_(x), y), gs.and_(gs.not_(t), bw))
    return d, bw


def _negate_bits(a: list[SimBit]) -> list[SimBit]:
    """Two's complement: invert, then increment; 2w - 1 units."""
    inv = [gs.not_(x) for x in a]
    c = a[0].ledger.const(1)
    out = []
    for i, x in enumerate(inv):
        out.append(gs.xor(x, c))
        if i < len(inv) - 1:
            c = gs.and_(x, c)
    return out


def _mux_bits(sel: SimBit, a: list[SimBit], b: list[SimBit]) -> list[SimBit]:
    return [gs.mux(sel, x, y) for x, y in zip(a, b)]


# word circuits

def add(a: WordCipher, b: WordCipher) -> WordCipher:
    _check(a, b)
    return WordCipher(_ripple_add(a.bits, b.bits)[0], a.layout)


def sub(a: WordCipher, b: WordCipher) -> WordCipher:
    _check(a, b)
    return WordCipher(_ripple_sub(a.bits, b.bits)[0], a.layout)


def negate(a: WordCipher) -> WordCipher:
    return WordCipher(_negate_bits(a.bits), a.layout)


def mux_word(sel: SimBit, a: WordCipher, b: WordCipher) -> WordCipher:
    _check(a, b)
    return WordCipher(_mux_bits(sel, a.bits, b.bits), a.layout)


def abs_value(a: WordCipher) -> WordCipher:
    return mux_word(a.bits[-1], negate(a), a)


def leq(a: WordCipher, b: WordCipher) -> SimBit:
    """Signed a <= b.  Scans upward so the highest differing bit decides."""
    _check(a, b)
    l = a.layout.l
    r = a.ledger.const(1)
    for i in range(l):
        differ = gs.xor(a.bits[i], b.bits[i])
        # below the sign bit the larger word has the 1; at the sign bit the
        # negative word (a 1) is the smaller one
        decide = b.bits[i] if i < l - 1 else a.bits[i]
        r = gs.mux(differ, decide, r)
    return r


def eq(a: WordCipher, b: WordCipher) -> SimBit:
    _check(a, b)
    r = a.ledger.const(1)
    zero = a.ledger.const(0)
    for x, y in zip(a.bits, b.bits):
        r = gs.mux(gs.xor(x, y), zero, r)
    return r


def mult(a: WordCipher, b: WordCipher) -> WordCipher:
    """Fixed-point product, floor-shifted by the fractional width.

    Works on magnitudes: a shift-add array over the low ``l - 1`` bits of each
    magnitude, plus two correction rows for the top magnitude bits (set only
    when an operand is the most negative value).  Only the low ``3l/2`` bits
    of the magnitude product matter; they are negated when the signs differ
    and the middle ``l`` bits are kept.
    """
    _check(a, b)
    lay = a.layout
    l, h = lay.l, lay.frac_bits
    led = a.ledger
    ma, mb = abs_value(a).bits, abs_value(b).bits
    sign = gs.xor(a.bits[-1], b.bits[-1])
    zero = led.const(0)
    acc = [zero] * (2 * l - 1)

    def accumulate(row: list[SimBit], shift: int) -> None:
        window = acc[shift:shift + l]
        s, c = _ripple_add(window, row + [zero])
        acc[shift:shift + l] = s
        if shift + l < len(acc):
            acc[shift + l] = c

    for j in range(l - 1):
        accumulate([gs.and_(x, mb[j]) for x in ma[:l - 1]], j)
    accumulate([gs.and_(x, ma[l - 1]) for x in mb[:l - 1]], l - 1)
    accumulate([gs.and_(x, mb[l - 1]) for x in ma[:l - 1]], l - 1)

    low = acc[:3 * h]
    neg = _negate_bits(low)
    return WordCipher(_mux_bits(sign, neg[h:3 * h], low[h:3 * h]), lay)


def divide(a: WordCipher, b: WordCipher) -> WordCipher:
    """Fixed-point quotient truncated toward zero (restoring long division).

    The remainder:quotient register is ``2l`` bits wide; each step shifts in
    the next dividend bit, trial-subtracts the divisor magnitude and keeps or
    restores the whole register through a row of MUX gates.  A zero divisor
    saturates the magnitude to all ones; a most-negative dividend acts as
    zero.  Both cases are reported in ``flags`` (lane mask) of the result.
    """
    _check(a, b)
    lay = a.layout
    l, h = lay.l, lay.frac_bits
    led = a.ledger
    flags = 0
    for lane, (x, y) in enumerate(zip(a.raws(), b.raws())):
        if y == 0 or x == lay.min_raw:
            flags |= 1 << lane

    ma, mb = abs_value(a).bits, abs_value(b).bits
    sign = gs.xor(a.bits[-1], b.bits[-1])
    zero = led.const(0)
    # dividend magnitude (l - 1 bits) shifted up by h
    num = [zero] * h + ma[:l - 1]
    rem = [zero] * l
    quo = [zero] * l
    for k in reversed(range(len(num))):
        shifted = [num[k]] + rem[:-1]
        diff, borrow = _ripple_sub(shifted, mb)
        q_in = quo[:-1]
        reg = _mux_bits(borrow, shifted + [zero] + q_in, diff + [gs.not_(borrow)] + q_in)
        rem, quo = reg[:l], reg[l:]
    out = _mux_bits(sign, _negate_bits(quo), quo)
    return WordCipher(out, lay, flags=flags)


def argmin(values: Sequence[WordCipher]) -> list[SimBit]:
    """Bit i is set iff values[i] <= every other value (ties set several)."""
    return _arg_extreme(values, lambda x, y: leq(x, y))


def argmax(values: Sequence[WordCipher]) -> list[SimBit]:
    return _arg_extreme(values, lambda x, y: leq(y, x))


def _arg_extreme(values, cmp) -> list[SimBit]:
    k = len(values)
    if k < 2:
        raise ValueError("need at least two values")
    led = values[0].ledger
    out = []
    for i in range(k):
        bit = led.const(1)
        for j in range(k):
            if j != i:
                bit = gs.and_(bit, cmp(values[i], values[j]))
        out.append(bit)
    return out


def first_set(bits: Sequence[SimBit]) -> list[SimBit]:
    """Keep only the lowest set bit of a multi-hot row; 2k - 3 units."""
    out = [bits[0]]
    seen = bits[0]
    for i in range(1, len(bits)):
        out.append(gs.and_(bits[i], gs.not_(seen)))
        if i < len(bits) - 1:
            seen = gs.or_(seen, bits[i])
    return out


def min_max(first: tuple[WordCipher, WordCipher], second: tuple[WordCipher, WordCipher]):
    """((min, label), (max, label)); equal values keep their order."""
    (v1, l1), (v2, l2) = first, second
    t = leq(v1, v2)
    nt = gs.not_(t)
    lo = (mux_word(t, v1, v2), mux_word(t, l1, l2))
    hi = (mux_word(nt, v1, v2), mux_word(nt, l1, l2))
    return lo, hi


def bubble_sort(values: Sequence[WordCipher], labels: Sequence[WordCipher]):
    if len(values) != len(labels):
        raise ValueError("values and labels differ in length")
    n = len(values)
    if n < 2:
        raise ValueError("need at least two values")
    pairs = list(zip(values, labels))
    for _ in range(n - 1):
        for j in range(n - 1):
            pairs[j], pairs[j + 1] = min_max(pairs[j], pairs[j + 1])
    return [p[0] for p in pairs], [p[1] for p in pairs]


def count_class(labels: Sequence[WordCipher], s: int) -> list[WordCipher]:
    """Tally of each class id 1..s among ``labels``."""
    if s < 1:
        raise ValueError("class count must be >= 1")
    lay = labels[0].layout
    led = labels[0].ledger
    tallies = []
    for c in range(1, s + 1):
        tally = const_word(led, 0, lay)
        cid = const_word(led, c * lay.scale, lay)
        for lab in labels:
            tally = add(tally, bit_word(eq(cid, lab), lay))
        tallies.append(tally)
    return tallies


def decode_onehot(bits: Sequence[SimBit]) -> list[int]:
    """Per lane, index of the lowest set bit (-1 if none)."""
    led = bits[0].ledger
    out = []
    for lane in range(led.lanes):
        idx = -1
        for i, b in enumerate(bits):
            if (b.value >> lane) & 1:
                idx = i
                break
        out.append(idx)
    return out


def gate_cost(op: str, l: int, k: int = 2, n: int = 2, s: int = 2) -> int:
    """Closed-form gate units of a circuit at width ``l``."""
    costs = {
        "add": 5 * l - 3,
        "sub": 5 * l - 3,
        "negate": 2 * l - 1,
        "abs": 4 * l - 1,
        "leq": 3 * l,
        "eq": 3 * l,
        "mux_word": 2 * l,
        "mult": 6 * l * l + 15 * l - 6,
        "divide": (27 * l * l - 3 * l + 2) // 2,
        "argmin": k * (k - 1) * (3 * l + 1),
        "argmax": k * (k - 1) * (3 * l + 1),
        "first_set": 2 * k - 3,
        "min_max": 11 * l,
        "bubble_sort": 11 * (n - 1) ** 2 * l,
        "count_class": k * s * (8 * l - 3),
    }
    if op not in costs:
        raise ValueError(f"unknown circuit {op!r}")
    return costs[op]

"""Simulated encrypted bits with a weighted gate ledger.

Every ``SimBit`` carries its plaintext value so circuits can be checked, and
every gate evaluated through this module is charged to the bit's ledger.
Weights: XOR/AND/OR cost one unit, MUX costs two, NOT and constants are free.

A ledger may run several independent instances side by side ("lanes").  In
that case a bit's value is an integer whose bit ``i`` is the value in lane
``i``; one gate call evaluates all lanes at once and is charged once, since
it models one circuit evaluated on many inputs.  With the default single
lane, values are plain 0/1.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, fields


class LedgerMismatchError(ValueError):
    """Inputs to a gate belong to different ledgers."""


@dataclass(frozen=True)
class GateCounts:
    xor: int = 0
    and_: int = 0
    or_: int = 0
    not_: int = 0
    mux: int = 0
    constant: int = 0

    @property
    def binary_gate_units(self) -> int:
        return self.xor + self.and_ + self.or_ + 2 * self.mux

    def __add__(self, other: "GateCounts") -> "GateCounts":
        return GateCounts(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def __sub__(self, other: "GateCounts") -> "GateCounts":
        return diff(other, self)

    def scaled(self, k: int) -> "GateCounts":
        return GateCounts(*(getattr(self, f.name) * k for f in fields(self)))


_KINDS = ("xor", "and_", "or_", "not_", "mux", "constant")


class GateLedger:
    """Monotone gate counters shared by all bits of one circuit run."""

    def __init__(self, lanes: int = 1):
        if lanes < 1:
            raise ValueError("lanes must be >= 1")
        self.lanes = lanes
        self.mask = (1 << lanes) - 1
        self._counts = dict.fromkeys(_KINDS, 0)
        self._lock = threading.Lock()

    def _charge(self, kind: str, n: int = 1) -> None:
        with self._lock:
            self._counts[kind] += n

    def snapshot(self) -> GateCounts:
        with self._lock:
            return GateCounts(**self._counts)

    @property
    def binary_gate_units(self) -> int:
        return self.snapshot().binary_gate_units

    def const(self, bit: int) -> "SimBit":
        self._charge("constant")
        return SimBit(self.mask if bit else 0, self)

    def input(self, value: int) -> "SimBit":
        """Fresh input bit (encryption is free; it happens on the client)."""
        if value & ~self.mask:
            raise ValueError("value has bits outside the lane mask")
        return SimBit(value, self)

    def lane_values(self, bit: "SimBit") -> list[int]:
        return [(bit.value >> i) & 1 for i in range(self.lanes)]


class SimBit:
    __slots__ = ("value", "ledger")

    def __init__(self, value: int, ledger: GateLedger):
        self.value = value
        self.ledger = ledger

    def __repr__(self):
        return f"SimBit({self.value})"


def snapshot(ledger: GateLedger) -> GateCounts:
    return ledger.snapshot()


def diff(before: GateCounts, after: GateCounts) -> GateCounts:
    out = {}
    for f in fields(before):
        d = getattr(after, f.name) - getattr(before, f.name)
        if d < 0:
            raise ValueError(f"negative difference for {f.name}: after precedes before")
        out[f.name] = d
    return GateCounts(**out)


def _same(*bits: SimBit) -> GateLedger:
    led = bits[0].ledger
    for b in bits[1:]:
        if b.ledger is not led:
            raise LedgerMismatchError("gate inputs are bound to different ledgers")
    return led


def xor(a: SimBit, b: SimBit) -> SimBit:
    led = _same(a, b)
    led._charge("xor")
    return SimBit(a.value ^ b.value, led)


def and_(a: SimBit, b: SimBit) -> SimBit:
    led = _same(a, b)
    led._charge("and_")
    return SimBit(a.value & b.value, led)


def or_(a: SimBit, b: SimBit) -> SimBit:
    led = _same(a, b)
    led._charge("or_")
    return SimBit(a.value | b.value, led)


def not_(a: SimBit) -> SimBit:
    a.ledger._charge("not_")
    return SimBit(a.value ^ a.ledger.mask, a.ledger)


def mux(sel: SimBit, a: SimBit, b: SimBit) -> SimBit:
    """``a`` where ``sel`` is 1, else ``b``."""
    led = _same(sel, a, b)
    led._charge("mux")
    s = sel.value
    return SimBit((s & a.value) | (~s & led.mask & b.value), led)


_GATES = {"XOR": xor, "AND": and_, "OR": or_}


def gate(kind: str, a: SimBit, b: SimBit | None = None) -> SimBit:
    kind = kind.upper()
    if kind == "NOT":
        if b is not None:
            raise ValueError("NOT takes a single input")
        return not_(a)
    if kind not in _GATES:
        raise ValueError(f"unknown gate kind {kind!r}")
    if b is None:
        raise ValueError(f"{kind} takes two inputs")
    return _GATES[kind](a, b)

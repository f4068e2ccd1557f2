"""Operation-counting backend standing in for arithmetic HE (CKKS, B/FV).

Values are ordinary doubles; every addition/subtraction and multiplication
performed through ``TrackedScalar``/``TrackedVector``/``TrackedMatrix`` is
charged to an ``OpLedger``.  Operations with plaintext constants are charged
like ciphertext operations.  Counts depend on shapes only, never on values.

Square roots and reciprocals have no native HE operation, so they are
approximated by fixed-length polynomial iterations (``sqrt_approx``,
``inverse_approx``) whose cost is charged like any other arithmetic.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class OpCounts:
    adds: int = 0
    mults: int = 0
    sqrt_ops: int = 0
    inv_ops: int = 0

    def __add__(self, other: "OpCounts") -> "OpCounts":
        return OpCounts(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def __sub__(self, other: "OpCounts") -> "OpCounts":
        out = [getattr(self, f.name) - getattr(other, f.name) for f in fields(self)]
        if min(out) < 0:
            raise ValueError("negative operation count difference")
        return OpCounts(*out)

    def scaled(self, k: int) -> "OpCounts":
        return OpCounts(*(getattr(self, f.name) * k for f in fields(self)))


class OpLedger:
    def __init__(self):
        self._c = {"adds": 0, "mults": 0, "sqrt_ops": 0, "inv_ops": 0}
        self._lock = threading.Lock()

    def charge(self, adds: int = 0, mults: int = 0, sqrt_ops: int = 0, inv_ops: int = 0) -> None:
        with self._lock:
            self._c["adds"] += adds
            self._c["mults"] += mults
            self._c["sqrt_ops"] += sqrt_ops
            self._c["inv_ops"] += inv_ops

    def charge_counts(self, c: OpCounts) -> None:
        self.charge(c.adds, c.mults, c.sqrt_ops, c.inv_ops)

    def snapshot(self) -> OpCounts:
        with self._lock:
            return OpCounts(**self._c)

    @property
    def adds(self) -> int:
        return self._c["adds"]

    @property
    def mults(self) -> int:
        return self._c["mults"]


@dataclass(frozen=True)
class IterationBudgets:
    t_pow: int = 30
    t_sqrt: int = 20
    t_sinv: int = 20

    def __post_init__(self):
        if min(self.t_pow, self.t_sqrt, self.t_sinv) < 1:
            raise ValueError("iteration budgets must be >= 1")


def _value(x) -> float:
    return x.value if isinstance(x, TrackedScalar) else float(x)


class TrackedScalar:
    __slots__ = ("value", "ledger")

    def __init__(self, value: float, ledger: OpLedger):
        self.value = float(value)
        self.ledger = ledger

    def __repr__(self):
        return f"TrackedScalar({self.value!r})"

    def _other(self, other):
        if isinstance(other, TrackedScalar):
            if other.ledger is not self.ledger:
                raise ValueError("operands are bound to different ledgers")
            return other.value
        return float(other)

    def __add__(self, other):
        v = self._other(other)
        self.ledger.charge(adds=1)
        return TrackedScalar(self.value + v, self.ledger)

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        v = self._other(other)
        self.ledger.charge(adds=1)
        return TrackedScalar(self.value - v, self.ledger)

    def __rsub__(self, other):
        v = self._other(other)
        self.ledger.charge(adds=1)
        return TrackedScalar(v - self.value, self.ledger)

    def __mul__(self, other):
        v = self._other(other)
        self.ledger.charge(mults=1)
        return TrackedScalar(self.value * v, self.ledger)

    def __rmul__(self, other):
        return self.__mul__(other)


class TrackedVector:
    def __init__(self, values, ledger: OpLedger):
        self.values = np.asarray(values, dtype=float).reshape(-1)
        self.ledger = ledger

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i) -> TrackedScalar:
        return TrackedScalar(self.values[i], self.ledger)

    def _peer(self, other: "TrackedVector") -> np.ndarray:
        if len(other) != len(self):
            raise ValueError(f"length mismatch: {len(self)} vs {len(other)}")
        return other.values

    def __add__(self, other: "TrackedVector") -> "TrackedVector":
        v = self._peer(other)
        self.ledger.charge(adds=len(self))
        return TrackedVector(self.values + v, self.ledger)

    def __sub__(self, other: "TrackedVector") -> "TrackedVector":
        v = self._peer(other)
        self.ledger.charge(adds=len(self))
        return TrackedVector(self.values - v, self.ledger)

    def scale(self, c) -> "TrackedVector":
        self.ledger.charge(mults=len(self))
        return TrackedVector(self.values * _value(c), self.ledger)

    def total(self) -> TrackedScalar:
        self.ledger.charge(adds=len(self) - 1)
        return TrackedScalar(float(np.sum(self.values)), self.ledger)


class TrackedMatrix:
    def __init__(self, values, ledger: OpLedger):
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("matrix must be two-dimensional")
        self.ledger = ledger

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def row(self, i: int) -> TrackedVector:
        return TrackedVector(self.values[i], self.ledger)

    def col(self, j: int) -> TrackedVector:
        return TrackedVector(self.values[:, j], self.ledger)

    def entry(self, i: int, j: int) -> TrackedScalar:
        return TrackedScalar(self.values[i, j], self.ledger)

    def T(self) -> "TrackedMatrix":
        return TrackedMatrix(self.values.T, self.ledger)

    def scale(self, c) -> "TrackedMatrix":
        self.ledger.charge(mults=self.values.size)
        return TrackedMatrix(self.values * _value(c), self.ledger)

    def __sub__(self, other: "TrackedMatrix") -> "TrackedMatrix":
        if other.shape != self.shape:
            raise ValueError("shape mismatch")
        self.ledger.charge(adds=self.values.size)
        return TrackedMatrix(self.values - other.values, self.ledger)


def dot(u: TrackedVector, v: TrackedVector) -> TrackedScalar:
    if len(u) != len(v):
        raise ValueError(f"length mismatch: {len(u)} vs {len(v)}")
    d = len(u)
    if d == 0:
        raise ValueError("empty vectors")
    u.ledger.charge(mults=d, adds=d - 1)
    return TrackedScalar(float(np.dot(u.values, v.values)), u.ledger)


def matvec(a: TrackedMatrix, x: TrackedVector) -> TrackedVector:
    m, p = a.shape
    if p != len(x):
        raise ValueError(f"shape mismatch: {a.shape} @ {len(x)}")
    a.ledger.charge(mults=m * p, adds=m * (p - 1))
    return TrackedVector(a.values @ x.values, a.ledger)


def matmul(a: TrackedMatrix, b: TrackedMatrix) -> TrackedMatrix:
    m, p = a.shape
    p2, q = b.shape
    if p != p2:
        raise ValueError(f"shape mismatch: {a.shape} @ {b.shape}")
    a.ledger.charge(mults=m * p * q, adds=m * q * (p - 1))
    return TrackedMatrix(a.values @ b.values, a.ledger)


def outer(u: TrackedVector, v: TrackedVector) -> TrackedMatrix:
    u.ledger.charge(mults=len(u) * len(v))
    return TrackedMatrix(np.outer(u.values, v.values), u.ledger)


def sqrt_approx(a: TrackedScalar, t_sqrt: int = 20) -> TrackedScalar:
    """Division-free square root for inputs in [0, 1].

    Coupled iteration x <- x(1 - u), u <- u^2 (u - 3/2) with x0 = a and
    u0 = (a - 1)/2; x converges to sqrt(a).  Three multiplications and two
    additions per step.
    """
    if a.value < 0 or a.value > 1:
        raise ValueError(f"sqrt_approx input {a.value!r} outside [0, 1]")
    if t_sqrt < 1:
        raise ValueError("t_sqrt must be >= 1")
    x = a
    u = (a - 1.0) * 0.5
    for _ in range(t_sqrt):
        x = x * (1.0 - u)
        u = (u * u) * (u - 1.5)
    a.ledger.charge(sqrt_ops=t_sqrt)
    return x


def inverse_approx(a: TrackedScalar, t_sinv: int = 20) -> TrackedScalar:
    """Reciprocal for inputs in (0, 2) by the multiplicative iteration
    x <- x(1 + e), e <- e^2 with x0 = 2 - a, e0 = 1 - a."""
    if a.value == 0:
        raise ZeroDivisionError("inverse_approx of zero")
    if not 0 < a.value < 2:
        raise ValueError(f"inverse_approx input {a.value!r} outside (0, 2)")
    if t_sinv < 1:
        raise ValueError("t_sinv must be >= 1")
    x = 2.0 - a
    e = 1.0 - a
    for _ in range(t_sinv):
        e = e * e
        x = x * (1.0 + e)
    a.ledger.charge(inv_ops=t_sinv)
    return x


def _pow4_exponent(v: float) -> int:
    """Smallest e with v / 4**e <= 1 (so v / 4**e lands in (1/4, 1])."""
    if v <= 0:
        return 0
    m, ex = math.frexp(v)  # v = m * 2**ex, m in [0.5, 1)
    e = (ex + 1) // 2
    while v / 4.0 ** e > 1:
        e += 1
    while e > -1100 and v / 4.0 ** (e - 1) <= 1:
        e -= 1
    return e


def scaled_sqrt(a: TrackedScalar, t_sqrt: int = 20) -> TrackedScalar:
    """sqrt of any non-negative value: scale by a power of four into the
    iteration's domain, take the root, scale back (two extra mults)."""
    if a.value < 0:
        raise ValueError("square root of a negative value")
    e = _pow4_exponent(a.value)
    r = sqrt_approx(a * 4.0 ** -e, t_sqrt)
    return r * 2.0 ** e


def scaled_inverse(a: TrackedScalar, t_sinv: int = 20) -> TrackedScalar:
    """1/a for positive a via power-of-two scaling into (1/2, 1]."""
    if a.value <= 0:
        raise ValueError("scaled_inverse needs a positive value")
    _, ex = math.frexp(a.value)  # a / 2**ex in [0.5, 1)
    r = inverse_approx(a * 2.0 ** -ex, t_sinv)
    return r * 2.0 ** -ex


def normalize(v: TrackedVector, budgets: IterationBudgets) -> TrackedVector:
    norm = scaled_sqrt(dot(v, v), budgets.t_sqrt)
    if norm.value <= 0:
        raise ValueError("cannot normalize a zero vector")
    return v.scale(scaled_inverse(norm, budgets.t_sinv))


def power_iteration(m: TrackedMatrix, budgets: IterationBudgets = IterationBudgets(),
                    start: TrackedVector | None = None):
    """Dominant eigenpair of a symmetric matrix.

    The matrix is first scaled by the power of two just above its spectral
    radius, so the dominant ratio lies in (1/2, 1] and iterates neither
    overflow nor vanish for any budget, then multiplied into the
    start vector ``t_pow`` times.  The start defaults to the normalized
    all-ones vector; any non-zero vector works since the result is
    normalized once at the end.  The eigenvalue is the Rayleigh quotient
    (one more product), scaled back.
    """
    rows, cols = m.shape
    if rows == 0:
        raise ValueError("empty matrix")
    if rows != cols:
        raise ValueError("power iteration needs a square matrix")
    radius = float(np.max(np.abs(np.linalg.eigvalsh(m.values)))) if np.any(m.values) else 0.0
    rho = 2.0 ** math.frexp(radius)[1] if radius > 0 else 1.0
    scaled = m.scale(1.0 / rho)
    if start is None:
        v = TrackedVector(np.full(rows, 1.0 / math.sqrt(rows)), m.ledger)
    elif len(start) != rows:
        raise ValueError("start vector does not match the matrix")
    else:
        v = start
    for _ in range(budgets.t_pow):
        v = matvec(scaled, v)
    v = normalize(v, budgets)
    lam = dot(v, matvec(scaled, v)) * rho
    return lam, v


def deflate(m: TrackedMatrix, lam: TrackedScalar, v: TrackedVector) -> TrackedMatrix:
    """Hotelling deflation m - lam * v v^T."""
    return m - outer(v.scale(lam), v)


def encrypt_vector(values: Sequence[float], ledger: OpLedger) -> TrackedVector:
    return TrackedVector(values, ledger)


def encrypt_matrix(values, ledger: OpLedger) -> TrackedMatrix:
    return TrackedMatrix(values, ledger)

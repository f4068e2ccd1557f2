"""Analytic time estimates for general and kernel circuits.

Estimates are exact operation counts multiplied by per-operation times from
a ``CostProfile``.  The counting formulas below are written out by hand from
the loop structure of ``mlarith`` / ``mlbool``; the test suite checks them
against measured ledgers, so any drift between formula and implementation
shows up as a failure rather than a silently wrong estimate.

Kernel-variant estimates include the kernel build at its critical-path cost:
the entries are independent dot products spread over ``workers`` modeled
processors (``None`` = one per entry, i.e. a single dot product of latency).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

from .arithsim import IterationBudgets, OpCounts
from .boolcircuits import gate_cost
from .kernelengine import build_steps

ARITH_ALGORITHMS = ("svm", "pca", "total_variance", "distance", "norm", "similarity", "kmeans")
BOOL_ALGORITHMS = ("kmeans", "knn")
VARIANTS = ("general", "kernel")


class UnknownAlgorithmError(ValueError):
    pass


@dataclass(frozen=True)
class CostProfile:
    scheme: str
    t_add: float
    t_mult: float
    t_gate: float | None = None
    annotation: str = ""

    def __post_init__(self):
        for name in ("t_add", "t_mult"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.t_gate is not None and not self.t_gate > 0:
            raise ValueError("t_gate must be positive")

    @property
    def ratio(self) -> float:
        return self.t_mult / self.t_add


TFHE_WIDTH = 16


def tfhe_gate_times(t_add: float = 1.06, t_mult: float = 22.95, l: int = TFHE_WIDTH) -> dict[str, float]:
    """Per-gate-unit time implied by the TFHE add and mult timings."""
    return {
        "from_mult": t_mult / gate_cost("mult", l),
        "from_add": t_add / gate_cost("add", l),
    }


def builtin_profiles() -> dict[str, CostProfile]:
    ns, ms = 1e-9, 1e-3
    return {
        "plain": CostProfile("plain", 3.39 * ns, 3.56 * ns, annotation="native double arithmetic"),
        "tfhe": CostProfile("TFHE", 1.06, 22.95, tfhe_gate_times()["from_mult"],
                            annotation=f"l={TFHE_WIDTH} fixed-point gate circuits"),
        "ckks": CostProfile("CKKS", 24.85 * ms, 920.75 * ms,
                            annotation="lambda=128, N=2^16, Delta=2^50, L=110"),
        "bfv": CostProfile("B/FV", 1.81 * ms, 284.62 * ms, annotation="leveled, N=2^15"),
    }


def get_profile(name: str, extra: dict[str, CostProfile] | None = None) -> CostProfile:
    key = name.strip().lower().replace("/", "")
    table = dict(builtin_profiles())
    for k, v in (extra or {}).items():
        table[k.lower().replace("/", "")] = v
    if key not in table:
        raise KeyError(f"unknown profile {name!r}; known: {', '.join(sorted(table))}")
    return table[key]


# profile files: records of "key = value" lines separated by blank lines;
# '#' starts a comment.  Durations are in seconds.

PROFILE_FIELDS = ("scheme", "t_add", "t_mult", "t_gate", "annotation")


def dumps_profiles(profiles: Iterable[CostProfile]) -> str:
    out = []
    for p in profiles:
        lines = [f"scheme = {p.scheme}", f"t_add = {p.t_add!r}", f"t_mult = {p.t_mult!r}"]
        if p.t_gate is not None:
            lines.append(f"t_gate = {p.t_gate!r}")
        if p.annotation:
            lines.append(f"annotation = {p.annotation}")
        out.append("\n".join(lines))
    return "\n\n".join(out) + "\n"


def loads_profiles(text: str) -> list[CostProfile]:
    profiles, rec, start = [], {}, 0

    def flush():
        if not rec:
            return
        missing = {"scheme", "t_add", "t_mult"} - rec.keys()
        if missing:
            raise ValueError(f"profile record at line {start} lacks {', '.join(sorted(missing))}")
        try:
            profiles.append(CostProfile(
                rec["scheme"], float(rec["t_add"]), float(rec["t_mult"]),
                float(rec["t_gate"]) if "t_gate" in rec else None, rec.get("annotation", "")))
        except ValueError as exc:
            raise ValueError(f"profile record at line {start}: {exc}") from None
        rec.clear()

    for no, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            if not line.strip():
                flush()
            continue
        if "=" not in body:
            raise ValueError(f"line {no}: expected 'key = value'")
        key, val = (s.strip() for s in body.split("=", 1))
        if key not in PROFILE_FIELDS:
            raise ValueError(f"line {no}: unknown field {key!r}")
        if not rec:
            start = no
        rec[key] = val
    flush()
    return profiles


def load_profiles(path: str | Path) -> dict[str, CostProfile]:
    return {p.scheme.lower().replace("/", ""): p for p in loads_profiles(Path(path).read_text())}


# parameters and counting formulas

@dataclass(frozen=True)
class Params:
    n: int
    d: int
    k: int = 3
    t: int = 10
    l: int = 16
    s: int = 2
    r: int = 1
    budgets: IterationBudgets = field(default_factory=IterationBudgets)
    bias: bool = True
    hoist: bool = False
    workers: int | None = None


def _ops(adds: int = 0, mults: int = 0, sqrt_ops: int = 0, inv_ops: int = 0) -> OpCounts:
    return OpCounts(adds, mults, sqrt_ops, inv_ops)


def dot_counts(d: int) -> OpCounts:
    return _ops(d - 1, d)


def sqrt_counts(b: IterationBudgets) -> OpCounts:
    return _ops(2 * b.t_sqrt + 1, 3 * b.t_sqrt + 3, sqrt_ops=b.t_sqrt)


def inverse_counts(b: IterationBudgets) -> OpCounts:
    return _ops(b.t_sinv + 2, 2 * b.t_sinv + 2, inv_ops=b.t_sinv)


def normalize_counts(m: int, b: IterationBudgets) -> OpCounts:
    return dot_counts(m) + sqrt_counts(b) + inverse_counts(b) + _ops(mults=m)


def power_iteration_counts(m: int, b: IterationBudgets) -> OpCounts:
    matvec = _ops(m * (m - 1), m * m)
    return (_ops(mults=m * m) + matvec.scaled(b.t_pow) + normalize_counts(m, b)
            + matvec + dot_counts(m) + _ops(mults=1))


def deflation_counts(m: int) -> OpCounts:
    return _ops(m * m, m + m * m)


def arith_counts(algorithm: str, variant: str, p: Params) -> OpCounts:
    """Exact add/mult counts of one evaluation, kernel build excluded."""
    n, d, b = p.n, p.d, p.budgets
    bias = int(p.bias)
    if variant not in VARIANTS:
        raise UnknownAlgorithmError(f"unknown variant {variant!r}")
    if algorithm == "svm":
        if variant == "general":
            per = _ops(n * (d - 1) + n * bias + (n - 1) + 2, n * (d + 2) + 2)
        else:
            per = _ops(n * bias + (n - 1) + 2, 2 * n + 2)
        return per.scaled(p.t * n)
    if algorithm == "pca":
        if variant == "general":
            cov = _ops(d * d * (n - 1), d * d * n + d * d)
            return cov + power_iteration_counts(d, b).scaled(p.r) + deflation_counts(d).scaled(p.r - 1)
        per = (_ops(d * (n - 1), d * n) + dot_counts(n) + _ops(mults=1) + sqrt_counts(b)
               + inverse_counts(b) + _ops(mults=d) + _ops(mults=1))
        return (power_iteration_counts(n, b).scaled(p.r) + deflation_counts(n).scaled(p.r - 1)
                + per.scaled(p.r))
    if algorithm == "total_variance":
        if variant == "general":
            return (_ops((n - 1) * d, d) + _ops(n * d) + dot_counts(d).scaled(n)
                    + _ops(n - 1, 1))
        return _ops((n - 1) + (n * n - 1) + 1, 2)
    if algorithm == "distance":
        return _ops(d) + dot_counts(d) if variant == "general" else _ops(3)
    if algorithm == "norm":
        return (dot_counts(d) if variant == "general" else OpCounts()) + sqrt_counts(b)
    if algorithm == "similarity":
        base = sqrt_counts(b).scaled(2) + inverse_counts(b) + _ops(mults=2)
        return dot_counts(d).scaled(3) + base if variant == "general" else base
    if algorithm == "kmeans":
        k = p.k
        if variant == "general":
            per = _ops(n * d, k * d) + (_ops(d) + dot_counts(d)).scaled(n * k)
        else:
            totals = _ops(n * n - 1).scaled(k if p.hoist else n * k)
            per = totals + _ops((n - 1) + 2, 1).scaled(n * k)
        return per.scaled(p.t)
    raise UnknownAlgorithmError(f"no arithmetic model for {algorithm!r}")


def arith_build_counts(algorithm: str, p: Params) -> tuple[OpCounts, OpCounts]:
    """(total, critical-path) cost of the kernel an algorithm needs."""
    if algorithm not in ARITH_ALGORITHMS:
        raise UnknownAlgorithmError(f"no arithmetic model for {algorithm!r}")
    items = p.n * (p.n + 1) // 2
    return dot_counts(p.d).scaled(items), dot_counts(p.d).scaled(build_steps(p.n, p.workers))


def bool_gate_units(algorithm: str, variant: str, p: Params) -> int:
    """Exact gate units of one Boolean evaluation, kernel build excluded."""
    n, d, k, l, s = p.n, p.d, p.k, p.l, p.s
    add, mult, div = gate_cost("add", l), gate_cost("mult", l), gate_cost("divide", l)
    if variant not in VARIANTS:
        raise UnknownAlgorithmError(f"unknown variant {variant!r}")
    if algorithm == "kmeans":
        assign = n * (gate_cost("argmin", l, k=k) + gate_cost("first_set", l, k=k))
        if variant == "general":
            per = (k * n * d * l
                   + k * ((n - 1) * add + d * ((n - 1) * add + div))
                   + n * k * (d * add + d * mult + (d - 1) * add)
                   + assign)
        else:
            per = (k * (n * n * (l + 1) + (n - 1) * add + (n * n - 1) * add
                        + n * ((n - 1) * add + 2 * add + mult))
                   + assign)
        return p.t * per
    if algorithm == "knn":
        if variant == "general":
            dist = n * (d * add + d * mult + (d - 1) * add)
        else:
            dist = 3 * n * add
        return dist + knn_shared_units(n, k, s, l)
    raise UnknownAlgorithmError(f"no Boolean model for {algorithm!r}")


def knn_shared_units(n: int, k: int, s: int, l: int) -> int:
    """Sort + class count + majority vote, common to both k-NN variants."""
    return 11 * (n - 1) ** 2 * l + k * s * (8 * l - 3) + s * (s - 1) * (3 * l + 1)


def bool_build_units(algorithm: str, p: Params) -> tuple[int, int]:
    dot = p.d * gate_cost("mult", p.l) + (p.d - 1) * gate_cost("add", p.l)
    if algorithm == "kmeans":
        items = p.n * (p.n + 1) // 2
    elif algorithm == "knn":
        items = 2 * p.n  # query row and diagonal
    else:
        raise UnknownAlgorithmError(f"no Boolean model for {algorithm!r}")
    steps = 1 if p.workers is None or p.workers >= items else math.ceil(items / p.workers)
    return items * dot, steps * dot


# estimates

def duration(counts: OpCounts, profile: CostProfile) -> float:
    return counts.adds * profile.t_add + counts.mults * profile.t_mult


def gate_duration(units: int, profile: CostProfile) -> float:
    if profile.t_gate is None:
        raise ValueError(f"profile {profile.scheme} has no per-gate time")
    return units * profile.t_gate


@dataclass(frozen=True)
class ComplexityEstimate:
    algorithm: str
    variant: str
    backend: str
    params: Params
    eval_counts: OpCounts | None
    eval_units: int | None
    build_counts: OpCounts | None
    build_units: int | None
    eval_duration: float
    build_duration: float

    @property
    def duration(self) -> float:
        return self.eval_duration + self.build_duration


def estimate(algorithm: str, variant: str, params: Params, profile: CostProfile,
             backend: str = "arith", build_share: float = 1.0) -> ComplexityEstimate:
    """Counts and duration of one query.  ``build_share`` is the fraction of
    the kernel build charged to this query (1 = full, 0 = cached)."""
    algorithm = algorithm.lower()
    if backend == "arith":
        ev = arith_counts(algorithm, variant, params)
        bc = arith_build_counts(algorithm, params)[1] if variant == "kernel" else OpCounts()
        return ComplexityEstimate(algorithm, variant, backend, params, ev, None, bc, None,
                                  duration(ev, profile), build_share * duration(bc, profile))
    if backend == "bool":
        units = bool_gate_units(algorithm, variant, params)
        bu = bool_build_units(algorithm, params)[1] if variant == "kernel" else 0
        return ComplexityEstimate(algorithm, variant, backend, params, None, units, None, bu,
                                  gate_duration(units, profile), build_share * gate_duration(bu, profile))
    raise ValueError(f"unknown backend {backend!r}")


def eff(t_gen: float, t_ker: float) -> float:
    if not (t_gen > 0 and t_ker > 0):
        raise ValueError("times must be positive")
    return t_gen / t_ker


def simulate_kmeans_ratio(n: int, d: int, k: int, t: int, profile: CostProfile,
                          hoist: bool = False, workers: int | None = None) -> float:
    p = Params(n=n, d=d, k=k, t=t, hoist=hoist, workers=workers)
    return eff(estimate("kmeans", "general", p, profile).duration,
               estimate("kmeans", "kernel", p, profile).duration)


# Reference points for side-by-side reporting of the k-means study.
KMEANS_STUDY_TARGETS = {
    (10, "plain"): 45.0, (10, "tfhe"): 315.0, (10, "ckks"): 416.0, (10, "bfv"): 645.0,
    (100, "plain"): 0.47, (100, "bfv"): 35.0,
}

SVM_HEADLINE = {"n": 20, "d": 784, "t": 20}


@dataclass(frozen=True)
class SvmHeadline:
    t_gen: float
    t_ker: float
    kernelization: float

    @property
    def eff(self) -> float:
        return eff(self.t_gen, self.t_ker)

    @property
    def kernelization_fraction(self) -> float:
        return self.kernelization / self.t_ker


def svm_headline_estimate(profile: CostProfile | None = None, n: int = SVM_HEADLINE["n"],
                          d: int = SVM_HEADLINE["d"], t: int = SVM_HEADLINE["t"],
                          workers: int | None = None) -> SvmHeadline:
    profile = profile or builtin_profiles()["ckks"]
    p = Params(n=n, d=d, t=t, workers=workers)
    gen = estimate("svm", "general", p, profile)
    ker = estimate("svm", "kernel", p, profile)
    return SvmHeadline(gen.duration, ker.duration, ker.build_duration)


def pca_symbolic(variant: str, n: int, d: int, r: int, b: IterationBudgets, source: str = "text") -> int:
    """Leading-order PCA cost assuming packed matrix products.

    ``source='text'`` uses n t_pow + 3 r t_sqrt + n r for the kernel variant,
    ``source='table'`` the alternative n r + r t_pow + 3 n t_sqrt.  The
    general variant is d^2 + d t_pow + 3 r t_sqrt either way.
    """
    if variant == "general":
        return d * d + d * b.t_pow + 3 * r * b.t_sqrt
    if source == "text":
        return n * b.t_pow + 3 * r * b.t_sqrt + n * r
    if source == "table":
        return n * r + r * b.t_pow + 3 * n * b.t_sqrt
    raise ValueError("source must be 'text' or 'table'")


def with_workers(p: Params, workers: int | None) -> Params:
    return replace(p, workers=workers)

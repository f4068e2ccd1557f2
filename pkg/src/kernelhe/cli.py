"""Command-line entry point: ``kernelhe run|estimate|sweep|profiles``.

Exit status is 0 on success, 1 for invalid input or configuration and 2 for
failures while running.  Single results are written as ``key=value`` lines;
tables (estimates, sweeps) as CSV.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import costmodel as cm
from . import phizer as pz
from . import plainref
from .arithsim import IterationBudgets
from .kernelengine import Dataset, KernelStore, WORKERS_ENV, default_workers


class ValidationError(ValueError):
    pass


class DatasetError(ValidationError):
    pass


# dataset ingestion

def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def ingest_dataset(path: str | Path, labels: bool = False) -> Dataset:
    """Comma-separated rows, one point each; a non-numeric first row is a header.
    With ``labels`` the last column is taken as the label."""
    text = Path(path).read_text()
    rows = [(no, row) for no, row in enumerate(csv.reader(io.StringIO(text)), 1)
            if any(c.strip() for c in row)]
    if rows and not all(_is_number(c.strip()) for c in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    width = len(rows[0][1])
    values = []
    for no, row in rows:
        if len(row) != width:
            raise DatasetError(f"{path}:{no}: expected {width} columns, found {len(row)}")
        try:
            values.append([float(c) for c in row])
        except ValueError:
            bad = next(c for c in row if not _is_number(c.strip()))
            raise DatasetError(f"{path}:{no}: non-numeric cell {bad.strip()!r}") from None
    arr = np.array(values)
    if labels:
        if width < 2:
            raise DatasetError(f"{path}: label column leaves no features")
        return Dataset(arr[:, :-1], arr[:, -1])
    return Dataset(arr)


def synthetic_dataset(n: int, d: int, seed: int, label_kind: str | None = None, s: int = 2) -> Dataset:
    """Uniform points in [-1, 1]^d; labels are +-1 ("sign") or 1..s ("class")."""
    if n < 1 or d < 1:
        raise ValidationError("synthetic data needs n >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1.0, 1.0, size=(n, d))
    if label_kind == "sign":
        return Dataset(pts, rng.choice([-1.0, 1.0], size=n))
    if label_kind == "class":
        return Dataset(pts, rng.integers(1, s + 1, size=n).astype(float))
    return Dataset(pts)


# output helpers

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        items = list(v)
        if items and isinstance(items[0], (list, tuple, np.ndarray)):
            return ";".join(_fmt(r) for r in items)
        return ",".join(_fmt(x) for x in items)
    if isinstance(v, np.generic):
        return _fmt(v.item())
    return str(v)


def format_record(record: dict) -> str:
    return "".join(f"{k}={_fmt(v)}\n" for k, v in record.items())


def parse_record(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if line.strip():
            key, _, val = line.partition("=")
            out[key] = val
    return out


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# configuration

@dataclass
class ExperimentConfig:
    algorithm: str
    variant: str = "auto"
    backend: str = "arith"
    n: int = 10
    d: int = 5
    k: int = 3
    t: int = 10
    l: int = 16
    s: int = 2
    r: int = 1
    eta: float = 0.01
    budgets: IterationBudgets = IterationBudgets()
    profile: str | None = None
    seed: int = 0
    output: str | None = None
    i: int = 0
    j: int = 1
    point: tuple[float, ...] | None = None
    hoist: bool = False
    bias: bool = True
    workers: int | None = None

    def validate(self) -> None:
        pz.require_supported(self.algorithm)  # unsupported names fail first
        if self.variant not in ("general", "kernel", "auto"):
            raise ValidationError(f"unknown variant {self.variant!r}")
        if self.backend not in ("arith", "bool", "plainref"):
            raise ValidationError(f"unknown backend {self.backend!r}")
        if self.variant == "auto" and not self.profile:
            raise ValidationError("variant 'auto' needs --profile")
        if self.backend == "bool" and (self.l < 4 or self.l % 2):
            raise ValidationError("bool backend needs an even word length l >= 4")


def _profile(name: str, extra: dict | None) -> cm.CostProfile:
    try:
        return cm.get_profile(name, extra)
    except KeyError as exc:
        raise ValidationError(exc.args[0]) from None


def _label_kind(algorithm: str) -> str | None:
    return {"svm": "sign", "knn": "class"}.get(algorithm)


def _query(cfg: ExperimentConfig, data: Dataset) -> pz.Query:
    backend = cfg.backend
    if backend == "plainref":
        # priced like the encrypted backend that serves the algorithm
        backend = "bool" if cfg.algorithm == "knn" else "arith"
    point = cfg.point
    if cfg.algorithm == "knn" and point is None:
        point = tuple(np.random.default_rng(cfg.seed + 1).uniform(-1.0, 1.0, data.d))
    return pz.Query(cfg.algorithm, data, backend=backend, k=cfg.k, t=cfg.t, l=cfg.l, s=cfg.s,
                    r=cfg.r, eta=cfg.eta, budgets=cfg.budgets, i=cfg.i, j=cfg.j, point=point,
                    hoist=cfg.hoist, bias=cfg.bias, workers=cfg.workers)


def _plain_result(q: pz.Query) -> dict:
    x, y, a = q.dataset.points, q.dataset.labels, q.algorithm
    if a == "svm":
        return {"alpha": plainref.svm(x, y, q.eta, q.t, q.bias).tolist()}
    if a == "pca":
        comps, vals = plainref.pca(x, q.r)
        return {"components": comps.tolist(), "eigenvalues": vals.tolist()}
    if a == "total_variance":
        return {"value": plainref.total_variance(x)}
    if a == "distance":
        return {"value": plainref.distance(x[q.i], x[q.j])}
    if a == "norm":
        return {"value": plainref.norm(x[q.i])}
    if a == "similarity":
        return {"value": plainref.similarity(x[q.i], x[q.j])}
    if a == "kmeans":
        return {"labels": plainref.kmeans(x, q.k, q.t).tolist()}
    return {"predicted": plainref.knn(x, y, q.point, q.k, q.s)}


def cmd_run(cfg: ExperimentConfig, data: Dataset, extra_profiles: dict | None = None) -> dict:
    cfg.validate()
    q = _query(cfg, data)
    pz.check_query(q)
    record = {"algorithm": q.algorithm, "backend": cfg.backend, "n": data.n, "d": data.d,
              "seed": cfg.seed}
    profile = _profile(cfg.profile, extra_profiles) if cfg.profile else None
    if profile is not None:
        if q.backend == "bool" and profile.t_gate is None:
            raise ValidationError(f"profile {profile.scheme} has no per-gate time for the bool backend")
        record["profile"] = profile.scheme
    variant = cfg.variant
    if variant == "auto":
        choice = pz.decide(q, profile)
        variant = choice.variant
        record.update(decision=choice.decision, t_gen=choice.t_gen, t_ker=choice.t_ker,
                      eff=cm.eff(choice.t_gen, choice.t_ker))
    record["variant"] = variant
    if cfg.backend == "plainref":
        record.update(_plain_result(q))
        return record
    # measured counts are priced under the profile if one was given
    ev = pz.evaluate(q, variant, KernelStore(), profile or cm.builtin_profiles()["tfhe"])
    record.update(ev.result)
    if ev.eval_counts is not None:
        c, b = ev.eval_counts, ev.build_counts
        record.update(adds=c.adds, mults=c.mults, sqrt_iterations=c.sqrt_ops,
                      inverse_iterations=c.inv_ops, build_adds=b.adds, build_mults=b.mults)
    else:
        record.update(gate_units=ev.eval_units, build_gate_units=ev.build_units)
    if profile is not None:
        est = cm.estimate(q.algorithm, variant, q.params, profile, backend=q.backend)
        record.update(estimated_seconds=est.duration, measured_seconds=ev.measured)
    return record


ESTIMATE_COLUMNS = ("algorithm", "backend", "scheme", "n", "d", "t_gen", "t_ker", "t_build",
                    "build_included", "eff")


def _estimate_row(algorithm: str, backend: str, params: cm.Params, profile: cm.CostProfile,
                  include_build: bool = True) -> dict:
    """t_build is the critical-path kernel build; t_ker contains it only
    when ``include_build`` (otherwise the kernel counts as precomputed)."""
    t_gen = cm.estimate(algorithm, "general", params, profile, backend=backend).duration
    ker = cm.estimate(algorithm, "kernel", params, profile, backend=backend)
    t_ker = ker.duration if include_build else ker.eval_duration
    return {"algorithm": algorithm, "backend": backend, "scheme": profile.scheme, "n": params.n,
            "d": params.d, "t_gen": t_gen, "t_ker": t_ker, "t_build": ker.build_duration,
            "build_included": include_build, "eff": cm.eff(t_gen, t_ker)}


def _csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def cmd_estimate(algorithm: str, params_list: Sequence[cm.Params], profile: cm.CostProfile,
                 backend: str = "arith", include_build: bool = True) -> list[dict]:
    algorithm = pz.require_supported(algorithm)
    if algorithm not in pz.SUPPORTED.get(backend, ()):
        raise ValidationError(f"{algorithm} is not available on the {backend} backend")
    if backend == "bool" and profile.t_gate is None:
        raise ValidationError(f"profile {profile.scheme} has no per-gate time")
    return [_estimate_row(algorithm, backend, p, profile, include_build) for p in params_list]


FIGURES = ("fig4a", "fig4b", "fig6-style", "fig7-style")
SWEEP_COLUMNS = ("figure",) + ESTIMATE_COLUMNS


def _sweep_grid(figure: str, profiles: Sequence[cm.CostProfile], n: int | None) -> list[tuple]:
    """(algorithm, backend, params, profile, include_build) per grid point, in
    output order.  The k-means study charges the build to t_ker; the dimension
    sweeps treat the kernel as precomputed so t_ker is flat in d."""
    if figure in ("fig4a", "fig4b"):
        n = n or (10 if figure == "fig4a" else 100)
        return [("kmeans", "arith", cm.Params(n=n, d=784, k=3, t=10), p, True) for p in profiles]
    if figure not in FIGURES:
        raise ValidationError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
    n = n or 10
    dims = range(max(1, n // 2), 3 * n // 2 + 1)
    algos = ([("svm", "arith"), ("pca", "arith"), ("kmeans", "bool"), ("knn", "bool")]
             if figure == "fig6-style" else
             [(a, "arith") for a in ("total_variance", "distance", "norm", "similarity")])
    grid = []
    for alg, backend in algos:
        for p in profiles:
            if backend == "bool" and p.t_gate is None:
                continue
            for d in dims:
                grid.append((alg, backend, cm.Params(n=n, d=d, k=3, t=10, r=min(2, d)), p, False))
    return grid


def cmd_sweep(figure: str, profiles: Sequence[cm.CostProfile], n: int | None = None,
              jobs: int = 1) -> list[dict]:
    grid = _sweep_grid(figure, profiles, n)

    def one(item):
        row = _estimate_row(*item)
        return {"figure": figure, **row}

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, grid))
    return [one(item) for item in grid]


# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _dims(text: str) -> list[int]:
    try:
        if ":" in text:
            lo, hi = (int(v) for v in text.split(":"))
            return list(range(lo, hi + 1))
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dimension list {text!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _add_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=10, help="points (synthetic data / estimates)")
    p.add_argument("--d", type=int, default=5, help="dimension (synthetic data / estimates)")
    p.add_argument("--k", type=int, default=3, help="clusters (k-means) or neighbours (k-NN)")
    p.add_argument("--t", type=int, default=10, help="iterations")
    p.add_argument("--l", type=int, default=16, help="fixed-point word length")
    p.add_argument("--s", type=int, default=2, help="classes (k-NN)")
    p.add_argument("--r", type=int, default=1, help="principal components")
    p.add_argument("--eta", type=float, default=0.01, help="SVM learning rate")
    p.add_argument("--t-pow", type=int, default=30)
    p.add_argument("--t-sqrt", type=int, default=20)
    p.add_argument("--t-sinv", type=int, default=20)
    p.add_argument("--hoist", action="store_true", help="k-means: cluster totals once per iteration")
    p.add_argument("--no-bias", action="store_true", help="SVM without the +1 bias term")
    p.add_argument("--workers", type=int, default=None,
                   help=f"modeled processors for the kernel build (default ${WORKERS_ENV} or unbounded)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kernelhe", description=__doc__.splitlines()[0])
    parser.add_argument("--profiles-file", help="extra cost profiles (key = value records)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one algorithm on a dataset")
    run.add_argument("algorithm")
    run.add_argument("--data", help="CSV dataset; synthetic uniform data when omitted")
    run.add_argument("--labels", action="store_true", help="last CSV column holds labels")
    run.add_argument("--variant", default="auto", choices=("general", "kernel", "auto"))
    run.add_argument("--backend", default="arith", choices=("arith", "bool", "plainref"))
    run.add_argument("--profile")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--i", type=int, default=0, help="first point index (distance/norm/similarity)")
    run.add_argument("--j", type=int, default=1, help="second point index")
    run.add_argument("--point", type=_floats, help="k-NN query point, comma-separated")
    run.add_argument("--output")
    _add_params(run)

    est = sub.add_parser("estimate", help="t_gen, t_ker and EFF from the cost model")
    est.add_argument("algorithm")
    est.add_argument("--profile", default="ckks")
    est.add_argument("--backend", default="arith", choices=("arith", "bool"))
    est.add_argument("--dims", type=_dims, help="dimension list 'a,b,c' or range 'lo:hi'")
    est.add_argument("--precomputed", action="store_true", help="leave the kernel build out of t_ker")
    est.add_argument("--output")
    _add_params(est)

    sw = sub.add_parser("sweep", help="CSV rows for a figure-style sweep")
    sw.add_argument("figure", help=", ".join(FIGURES))
    sw.add_argument("--profiles", help="comma-separated profile names")
    sw.add_argument("--n", type=int, help="override the number of points")
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--output")

    pr = sub.add_parser("profiles", help="print the built-in cost profiles")
    pr.add_argument("--output")
    return parser


def _config(args) -> ExperimentConfig:
    workers = args.workers if args.workers is not None else default_workers()
    return ExperimentConfig(
        algorithm=pz.canonical_algorithm(args.algorithm), variant=args.variant, backend=args.backend,
        n=args.n, d=args.d, k=args.k, t=args.t, l=args.l, s=args.s, r=args.r, eta=args.eta,
        budgets=IterationBudgets(args.t_pow, args.t_sqrt, args.t_sinv), profile=args.profile,
        seed=args.seed, output=args.output, i=args.i, j=args.j, point=args.point,
        hoist=args.hoist, bias=not args.no_bias, workers=workers)


def _params(args, n: int, d: int) -> cm.Params:
    workers = args.workers if args.workers is not None else default_workers()
    return cm.Params(n=n, d=d, k=args.k, t=args.t, l=args.l, s=args.s, r=args.r,
                     budgets=IterationBudgets(args.t_pow, args.t_sqrt, args.t_sinv),
                     bias=not args.no_bias, hoist=args.hoist, workers=workers)


def _dispatch(args) -> None:
    extra = cm.load_profiles(args.profiles_file) if args.profiles_file else None
    if args.command == "profiles":
        gates = cm.tfhe_gate_times()
        head = (f"# TFHE gate-unit time: {gates['from_mult']!r} s from mult, "
                f"{gates['from_add']!r} s from add\n")
        profiles = list(cm.builtin_profiles().values()) + list((extra or {}).values())
        _emit(head + cm.dumps_profiles(profiles), args.output)
        return
    if args.command == "run":
        cfg = _config(args)
        if args.data:
            data = ingest_dataset(args.data, labels=args.labels)
        else:
            data = synthetic_dataset(cfg.n, cfg.d, cfg.seed, _label_kind(cfg.algorithm), cfg.s)
        _emit(format_record(cmd_run(cfg, data, extra)), cfg.output)
        return
    if args.command == "estimate":
        profile = _profile(args.profile, extra)
        dims = args.dims or [args.d]
        rows = cmd_estimate(args.algorithm, [_params(args, args.n, d) for d in dims], profile, args.backend,
                            not args.precomputed)
        _emit(_csv(rows, ESTIMATE_COLUMNS), args.output)
        return
    if args.command == "sweep":
        names = args.profiles.split(",") if args.profiles else (
            ["plain", "tfhe", "ckks", "bfv"] if args.figure in ("fig4a", "fig4b") else ["ckks", "tfhe"])
        profiles = [_profile(n, extra) for n in names]
        _emit(_csv(cmd_sweep(args.figure, profiles, args.n, args.jobs), SWEEP_COLUMNS), args.output)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        _dispatch(args)
    except (ValidationError, pz.UnsupportedAlgorithmError, ValueError, KeyError, OSError) as exc:
        # invalid data, parameters or paths
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

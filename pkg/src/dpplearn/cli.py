"""Command-line entry point: ``dpplearn {generate,train,eval,bench}``.

Exit codes: 0 on success or convergence, 1 on hard failure (including bad
arguments), 2 when a fit stops at the iteration cap.
"""

import argparse
import csv
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, formats, matcore
from ._rng import RNG_ALGORITHM, STREAM_DATA, STREAM_TRUTH, generator, substream
from .bench import SUMMARY_COLUMNS, run_grid, scaling_fit
from .errors import DimensionMismatch, DPPError, SingularSubmatrix
from .learn import CONVERGED, FAILED, FitConfig, kernel_from_marginal, picard_fit, projected_gradient_fit
from .model import evaluate, marginal_kernel
from .sampling import sample_exact, sample_spectral
from .synthgen import DISTRIBUTIONS, KernelDistribution, generate, generate_init

log = logging.getLogger("dpplearn")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_MAX_ITER = 2

#: Ground sets up to this size are sampled by exact enumeration.
EXACT_SAMPLER_MAX_N = 10


@dataclass
class ExperimentSpec:
    n_items: int = None
    n_samples: int = None
    dist: str = "basic"
    a: float = 1.0
    eps: float = 1e-7
    max_iter: int = 500
    seed: int = 0
    solver: str = "picard"
    safeguard: bool = True
    drop_empty: bool = False
    kernel_in: str = None
    kernel_out: str = None
    data_in: str = None
    data_out: str = None
    trace_out: str = None

    @classmethod
    def from_args(cls, args):
        fields = cls.__dataclass_fields__
        spec = cls(**{k: v for k, v in vars(args).items() if k in fields})
        spec.safeguard = not getattr(args, "no_safeguard", False)
        return spec


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FAILED, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _list_of(conv):
    def parse(text):
        return [conv(t) for t in text.split(",") if t.strip()]

    return parse


def _load_data(spec):
    data, meta = formats.read_subsets(spec.data_in, drop_empty=spec.drop_empty)
    if spec.n_items is not None and spec.n_items != data.ground_size:
        raise DimensionMismatch(
            f"--n-items {spec.n_items} does not match N={data.ground_size} in {spec.data_in}"
        )
    return data, meta


def _load_kernel(path, N=None):
    L = formats.read_kernel(path)
    if N is not None and L.shape[0] != N:
        raise DimensionMismatch(f"kernel in {path} has N={L.shape[0]}, expected {N}")
    return L


def cmd_generate(spec):
    if spec.kernel_in:
        truth = _load_kernel(spec.kernel_in, spec.n_items)
        matcore.cholesky(truth)
        source = f"file:{Path(spec.kernel_in).name}"
    else:
        truth = generate(
            KernelDistribution(spec.dist, spec.n_items), generator(substream(spec.seed, STREAM_TRUTH))
        )
        source = spec.dist
    N = truth.shape[0]
    sampler = "exact" if N <= EXACT_SAMPLER_MAX_N else "spectral"
    draw = sample_exact if sampler == "exact" else sample_spectral
    data = draw(truth, spec.n_samples, substream(spec.seed, STREAM_DATA))
    if spec.drop_empty:
        data = data.without_empty()
    formats.write_kernel(spec.kernel_out, truth)
    meta = {
        "kernel": source,
        "seed": spec.seed,
        "sampler": sampler,
        "n": data.n,
        "rng": RNG_ALGORITHM,
        "version": __version__,
    }
    formats.write_subsets(spec.data_out, data, meta)
    log.info("wrote %d subsets over N=%d to %s", data.n, N, spec.data_out)
    return EXIT_OK


def cmd_train(spec):
    data, _ = _load_data(spec)
    N = data.ground_size
    if spec.kernel_in:
        init = _load_kernel(spec.kernel_in, N)
    else:
        init = generate_init(KernelDistribution(spec.dist, N), spec.seed)
    cfg = FitConfig(step_a=spec.a, epsilon=spec.eps, max_iter=spec.max_iter,
                    safeguard=spec.safeguard, seed=spec.seed)
    start = time.perf_counter()
    if spec.solver == "pga":
        K, trace = projected_gradient_fit(marginal_kernel(init), data, cfg)
        learned = kernel_from_marginal(K)
    else:
        learned, trace = picard_fit(init, data, cfg)
    wall = time.perf_counter() - start
    if spec.kernel_out:
        formats.write_kernel(spec.kernel_out, learned)
    if spec.trace_out:
        formats.write_trace(
            spec.trace_out, trace, asdict(spec), __version__, wall,
            extra={"reference": "time-to-99% is relative to this run's final log-likelihood"},
        )
    log.info("%s after %d iterations, loglik %.6g", trace.status, trace.iterations, trace.final_loglik)
    if trace.status == FAILED:
        print(f"fit failed: {trace.reason}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK if trace.status == CONVERGED else EXIT_MAX_ITER


def cmd_eval(spec):
    data, _ = _load_data(spec)
    L = _load_kernel(spec.kernel_in, data.ground_size)
    try:
        ev = evaluate(L, data)
    except SingularSubmatrix as exc:
        line = data.lines[exc.index] if data.lines else exc.index + 1
        print(f"{spec.data_in}:{line}: kernel restricted to this subset is singular", file=sys.stderr)
        return EXIT_FAILED
    report = {
        "N": data.ground_size,
        "n": data.n,
        "loglik": ev.loglik,
        "normalized_loglik": ev.normalized_loglik,
        "stationarity_residual": float(np.linalg.norm(ev.delta) / np.linalg.norm(ev.ipl_inv)),
    }
    print(json.dumps(report))
    return EXIT_OK


def cmd_bench(args):
    seeds = [args.seed + r for r in range(args.repetitions)]
    rows = run_grid(args.n_items, args.n_samples, args.a, args.dist, seeds,
                    epsilon=args.eps, max_iter=args.max_iter, solver=args.solver,
                    reference=args.reference_loglik, jobs=args.jobs)
    out = Path(args.out)
    with out.open("w", newline="", encoding="ascii") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: (formats.fmt(v) if isinstance(v, float) else v) for k, v in row.items()})
    fit = scaling_fit(rows)
    fit["model"] = "seconds_per_iter ~ intercept + slope * (n * kappa**3 + N**3)"
    fit["reference"] = (
        "run's own final log-likelihood" if args.reference_loglik is None
        else f"user-supplied {args.reference_loglik}"
    )
    Path(str(out) + ".scaling.json").write_text(json.dumps(fit, indent=2) + "\n")
    failed = sum(r["status"] == "error" for r in rows)
    log.info("%d cells, %d failed; slope %.3g s/op", len(rows), failed, fit["slope"])
    return EXIT_OK


def build_parser():
    p = _Parser(prog="dpplearn", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common_fit(sp):
        sp.add_argument("--a", type=_positive_float, default=1.0, help="Picard step size")
        sp.add_argument("--eps", type=_positive_float, default=1e-7, help="relative-change tolerance")
        sp.add_argument("--max-iter", type=_positive_int, default=500)
        sp.add_argument("--solver", choices=("picard", "pga"), default="picard")

    g = sub.add_parser("generate", help="draw a true kernel and sample subsets from it")
    g.add_argument("--n-items", type=_positive_int)
    g.add_argument("--n-samples", type=_positive_int, required=True)
    g.add_argument("--dist", choices=DISTRIBUTIONS, default="basic")
    g.add_argument("--seed", type=_seed, default=0)
    g.add_argument("--kernel-in", help="use this kernel instead of drawing one")
    g.add_argument("--kernel-out", required=True)
    g.add_argument("--data-out", required=True)
    g.add_argument("--drop-empty", action="store_true")

    t = sub.add_parser("train", help="learn a kernel from a subsets file")
    t.add_argument("--data-in", required=True)
    t.add_argument("--n-items", type=_positive_int)
    t.add_argument("--kernel-in", help="initial kernel; drawn from --dist otherwise")
    t.add_argument("--dist", choices=DISTRIBUTIONS, default="basic")
    t.add_argument("--seed", type=_seed, default=0)
    t.add_argument("--kernel-out")
    t.add_argument("--trace-out")
    t.add_argument("--no-safeguard", action="store_true")
    t.add_argument("--drop-empty", action="store_true")
    common_fit(t)

    e = sub.add_parser("eval", help="log-likelihood of a kernel on a subsets file")
    e.add_argument("--kernel-in", required=True)
    e.add_argument("--data-in", required=True)
    e.add_argument("--n-items", type=_positive_int)
    e.add_argument("--drop-empty", action="store_true")

    b = sub.add_parser("bench", help="sweep a grid of synthetic problems")
    b.add_argument("--n-items", type=_list_of(_positive_int), required=True)
    b.add_argument("--n-samples", type=_list_of(_positive_int), required=True)
    b.add_argument("--a", type=_list_of(_positive_float), default=[1.0])
    b.add_argument("--dist", type=_list_of(str), default=["basic"])
    b.add_argument("--repetitions", type=_positive_int, default=1)
    b.add_argument("--seed", type=_seed, default=0)
    b.add_argument("--eps", type=_positive_float, default=1e-7)
    b.add_argument("--max-iter", type=_positive_int, default=500)
    b.add_argument("--solver", choices=("picard", "pga"), default="picard")
    b.add_argument("--reference-loglik", type=float)
    b.add_argument("--jobs", type=_positive_int, default=1)
    b.add_argument("--out", required=True)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "generate" and args.kernel_in is None and args.n_items is None:
        parser.error("generate needs --n-items or --kernel-in")
    if args.command == "bench":
        bad = [d for d in args.dist if d not in DISTRIBUTIONS]
        if bad:
            parser.error(f"unknown distribution(s) {bad}")
        return cmd_bench(args)
    spec = ExperimentSpec.from_args(args)
    handler = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval}[args.command]
    try:
        return handler(spec)
    except (DPPError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())

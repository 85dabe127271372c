"""Benchmark sweeps over synthetic problems.

One grid cell draws a true kernel, samples ``n`` subsets from it, draws an
initial kernel from the same distribution and fits it. All three draws come
from separate sub-streams of the cell seed.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from itertools import product

import numpy as np

from ._rng import STREAM_DATA, STREAM_TRUTH, generator, substream
from .learn import FitConfig, picard_fit, projected_gradient_fit
from .model import marginal_kernel
from .sampling import sample_spectral
from .synthgen import KernelDistribution, generate, generate_init

SUMMARY_COLUMNS = [
    "N", "n", "a", "dist", "seed", "final_loglik", "time_to_99", "iters",
    "seconds_per_iter", "kappa", "cost", "status", "error",
]


def time_to_fraction(trace, reference=None, fraction=0.01):
    """Wall-clock time until the log-likelihood first gets within ``fraction``.

    The target is ``reference - fraction * |reference|``, with ``reference``
    defaulting to the trace's own final log-likelihood. The starting point
    counts as time 0. Returns ``inf`` if the target is never reached.
    """
    ref = trace.final_loglik if reference is None else reference
    target = ref - fraction * abs(ref)
    if trace.initial_loglik >= target:
        return 0.0
    for r in trace.records:
        if r.loglik >= target:
            return r.time_s
    return math.inf


def make_problem(N, n, dist, seed):
    """Return ``(truth, data, init)`` for one synthetic cell."""
    kd = KernelDistribution(dist, N)
    truth = generate(kd, generator(substream(seed, STREAM_TRUTH)))
    data = sample_spectral(truth, n, substream(seed, STREAM_DATA))
    return truth, data, generate_init(kd, seed)


def run_cell(N, n, a, dist, seed, epsilon=1e-7, max_iter=500, solver="picard", reference=None):
    """Fit one grid cell; failures are caught and reported in the row."""
    row = dict(N=N, n=n, a=a, dist=dist, seed=seed, final_loglik=math.nan,
               time_to_99=math.nan, iters=0, seconds_per_iter=math.nan,
               kappa=0, cost=math.nan, status="error", error="")
    try:
        _, data, init = make_problem(N, n, dist, seed)
        kappa = data.kappa()
        row.update(kappa=kappa, cost=float(n * kappa**3 + N**3))
        cfg = FitConfig(step_a=a, epsilon=epsilon, max_iter=max_iter, seed=seed)
        if solver == "pga":
            _, trace = projected_gradient_fit(marginal_kernel(init), data, cfg)
        else:
            _, trace = picard_fit(init, data, cfg)
        iters = trace.iterations
        row.update(
            final_loglik=trace.final_loglik,
            time_to_99=time_to_fraction(trace, reference),
            iters=iters,
            seconds_per_iter=trace.records[-1].time_s / iters if iters else math.nan,
            status=trace.status,
            error=trace.reason,
        )
    except Exception as exc:  # noqa: BLE001 - a bad cell must not stop the sweep
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _run_cell_args(args):
    return run_cell(*args)


def run_grid(Ns, ns, As, dists, seeds, epsilon=1e-7, max_iter=500, solver="picard",
             reference=None, jobs=1):
    """Run every ``(N, n, a, dist, seed)`` combination; rows in grid order."""
    cells = [
        (N, n, a, d, s, epsilon, max_iter, solver, reference)
        for N, n, a, d, s in product(Ns, ns, As, dists, seeds)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_cell_args, cells))
    return [_run_cell_args(c) for c in cells]


def scaling_fit(rows):
    """Least-squares fit ``seconds_per_iter ~ intercept + slope * (n kappa^3 + N^3)``.

    ``ratios`` are measured over fitted seconds per cell.
    """
    pts = [(r["cost"], r["seconds_per_iter"]) for r in rows
           if np.isfinite(r["cost"]) and np.isfinite(r["seconds_per_iter"])]
    if len(pts) < 2:
        return {"slope": math.nan, "intercept": math.nan, "ratios": [], "cells": len(pts)}
    x, y = np.array(pts).T
    A = np.column_stack([np.ones_like(x), x])
    (intercept, slope), *_ = np.linalg.lstsq(A, y, rcond=None)
    fitted = intercept + slope * x
    ratios = [float(v) if f > 0 else math.inf for v, f in zip(y / np.where(fitted > 0, fitted, 1), fitted)]
    return {"slope": float(slope), "intercept": float(intercept), "ratios": ratios, "cells": len(pts)}

"""Plain-text file formats for kernels, subsets and fit traces.

Kernel file::

    dpp-kernel v1 N=3
    <3 values>
    <3 values>
    <3 values>

Values are written with 17 significant digits, which round-trips float64
exactly.

Subsets file: ``#`` lines are comments (``# key=value`` comments carry
metadata), the first other line is ``N=<int>``, then one subset per line as
whitespace-separated 1-based item numbers. A blank line is the empty subset.

Trace file: CSV with the columns in ``TRACE_HEADER`` plus a JSON sidecar at
``<path>.json``.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .model import ObservationData

KERNEL_MAGIC = "dpp-kernel v1"
TRACE_HEADER = ["iter", "time_s", "loglik", "normalized_loglik", "step_a", "safeguard_halvings"]
MONOTONE_RTOL = 1e-9


def fmt(x):
    """Locale-independent shortest-exact float repr with 17 significant digits."""
    return format(float(x), ".17g")


def write_kernel(path, L):
    L = np.asarray(L, dtype=np.float64)
    N = L.shape[0]
    lines = [f"{KERNEL_MAGIC} N={N}"]
    lines += [" ".join(fmt(x) for x in row) for row in L]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_kernel(path):
    text = Path(path).read_text(encoding="ascii")
    lines = text.splitlines()
    if not lines or not lines[0].startswith(KERNEL_MAGIC + " N="):
        raise ParseError(1, f"expected header '{KERNEL_MAGIC} N=<int>'", path=path)
    try:
        N = int(lines[0][len(KERNEL_MAGIC) + 3 :])
    except ValueError:
        raise ParseError(1, "bad dimension in header", path=path) from None
    if N < 1:
        raise ParseError(1, "dimension must be >= 1", path=path)
    if len(lines) != N + 1:
        raise ParseError(len(lines), f"expected {N} matrix rows, found {len(lines) - 1}", path=path)
    L = np.empty((N, N))
    for i, line in enumerate(lines[1:]):
        parts = line.split()
        if len(parts) != N:
            raise ParseError(i + 2, f"expected {N} values, found {len(parts)}", path=path)
        try:
            L[i] = [float(p) for p in parts]
        except ValueError:
            raise ParseError(i + 2, "non-numeric value", path=path) from None
    if not np.all(np.isfinite(L)):
        raise ParseError(1, "kernel contains non-finite values", path=path)
    return L


def write_subsets(path, data, meta=None):
    lines = [f"# {k}={v}" for k, v in (meta or {}).items()]
    lines.append(f"N={data.ground_size}")
    lines += [" ".join(str(i + 1) for i in y) for y in data.subsets]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_subsets(path, drop_empty=False):
    """Parse a subsets file.

    Returns ``(data, meta)`` where ``data.lines`` holds the 1-based file line
    of each subset and ``meta`` the ``# key=value`` comments.
    """
    text = Path(path).read_text(encoding="ascii")
    raw = text.split("\n")
    if text.endswith("\n"):
        raw.pop()
    meta = {}
    N = None
    subsets, where = [], []
    for lineno, line in enumerate(raw, start=1):
        line = line.rstrip("\r")
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        if N is None:
            if not line.startswith("N="):
                raise ParseError(lineno, "expected 'N=<int>' header", path=path)
            try:
                N = int(line[2:])
            except ValueError:
                raise ParseError(lineno, "bad ground-set size", path=path) from None
            if N < 1:
                raise ParseError(lineno, "ground-set size must be >= 1", path=path)
            continue
        try:
            items = [int(tok) for tok in line.split()]
        except ValueError:
            raise ParseError(lineno, "non-integer item", path=path) from None
        if any(i < 1 or i > N for i in items):
            raise ParseError(lineno, f"item out of range 1..{N}", path=path)
        if len(set(items)) != len(items):
            raise ParseError(lineno, "duplicate item in subset", path=path)
        if drop_empty and not items:
            continue
        subsets.append([i - 1 for i in items])
        where.append(lineno)
    if N is None:
        raise ParseError(max(len(raw), 1), "missing 'N=<int>' header", path=path)
    if not subsets:
        raise ParseError(max(len(raw), 1), "no subsets in file", path=path)
    return ObservationData.from_lists(N, subsets, lines=where), meta


def write_trace(path, trace, spec, version, wall_s, extra=None):
    path = Path(path)
    with path.open("w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for r in trace.records:
            w.writerow(
                [r.iter, f"{r.time_s:.6f}", fmt(r.loglik), fmt(r.normalized_loglik),
                 fmt(r.step_a), r.safeguard_halvings]
            )
    sidecar = {
        "spec": spec,
        "status": trace.status,
        "final_loglik": trace.final_loglik,
        "wall_s": wall_s,
        "version": version,
        "initial_loglik": trace.initial_loglik,
        "reason": trace.reason,
        "diagnostics": trace.diagnostics,
    }
    if extra:
        sidecar.update(extra)
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


class TraceValidationError(ParseError):
    pass


def read_trace(path):
    """Load trace rows and check ordering, clock and ascent invariants.

    Log-likelihood may only drop (beyond a 1e-9 relative slack) on rows whose
    step exceeds 1.
    """
    with Path(path).open(newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != TRACE_HEADER:
        raise TraceValidationError(1, "trace header mismatch", path=path)
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            rec = {
                "iter": int(row[0]),
                "time_s": float(row[1]),
                "loglik": float(row[2]),
                "normalized_loglik": float(row[3]),
                "step_a": float(row[4]),
                "safeguard_halvings": int(row[5]),
            }
        except (ValueError, IndexError):
            raise TraceValidationError(lineno, "malformed trace row", path=path) from None
        if out:
            prev = out[-1]
            if rec["iter"] != prev["iter"] + 1:
                raise TraceValidationError(lineno, "rows out of iteration order", path=path)
            if rec["time_s"] < prev["time_s"]:
                raise TraceValidationError(lineno, "wall clock went backwards", path=path)
            slack = MONOTONE_RTOL * abs(prev["loglik"])
            if rec["step_a"] <= 1.0 and rec["loglik"] < prev["loglik"] - slack:
                raise TraceValidationError(lineno, "log-likelihood decreased at step <= 1", path=path)
        out.append(rec)
    return out


def read_sidecar(path):
    return json.loads(Path(str(path) + ".json").read_text())

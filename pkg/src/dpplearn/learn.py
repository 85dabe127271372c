"""Maximum-likelihood kernel learning.

The main solver is the Picard fixed-point iteration

    L <- L + a * L @ Delta @ L,
    Delta = (1/n) sum_i U_i L_{Y_i}^{-1} U_i^T - (I + L)^{-1},

which keeps ``L`` positive definite and increases the log-likelihood for
``a = 1``. Larger steps are often faster; :func:`step_size_bound` gives a
step ceiling that provably keeps the update PD, and :func:`picard_fit` can
fall back by halving the step (never below 1) when an update leaves the cone.

:func:`projected_gradient_fit` is a plain baseline working on the marginal
kernel ``K`` with eigenvalue clipping.
"""

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import matcore
from .errors import NotPositiveDefinite, SingularIterate, SingularSubmatrix
from .model import ObservationData, evaluate

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
FAILED = "failed"

PROJECTION_CLIP = 1e-6
MAX_BACKTRACKS = 50
_PGA_CHUNK = 256


class LikelihoodDecreaseWarning(UserWarning):
    """A step larger than 1 lowered the log-likelihood."""


@dataclass(frozen=True)
class FitConfig:
    step_a: float = 1.0
    epsilon: float = 1e-7
    max_iter: int = 500
    safeguard: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.step_a > 0:
            raise ValueError("step_a must be > 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    time_s: float
    loglik: float
    normalized_loglik: float
    step_a: float
    safeguard_halvings: int


@dataclass
class IterationTrace:
    """Per-iteration history of a fit plus its terminal status.

    ``records`` holds one entry per accepted update (iterations start at 1);
    the starting point is summarized by ``initial_loglik``.
    """

    n: int
    initial_loglik: float
    records: list = field(default_factory=list)
    status: str = MAX_ITERATIONS
    reason: str = ""
    decreases: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return len(self.records)

    @property
    def final_loglik(self):
        return self.records[-1].loglik if self.records else self.initial_loglik

    @property
    def logliks(self):
        return np.array([r.loglik for r in self.records])

    @property
    def times(self):
        return np.array([r.time_s for r in self.records])

    @property
    def total_halvings(self):
        return sum(r.safeguard_halvings for r in self.records)


@dataclass(frozen=True)
class StepSizeBound:
    gamma: float
    a_max: float


def _relative_change(new, old):
    if old == 0.0:
        return abs(new - old)
    return abs(new - old) / abs(old)


def compute_delta(L, data):
    """``Delta = Z / n - (I + L)^{-1}``; zero exactly at stationary points."""
    return evaluate(L, data).delta


def _update(L, delta, a):
    L = matcore.symmetrize(L)
    L_new = matcore.symmetrize(L + a * (L @ delta @ L))
    matcore.cholesky(L_new)
    return L_new


def fixed_point_map(L, data, a=1.0):
    """One Picard step ``L + a L Delta L``.

    Raises
    ------
    NotPositiveDefinite
        If the result fails Cholesky, which can only happen for ``a > 1``
        (up to rounding).
    """
    if not a > 0:
        raise ValueError("a must be > 0")
    return _update(L, compute_delta(L, data), a)


def step_size_bound(L, data):
    """Step ceiling ``a_max = 1 / (1 - gamma)`` keeping the Picard update PD.

    ``gamma = max(lambda_min(L Z), 1 / lambda_max(I + L))`` with
    ``Z = (1/n) sum_i U_i L_{Y_i}^{-1} U_i^T``. ``L Z`` is not symmetric, so
    its spectrum is read off the similar matrix ``R Z R^T`` where
    ``L = R^T R``.
    """
    L = matcore.symmetrize(L)
    ev = evaluate(L, data)
    r = matcore.cholesky(L).lower.T
    lam_lz, _ = matcore.extreme_eigs(r @ (ev.z / ev.n) @ r.T)
    _, lam_max = matcore.extreme_eigs(np.eye(L.shape[0]) + L)
    gamma = min(max(lam_lz, 1.0 / lam_max, 0.0), 1.0)
    a_max = math.inf if gamma >= 1.0 else 1.0 / (1.0 - gamma)
    return StepSizeBound(gamma, a_max)


def stationarity_residual(L, data):
    """``||Delta||_F / ||(I + L)^{-1}||_F``."""
    ev = evaluate(L, data)
    return float(np.linalg.norm(ev.delta) / np.linalg.norm(ev.ipl_inv))


def picard_fit(init, data, cfg=None, callback=None):
    """Run the Picard iteration from ``init``.

    Stops when the relative change of the log-likelihood is at most
    ``cfg.epsilon``, after ``cfg.max_iter`` updates, or on failure. With
    ``cfg.safeguard`` an update that leaves the PD cone halves the step
    (floored at 1) and the reduced step is kept for later iterations.

    ``callback(it, L)``, if given, sees every accepted iterate; its run time
    is excluded from the recorded wall clock.

    Returns
    -------
    (numpy.ndarray, IterationTrace)
        The last feasible kernel and the trace. Failures are reported through
        ``trace.status == "failed"`` rather than raised, so the partial trace
        is never lost.
    """
    cfg = cfg or FitConfig()
    start = time.perf_counter()
    L = matcore.symmetrize(init)
    matcore.cholesky(L)
    ev = evaluate(L, data)
    trace = IterationTrace(n=data.n, initial_loglik=ev.loglik)
    a = float(cfg.step_a)

    for it in range(1, cfg.max_iter + 1):
        delta = ev.delta
        halvings = 0
        while True:
            try:
                L_new = _update(L, delta, a)
                ev_new = evaluate(L_new, data)
                break
            except (NotPositiveDefinite, SingularSubmatrix) as exc:
                if cfg.safeguard and a > 1.0:
                    a = max(a / 2.0, 1.0)
                    halvings += 1
                    continue
                trace.status = FAILED
                trace.reason = f"{type(exc).__name__}: {exc}"
                return L, trace

        trace.records.append(
            IterationRecord(
                it,
                time.perf_counter() - start,
                ev_new.loglik,
                ev_new.normalized_loglik,
                a,
                halvings,
            )
        )
        if callback is not None:
            paused = time.perf_counter()
            callback(it, L_new)
            start += time.perf_counter() - paused
        if ev_new.loglik < ev.loglik and a > 1.0:
            trace.decreases += 1
            warnings.warn(
                f"iteration {it}: log-likelihood decreased with step a={a:g}",
                LikelihoodDecreaseWarning,
                stacklevel=2,
            )
        change = _relative_change(ev_new.loglik, ev.loglik)
        L, ev = L_new, ev_new
        if change <= cfg.epsilon:
            trace.status = CONVERGED
            break
    else:
        trace.status = MAX_ITERATIONS

    trace.diagnostics["stationarity_residual"] = float(
        np.linalg.norm(ev.delta) / np.linalg.norm(ev.ipl_inv)
    )
    return L, trace


# -- projected-gradient baseline on the marginal kernel ----------------------


def project_marginal(K, clip_lo=PROJECTION_CLIP):
    """Clip the spectrum of ``K`` to ``[clip_lo, 1 - clip_lo]``."""
    K = matcore.symmetrize(K)
    w, v = np.linalg.eigh(K)
    w = np.clip(w, clip_lo, 1.0 - clip_lo)
    return matcore.symmetrize((v * w) @ v.T)


def kernel_from_marginal(K):
    """Inverse of :func:`~dpplearn.model.marginal_kernel`: ``(I - K)^{-1} - I``."""
    K = matcore.symmetrize(K)
    eye = np.eye(K.shape[0])
    return matcore.symmetrize(matcore.inverse(matcore.cholesky(eye - K)) - eye)


def offdiag_mass_fraction(m):
    """Share of the squared Frobenius norm carried by off-diagonal entries."""
    m = np.asarray(m, dtype=np.float64)
    total = float(np.sum(m * m))
    if total == 0.0:
        return 0.0
    return (total - float(np.sum(np.diag(m) ** 2))) / total


def _unique_subsets(data):
    counts = {}
    for y in data.subsets:
        key = tuple(y.tolist())
        counts[key] = counts.get(key, 0) + 1
    return list(counts.keys()), np.array(list(counts.values()), dtype=np.float64)


class _MarginalObjective:
    """``sum_i log|det(K - I_{Y_i^c})|`` and its gradient, over distinct subsets."""

    def __init__(self, data):
        self.n = data.n
        self.N = data.ground_size
        keys, self.counts = _unique_subsets(data)
        self.comp = np.ones((len(keys), self.N))
        for j, key in enumerate(keys):
            self.comp[j, list(key)] = 0.0

    def __call__(self, K, with_grad=True):
        total = 0.0
        grad = np.zeros((self.N, self.N)) if with_grad else None
        diag = np.arange(self.N)
        for s in range(0, len(self.counts), _PGA_CHUNK):
            comp = self.comp[s : s + _PGA_CHUNK]
            cnt = self.counts[s : s + _PGA_CHUNK]
            a = np.repeat(K[None], comp.shape[0], axis=0)
            a[:, diag, diag] -= comp
            sign, logabs = np.linalg.slogdet(a)
            if np.any(sign == 0) or not np.all(np.isfinite(logabs)):
                raise SingularIterate("K - I_{Y^c} is numerically singular")
            total += float(cnt @ logabs)
            if with_grad:
                grad += np.einsum("i,ijk->jk", cnt, np.linalg.inv(a))
        if with_grad:
            grad = matcore.symmetrize(grad / self.n)
        return total, grad


def projected_gradient_fit(init, data, cfg=None, callback=None):
    """Projected gradient ascent on the marginal-kernel log-likelihood.

    Each iteration takes the gradient ``(1/n) sum_i (K - I_{Y_i^c})^{-1}``,
    then searches ``t = cfg.step_a, cfg.step_a / 2, ...`` for the first
    projected point that does not lower the objective. The reported
    log-likelihood equals the L-ensemble one for ``L = K (I - K)^{-1}``.
    ``callback(it, K)`` works as in :func:`picard_fit`.
    """
    cfg = cfg or FitConfig()
    start = time.perf_counter()
    objective = _MarginalObjective(data)
    K = project_marginal(init)
    f, g = objective(K)
    trace = IterationTrace(n=data.n, initial_loglik=f)

    for it in range(1, cfg.max_iter + 1):
        t = float(cfg.step_a)
        accepted = None
        for halvings in range(MAX_BACKTRACKS + 1):
            K_try = project_marginal(K + t * g)
            try:
                f_try, _ = objective(K_try, with_grad=False)
            except SingularIterate:
                f_try = -math.inf
            if f_try >= f:
                accepted = K_try
                break
            t /= 2.0
        if accepted is None:
            trace.status = CONVERGED
            trace.reason = "no ascent step found"
            break
        f_new, g = objective(accepted)
        trace.records.append(
            IterationRecord(it, time.perf_counter() - start, f_new, f_new / data.n, t, halvings)
        )
        if callback is not None:
            paused = time.perf_counter()
            callback(it, accepted)
            start += time.perf_counter() - paused
        change = _relative_change(f_new, f)
        K, f = accepted, f_new
        if change <= cfg.epsilon:
            trace.status = CONVERGED
            break
    else:
        trace.status = MAX_ITERATIONS

    trace.diagnostics["offdiag_mass_fraction"] = offdiag_mass_fraction(K)
    return K, trace

"""Bootstrap, robust sandwich and matching variances."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import CausalChainError, DimensionMismatch, InsufficientMatches, TooManyFailedReplicates
from .estimands import AnalysisFrame

MAX_FAILED_SHARE = 0.05


@dataclass(frozen=True)
class BootstrapPlan:
    B: int = 1000
    base_seed: int = 20240101
    workers: int | None = None

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be positive")

    def indices(self, b: int, n: int) -> np.ndarray:
        """Row indices of replicate ``b``; depends only on (base_seed, b, n)."""
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.base_seed, b])))
        return rng.integers(0, n, size=n)


@dataclass
class BootstrapResult:
    se: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    failed: np.ndarray
    replicates: np.ndarray  # (B, k), NaN where a replicate failed

    def component(self, j: int):
        return float(self.se[j]), (float(self.ci_low[j]), float(self.ci_high[j])), int(self.failed[j])


def resample_frame(frame: AnalysisFrame, idx) -> AnalysisFrame:
    """The frame restricted to rows ``idx`` (with repetition)."""
    return replace(
        frame,
        y=frame.y[idx], a=frame.a[idx], L=frame.L[idx],
        z=None if frame.z is None else frame.z[idx],
        data=None if frame.data is None else frame.data.iloc[idx].reset_index(drop=True),
        mask=None,
    )


def _workers(plan):
    if plan.workers is not None:
        return plan.workers
    return int(os.environ.get("CAUSALCHAIN_THREADS", "1"))


def bootstrap(closure, n: int, plan: BootstrapPlan) -> BootstrapResult:
    """Run ``closure(idx)`` for every replicate and summarise each output component.

    The closure may return a scalar or a vector.  A replicate raising a package
    error fails every component; a non-finite component fails only that one.
    """

    def run(b):
        try:
            out = np.atleast_1d(np.asarray(closure(plan.indices(b, n)), dtype=float))
        except (CausalChainError, np.linalg.LinAlgError):
            return None
        return out

    workers = _workers(plan)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            outs = list(pool.map(run, range(plan.B)))
    else:
        outs = [run(b) for b in range(plan.B)]
    k = max((len(o) for o in outs if o is not None), default=1)
    reps = np.full((plan.B, k), np.nan)
    for b, o in enumerate(outs):
        if o is not None:
            reps[b] = o
    se, lo, hi, failed = (np.empty(k) for _ in range(4))
    for j in range(k):
        col = np.sort(reps[np.isfinite(reps[:, j]), j])
        failed[j] = plan.B - col.size
        if failed[j] > MAX_FAILED_SHARE * plan.B:
            raise TooManyFailedReplicates(f"{int(failed[j])} of {plan.B} replicates failed")
        se[j] = col.std(ddof=1) if col.size > 1 else math.nan
        lo[j], hi[j] = np.quantile(col, [0.025, 0.975])
    return BootstrapResult(se, lo, hi, failed.astype(int), reps)


def bootstrap_se(estimator, frame: AnalysisFrame, plan: BootstrapPlan = BootstrapPlan()):
    """(se, percentile CI) of ``estimator(resampled frame)``, which must rerun its
    whole pipeline (PS refit, strata re-cut, ...) on the resample."""
    res = bootstrap(lambda idx: estimator(resample_frame(frame, idx)), frame.n, plan)
    se, ci, _ = res.component(0)
    return se, ci


def sandwich_se_weighted(frame: AnalysisFrame, weights) -> float:
    """HC0 standard error of the A coefficient in the weighted regression of Y on (1, A)."""
    w = np.asarray(weights, dtype=float)
    y, a = frame.y, frame.a
    if w.shape != y.shape:
        raise DimensionMismatch(f"{w.size} weights for {y.size} rows")
    if not np.any(w > 0):
        raise ValueError("all weights are zero")
    X = np.column_stack([np.ones_like(a), a])
    XtWX = (X * w[:, None]).T @ X
    beta = np.linalg.solve(XtWX, (X * w[:, None]).T @ y)
    r = y - X @ beta
    bread = np.linalg.inv(XtWX)
    meat = (X * (w * r)[:, None]).T @ (X * (w * r)[:, None])
    V = bread @ meat @ bread
    return float(np.sqrt(V[1, 1]))


def _same_arm_sigma2(y, a, e) -> float:
    """Pooled conditional variance from each unit's nearest same-arm neighbour on the PS."""
    terms = []
    for arm in (0, 1):
        idx = np.flatnonzero(a == arm)
        if idx.size < 2:
            raise InsufficientMatches(f"arm {arm} has fewer than two units")
        order = idx[np.lexsort((idx, e[idx]))]
        s, yy = e[order], y[order]
        # neighbour is the closer of the two adjacent units in score order
        left = np.r_[np.inf, np.diff(s)]
        right = np.r_[np.diff(s), np.inf]
        nb = np.where(left <= right, np.arange(len(s)) - 1, np.arange(len(s)) + 1)
        terms.append(0.5 * (yy - yy[nb]) ** 2)
    return float(np.mean(np.concatenate(terms)))


def matching_se(result) -> float:
    """Homoscedastic Abadie-Imbens standard error of a matching estimate.

    ``reuse[i]`` counts how often unit ``i`` serves as a match, each use weighted by
    one over the size of the match set it belongs to.
    """
    used = result.matched_units
    if used.size == 0:
        raise InsufficientMatches("empty match map")
    y, a = result.y, result.a
    sigma2 = _same_arm_sigma2(y, a, result.scores)
    sizes = np.array([len(result.matches[i]) for i in used], dtype=float)
    imputed = np.array([y[result.matches[i]].mean() for i in used])
    sign = 2.0 * a[used] - 1.0
    unit_effect = sign * (y[used] - imputed)
    spread = np.sum((unit_effect - result.estimate) ** 2)
    # the estimate is sum_i coef_i * Y_i / N with coef_i = 1[i matched] + reuse_i
    coef = result.reuse.copy()
    coef[used] += 1.0
    N = used.size
    extra = np.sum(coef ** 2) - np.sum(1.0 + 1.0 / sizes)
    var = (spread + sigma2 * extra) / N ** 2
    return float(np.sqrt(max(var, 0.0)))

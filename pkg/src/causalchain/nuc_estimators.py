"""Estimators that rely on no unmeasured confounding given the adjustment set.

Every estimator takes a resolved :class:`AnalysisFrame` and returns an
:class:`EstimateReport`.  Standard errors that need the bootstrap are left as NaN
here; :mod:`causalchain.battery` attaches them.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (EmptyArmInStratum, ExtremeWeightsWarning, NoTreatedUnits, RankDeficient,
                     UnmatchedUnits, UnmatchedUnitsWarning)
from .estimands import AnalysisFrame, EstimateReport
from .numkit import DesignMatrix, RegressionFit, ols_fit
from .propensity import PropensityFit, WeightSet, make_weights

EXTREME_WEIGHT_MULTIPLE = 10.0


# ---------------------------------------------------------------- crude


def crude(frame: AnalysisFrame) -> EstimateReport:
    """Unadjusted difference in means, from OLS of Y on (1, A)."""
    X = DesignMatrix.build(frame.a, labels=["A"])
    fit = ols_fit(X, frame.y)
    return EstimateReport(frame.spec, "crude", fit.coef("A"), fit.se("A"), se_method="model")


# ---------------------------------------------------------------- outcome regression


@dataclass
class OutcomeModelFit:
    fit: RegressionFit
    with_interactions: bool
    n_confounders: int

    def design(self, a, L) -> np.ndarray:
        a = np.broadcast_to(np.asarray(a, dtype=float), (L.shape[0],))
        blocks = [np.ones(L.shape[0]), a, L]
        if self.with_interactions:
            blocks.append(a[:, None] * L)
        return np.column_stack(blocks)

    def predict(self, a, L) -> np.ndarray:
        """Fitted E[Y | A=a, L]."""
        return self.design(a, L) @ self.fit.coefficients


def fit_outcome_model(frame: AnalysisFrame, with_interactions: bool = True,
                      L=None, labels=None) -> OutcomeModelFit:
    L = frame.L if L is None else np.asarray(L, dtype=float)
    labels = list(frame.L_labels if labels is None else labels)
    blocks, names = [frame.a, L], ["A", *labels]
    if with_interactions:
        blocks.append(frame.a[:, None] * L)
        names += [f"A*{x}" for x in labels]
    fit = ols_fit(DesignMatrix.build(*blocks, labels=names), frame.y)
    return OutcomeModelFit(fit, with_interactions, L.shape[1])


def _effect_gradient(model: OutcomeModelFit, Lbar) -> np.ndarray:
    k = model.n_confounders
    g = np.zeros(len(model.fit.coefficients))
    g[1] = 1.0
    if model.with_interactions:
        g[2 + k:] = Lbar
    return g


def or_ate(frame: AnalysisFrame, with_interactions: bool = True, model: OutcomeModelFit | None = None,
           L=None, labels=None) -> EstimateReport:
    """Standardisation over the sample confounder distribution.

    The SE is the delta-method value treating the confounder mean as fixed; with
    interactions the battery replaces it by a bootstrap SE.
    """
    if model is None:
        model = fit_outcome_model(frame, with_interactions, L, labels)
    L = frame.L if L is None else np.asarray(L, dtype=float)
    g = _effect_gradient(model, L.mean(axis=0))
    est = float(g @ model.fit.coefficients)
    se = float(np.sqrt(g @ model.fit.covariance @ g))
    name = "OR with interactions" if model.with_interactions else "OR without interactions"
    return EstimateReport(frame.spec, name, est, se, se_method="model" if not model.with_interactions
                          else "delta")


def or_att(frame: AnalysisFrame, model: OutcomeModelFit | None = None, L=None, labels=None) -> EstimateReport:
    """Average of the fitted conditional effect over the treated."""
    treated = frame.a == 1
    if not treated.any():
        raise NoTreatedUnits("no treated units to average over")
    if model is None:
        model = fit_outcome_model(frame, True, L, labels)
    if not model.with_interactions:
        raise ValueError("the ATT standardisation needs the interacted outcome model")
    L = frame.L if L is None else np.asarray(L, dtype=float)
    g = _effect_gradient(model, L[treated].mean(axis=0))
    est = float(g @ model.fit.coefficients)
    se = float(np.sqrt(g @ model.fit.covariance @ g))
    return EstimateReport(frame.spec, "OR with interactions", est, se, se_method="delta")


# ---------------------------------------------------------------- PS regression


def ps_regression(frame: AnalysisFrame, fit: PropensityFit) -> EstimateReport:
    """OLS of Y on (1, A, e_hat); the A coefficient."""
    try:
        X = DesignMatrix.build(frame.a, fit.scores, labels=["A", "ps"])
        model = ols_fit(X, frame.y)
        diag = {}
    except RankDeficient:
        # pivoting may blame the intercept for a constant score; the refit below
        # re-raises if the collinearity does not involve the score at all
        model = ols_fit(DesignMatrix.build(frame.a, labels=["A"]), frame.y)
        warnings.warn("propensity score is constant; dropped from the regression", stacklevel=2)
        diag = {"ps_dropped": True}
    return EstimateReport(frame.spec, "PS regression", model.coef("A"), model.se("A"),
                          se_method="model", diagnostics=diag)


# ---------------------------------------------------------------- stratification


@dataclass
class StrataSummary:
    n: np.ndarray
    n_treated: np.ndarray
    mean_treated: np.ndarray
    mean_control: np.ndarray

    @property
    def effects(self) -> np.ndarray:
        return self.mean_treated - self.mean_control


def summarize_strata(frame: AnalysisFrame, strata) -> StrataSummary:
    strata = np.asarray(strata)
    if strata.shape != frame.y.shape:
        raise ValueError("strata are not aligned with the frame")
    levels = np.unique(strata)
    n, n1, m1, m0 = [], [], [], []
    for j in levels:
        sel = strata == j
        t, c = sel & (frame.a == 1), sel & (frame.a == 0)
        if not t.any() or not c.any():
            raise EmptyArmInStratum(f"stratum {j} lacks one exposure arm", stratum=j)
        n.append(sel.sum())
        n1.append(t.sum())
        m1.append(frame.y[t].mean())
        m0.append(frame.y[c].mean())
    return StrataSummary(np.array(n), np.array(n1), np.array(m1), np.array(m0))


def stratification_ate(frame: AnalysisFrame, strata) -> EstimateReport:
    s = summarize_strata(frame, strata)
    est = float(np.sum(s.n / s.n.sum() * s.effects))
    return EstimateReport(frame.spec, "PS stratification", est,
                          diagnostics={"strata": len(s.n)})


def stratification_att(frame: AnalysisFrame, strata) -> EstimateReport:
    s = summarize_strata(frame, strata)
    est = float(np.sum(s.n_treated / s.n_treated.sum() * s.effects))
    return EstimateReport(frame.spec, "PS stratification", est,
                          diagnostics={"strata": len(s.n)})


# ---------------------------------------------------------------- matching


@dataclass(frozen=True)
class MatchConfig:
    """Nearest-neighbour matching on the absolute propensity-score distance.

    ``ties="index"`` keeps exactly ``M`` matches, preferring the lower row index
    among equidistant candidates; ``ties="all"`` keeps every candidate tied with
    the M-th nearest distance.
    """

    M: int = 1
    replacement: bool = True
    caliper: float | None = None
    ties: str = "index"
    criterion: str = "ps_absolute_distance"

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if self.caliper is not None and not self.caliper > 0:
            raise ValueError("caliper must be positive")
        if self.ties not in ("index", "all"):
            raise ValueError("ties must be 'index' or 'all'")
        if self.criterion != "ps_absolute_distance":
            raise ValueError(f"unsupported matching criterion {self.criterion!r}")
        if not self.replacement:
            raise ValueError("matching without replacement is not implemented")


@dataclass
class MatchResult:
    """Match map: ``matches[i]`` are row indices in the opposite arm for unit ``i``
    (``None`` for units that are not matched or were dropped by the caliper)."""

    target: str
    config: MatchConfig
    matches: list
    dropped: np.ndarray
    y: np.ndarray
    a: np.ndarray
    scores: np.ndarray
    estimate: float = math.nan
    reuse: np.ndarray = field(default=None)  # sum over l of 1/|M_l| for each i used as a match

    @property
    def matched_units(self) -> np.ndarray:
        return np.array([i for i, m in enumerate(self.matches) if m is not None], dtype=int)


def _nearest(order, sorted_scores, s, M, ties, caliper):
    """Indices (into ``order``) of the M nearest candidates to score ``s``."""
    m = len(sorted_scores)
    if m == 0:
        return np.empty(0, dtype=int)
    pos = int(np.searchsorted(sorted_scores, s))
    lo, hi = pos - 1, pos
    # find the M-th smallest distance by a two-pointer walk
    dist_m = -1.0
    for _ in range(min(M, m)):
        dl = s - sorted_scores[lo] if lo >= 0 else math.inf
        dh = sorted_scores[hi] - s if hi < m else math.inf
        if dl <= dh:
            dist_m, lo = dl, lo - 1
        else:
            dist_m, hi = dh, hi + 1
    if caliper is not None and dist_m > caliper:
        dist_m = caliper
    # every candidate within dist_m (the tie set may extend past the walk)
    while lo >= 0 and s - sorted_scores[lo] <= dist_m:
        lo -= 1
    while hi < m and sorted_scores[hi] - s <= dist_m:
        hi += 1
    cand = np.arange(lo + 1, hi)
    if cand.size == 0:
        return cand
    d = np.abs(sorted_scores[cand] - s)
    if caliper is not None:
        cand, d = cand[d <= caliper], d[d <= caliper]
    if ties == "all" or cand.size <= M:
        return cand
    rank = np.lexsort((order[cand], d))
    return cand[rank[:M]]


def match(frame: AnalysisFrame, fit: PropensityFit, config: MatchConfig = MatchConfig(),
          target: str = "ATE") -> MatchResult:
    if target not in ("ATE", "ATT"):
        raise ValueError("target must be ATE or ATT")
    a, y, e = frame.a, frame.y, np.asarray(fit.scores, dtype=float)
    n = len(a)
    arms = {}
    for arm in (0, 1):
        idx = np.flatnonzero(a == arm)
        order = idx[np.lexsort((idx, e[idx]))]
        arms[arm] = (order, e[order])
    if len(arms[0][0]) == 0 or len(arms[1][0]) == 0:
        raise NoTreatedUnits("matching needs units in both arms")
    matches = [None] * n
    dropped = []
    units = range(n) if target == "ATE" else np.flatnonzero(a == 1)
    for i in units:
        order, sorted_scores = arms[1 - int(a[i])]
        pick = _nearest(order, sorted_scores, e[i], config.M, config.ties, config.caliper)
        if pick.size == 0:
            dropped.append(i)
            continue
        matches[i] = np.sort(order[pick])
    dropped = np.asarray(dropped, dtype=int)
    if len(dropped) == len(units):
        raise UnmatchedUnits("no unit found a match within the caliper")
    reuse = np.zeros(n)
    for i, m in enumerate(matches):
        if m is not None:
            reuse[m] += 1.0 / len(m)
    return MatchResult(target, config, matches, dropped, y, a, e, reuse=reuse)


def matching(frame: AnalysisFrame, fit: PropensityFit, config: MatchConfig = MatchConfig(),
             target: str = "ATE", with_se: bool = True) -> EstimateReport:
    """Nearest-neighbour PS matching estimate of the ATE or ATT.

    The SE is the homoscedastic Abadie-Imbens variance; the bootstrap is not valid
    for matching estimators and is never attached.
    """
    res = match(frame, fit, config, target)
    used = res.matched_units
    imputed = np.array([res.y[res.matches[i]].mean() for i in used])
    sign = 2.0 * res.a[used] - 1.0
    res.estimate = float(np.mean(sign * (res.y[used] - imputed)))
    diag = {"M": config.M, "dropped": int(res.dropped.size)}
    if res.dropped.size:
        warnings.warn(f"{res.dropped.size} units had no match within the caliper and were dropped",
                      UnmatchedUnitsWarning, stacklevel=2)
        diag["dropped_ids"] = res.dropped.tolist()
    se = math.nan
    if with_se:
        from .inference import matching_se

        se = matching_se(res)
    return EstimateReport(frame.spec, f"PS matching (M={config.M})", res.estimate, se,
                          se_method="abadie-imbens" if with_se else "", diagnostics=diag)


# ---------------------------------------------------------------- weighting


def _check_extreme(w, diag):
    ratio = float(w.max() / w.mean())
    diag["max_weight_ratio"] = ratio
    if ratio > EXTREME_WEIGHT_MULTIPLE:
        warnings.warn(f"largest weight is {ratio:.1f} times the mean", ExtremeWeightsWarning, stacklevel=3)
        diag["extreme_weights"] = True


def ipw(frame: AnalysisFrame, weights: WeightSet, target: str = "ATE", form: str = "hajek",
        with_se: bool = True) -> EstimateReport:
    """Inverse-probability-weighted contrast.

    ``form="hajek"`` normalises the weights within each arm (weighted least squares
    of Y on (1, A)) and carries a robust sandwich SE; ``form="ht"`` is the raw
    Horvitz-Thompson sum, scaled by the expected weight total of each arm.
    """
    if target not in ("ATE", "ATT"):
        raise ValueError("target must be ATE or ATT")
    if target == "ATT" and not weights.kind.startswith("att"):
        raise ValueError(f"ATT needs ATT weights, got {weights.kind}")
    if target == "ATE" and not weights.kind.startswith("ate"):
        raise ValueError(f"ATE needs ATE weights, got {weights.kind}")
    a, y, w = frame.a, frame.y, np.asarray(weights.weights, dtype=float)
    if w.shape != y.shape:
        raise ValueError("weights are not aligned with the frame")
    t, c = a == 1, a == 0
    if not t.any():
        raise NoTreatedUnits("no treated units")
    diag = {"form": form, "weights": weights.kind}
    _check_extreme(w, diag)
    n, n1, n0 = len(y), t.sum(), c.sum()
    if form == "hajek":
        m1 = np.sum(w[t] * y[t]) / np.sum(w[t])
        m0 = np.sum(w[c] * y[c]) / np.sum(w[c])
    elif form == "ht":
        stabilized = weights.kind.endswith("_stabilized")
        if target == "ATE":
            m1 = np.sum(w[t] * y[t]) / (n1 if stabilized else n)
            m0 = np.sum(w[c] * y[c]) / (n0 if stabilized else n)
        else:
            m1 = y[t].mean()
            m0 = np.sum(w[c] * y[c]) / (n0 if stabilized else n1)
    else:
        raise ValueError("form must be 'hajek' or 'ht'")
    diag["mean_treated"], diag["mean_control"] = float(m1), float(m0)
    se, se_method = math.nan, ""
    if with_se and form == "hajek":
        from .inference import sandwich_se_weighted

        se, se_method = sandwich_se_weighted(frame, w), "sandwich"
    return EstimateReport(frame.spec, "PS IPW", float(m1 - m0), se, se_method=se_method, diagnostics=diag)


def aipw(frame: AnalysisFrame, fit: PropensityFit, outcome_model: OutcomeModelFit,
         L=None) -> EstimateReport:
    """Augmented IPW (doubly robust) ATE."""
    make_weights(fit, frame.a, "ate_unstabilized")  # positivity check
    L = frame.L if L is None else np.asarray(L, dtype=float)
    a, y, e = frame.a, frame.y, fit.scores
    mu1 = outcome_model.predict(1.0, L)
    mu0 = outcome_model.predict(0.0, L)
    m1 = np.mean(a * (y - mu1) / e + mu1)
    m0 = np.mean((1 - a) * (y - mu0) / (1 - e) + mu0)
    return EstimateReport(frame.spec, "PS DR IPW", float(m1 - m0),
                          diagnostics={"mean_treated": float(m1), "mean_control": float(m0)})

"""Propensity scores, inverse-probability weights and balance/overlap diagnostics."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import EmptyArmInStratum, PositivityViolation, PositivityWarning
from .estimands import AnalysisFrame
from .numkit import DesignMatrix, RegressionFit, logistic_fit, predict

WEIGHT_KINDS = ("ate_unstabilized", "ate_stabilized", "att_stabilized", "att_unstabilized")
SMD_ADEQUATE = 0.1
VR_BAND = (0.5, 2.0)


@dataclass
class PropensityFit:
    model: RegressionFit
    scores: np.ndarray
    exposure: np.ndarray
    exposure_label: str = "A"


@dataclass
class WeightSet:
    kind: str
    weights: np.ndarray
    raw_weights: np.ndarray
    truncation: float | None = None  # cap actually applied
    percentile: float | None = None


@dataclass
class OverlapReport:
    quantiles: pd.DataFrame  # rows: arm 0/1, columns: min, q05, ..., max
    fraction_outside: float
    overlap_coefficient: float

    def to_frame(self) -> pd.DataFrame:
        out = self.quantiles.copy()
        out["fraction_outside"] = self.fraction_outside
        out["overlap_coefficient"] = self.overlap_coefficient
        return out


def ps_design(frame: AnalysisFrame) -> DesignMatrix:
    return DesignMatrix.build(frame.L, labels=frame.L_labels)


def fit_ps(frame: AnalysisFrame, L=None, labels=None) -> PropensityFit:
    """Logistic regression of the exposure on the frame's confounder block.

    ``L``/``labels`` override the confounder block (used for deliberately
    misspecified models).
    """
    a = frame.a
    if a.min() == a.max():
        raise EmptyArmInStratum("the exposure takes a single value", stratum=None)
    if L is None:
        X = ps_design(frame)
    else:
        X = DesignMatrix.build(L, labels=labels)
    model = logistic_fit(X, a)
    scores = predict(model, X)
    if np.any(scores <= 0) or np.any(scores >= 1):
        warnings.warn("estimated propensity scores reach 0 or 1", PositivityWarning, stacklevel=2)
    return PropensityFit(model, scores, a, frame.spec.exposure)


def make_weights(fit: PropensityFit, a=None, kind: str = "ate_stabilized",
                 truncation: float | None = None, cap: float | None = None) -> WeightSet:
    """Inverse-probability weights.

    ``truncation`` is a percentile (e.g. 99) of the weight distribution above which
    weights are clamped; ``cap`` clamps at an absolute value.
    """
    if kind not in WEIGHT_KINDS:
        raise ValueError(f"unknown weight kind {kind!r}")
    a = fit.exposure if a is None else np.asarray(a, dtype=float)
    e = np.asarray(fit.scores, dtype=float)
    if a.shape != e.shape:
        raise ValueError("scores and exposure are not aligned")
    treated = a == 1
    if np.any(e[treated] <= 0) or np.any(e[~treated] >= 1):
        raise PositivityViolation("a unit has zero estimated probability of its received exposure")
    p1 = treated.mean()
    p0 = 1.0 - p1
    with np.errstate(divide="ignore"):
        if kind == "ate_unstabilized":
            w = np.where(treated, 1.0 / e, 1.0 / (1.0 - e))
        elif kind == "ate_stabilized":
            w = np.where(treated, p1 / e, p0 / (1.0 - e))
        elif kind == "att_stabilized":
            w = np.where(treated, 1.0, e / (1.0 - e) * p0 / p1)
        else:
            w = np.where(treated, 1.0, e / (1.0 - e))
    raw = w.copy()
    applied = None
    if truncation is not None:
        applied = float(np.percentile(w, truncation))
    if cap is not None:
        applied = cap if applied is None else min(applied, cap)
    if applied is not None:
        w = np.minimum(w, applied)
    return WeightSet(kind, w, raw, applied, truncation)


# ---------------------------------------------------------------- balance


def _wstats(x, w):
    m = np.average(x, weights=w)
    v = np.average((x - m) ** 2, weights=w)
    return m, v


def strata_weights(a, strata) -> np.ndarray:
    """Weights reproducing within-stratum pooling: n_j / n_{a,j} per unit."""
    a = np.asarray(a)
    strata = np.asarray(strata)
    w = np.zeros(len(a))
    for j in np.unique(strata):
        in_j = strata == j
        for arm in (0, 1):
            sel = in_j & (a == arm)
            if sel.any():
                w[sel] = in_j.sum() / sel.sum()
    return w


def balance_check(frame: AnalysisFrame, weights=None, strata=None, match_weights=None,
                  X=None, labels=None) -> pd.DataFrame:
    """Standardised mean differences and variance ratios before/after adjustment.

    Exactly one of ``weights`` (a WeightSet or array), ``strata`` or
    ``match_weights`` (times-used weights from a matching) describes the adjusted
    sample; with none given, only the unadjusted columns are meaningful.
    SMDs use the unadjusted pooled standard deviation as denominator throughout.
    """
    a = frame.a
    X = frame.L if X is None else np.asarray(X, dtype=float)
    labels = frame.L_labels if labels is None else labels
    if isinstance(weights, WeightSet):
        weights = weights.weights
    if weights is not None:
        w = np.asarray(weights, dtype=float)
    elif strata is not None:
        w = strata_weights(a, strata)
    elif match_weights is not None:
        w = np.asarray(match_weights, dtype=float)
    else:
        w = np.ones(len(a))
    if len(w) != len(a):
        raise ValueError("adjustment weights are not aligned with the frame")
    t, c = a == 1, a == 0
    rows = []
    for j, name in enumerate(labels):
        x = X[:, j]
        m1, v1 = _wstats(x[t], None)
        m0, v0 = _wstats(x[c], None)
        wm1, wv1 = _wstats(x[t], w[t])
        wm0, wv0 = _wstats(x[c], w[c])
        sd = np.sqrt(0.5 * (v1 + v0))
        zero = sd == 0
        smd_b = 0.0 if zero else (m1 - m0) / sd
        smd_a = 0.0 if zero else (wm1 - wm0) / sd
        vr_b = v1 / v0 if v0 > 0 else np.nan
        vr_a = wv1 / wv0 if wv0 > 0 else np.nan
        rows.append({
            "covariate": name, "smd_before": smd_b, "smd_after": smd_a,
            "vr_before": vr_b, "vr_after": vr_a, "zero_variance": bool(zero),
            "adequate": bool(abs(smd_a) < SMD_ADEQUATE
                             and (np.isnan(vr_a) or VR_BAND[0] <= vr_a <= VR_BAND[1])),
        })
    return pd.DataFrame(rows, columns=["covariate", "smd_before", "smd_after", "vr_before",
                                       "vr_after", "zero_variance", "adequate"])


# ---------------------------------------------------------------- overlap


def overlap_check(fit: PropensityFit, a=None, bins: int = 50) -> OverlapReport:
    """Per-arm score quantiles, share of units outside the other arm's score range,
    and the overlap coefficient of the two score histograms (1 = identical)."""
    a = fit.exposure if a is None else np.asarray(a)
    e = fit.scores
    probs = [0, 0.05, 0.25, 0.5, 0.75, 0.95, 1]
    names = ["min", "q05", "q25", "q50", "q75", "q95", "max"]
    q = {}
    for arm in (0, 1):
        s = e[a == arm]
        q[arm] = np.quantile(s, probs) if s.size else np.full(len(probs), np.nan)
    quant = pd.DataFrame([q[0], q[1]], index=pd.Index([0, 1], name="arm"), columns=names)
    outside = np.zeros(len(e), dtype=bool)
    for arm in (0, 1):
        other = quant.loc[1 - arm]
        sel = a == arm
        outside[sel] = (e[sel] < other["min"]) | (e[sel] > other["max"])
    edges = np.linspace(0.0, 1.0, bins + 1)
    h1, _ = np.histogram(e[a == 1], bins=edges)
    h0, _ = np.histogram(e[a == 0], bins=edges)
    ovl = float(np.minimum(h1 / max(h1.sum(), 1), h0 / max(h0.sum(), 1)).sum())
    return OverlapReport(quant, float(outside.mean()), ovl)


# ---------------------------------------------------------------- strata


def type7_quantiles(x, probs) -> np.ndarray:
    """Linear-interpolation sample quantiles (R type 7, numpy's default)."""
    return np.quantile(np.asarray(x, dtype=float), probs, method="linear")


def stratify_by_ps(fit: PropensityFit, J: int = 6, check_arms: bool = True) -> np.ndarray:
    """Assign each unit to one of ``J`` score-quantile strata (0-based).

    A score equal to a cut point goes to the lower stratum.
    """
    if J < 2:
        raise ValueError("need at least two strata")
    cuts = type7_quantiles(fit.scores, np.arange(1, J) / J)
    strata = np.searchsorted(cuts, fit.scores, side="left")
    if check_arms:
        a = fit.exposure
        for j in range(J):
            sel = strata == j
            if not (np.any(a[sel] == 1) and np.any(a[sel] == 0)):
                raise EmptyArmInStratum(f"stratum {j} lacks one exposure arm", stratum=j)
    return strata

"""Instrumental-variable estimators for a binary instrument and binary exposure."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from .errors import DimensionMismatch, WeakInstrumentWarning, WeakOrNullFirstStage
from .estimands import AnalysisFrame, EstimandSpec, EstimateReport
from .numkit import DesignMatrix, RegressionFit, ols_fit

NULL_FIRST_STAGE = 1e-8
WEAK_ERROR = 0.01   # |P(A=1|Z=1) - P(A=1|Z=0)| below this is refused
WEAK_WARNING = 0.1
UNTESTABLE = ("exclusion (instrument affects the outcome only through the exposure) and "
              "independence from unmeasured confounders cannot be checked from data")


@dataclass
class IVFrame:
    spec: EstimandSpec
    y: np.ndarray
    a: np.ndarray
    z: np.ndarray
    L: np.ndarray | None = None
    L_labels: list | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if not (self.y.shape == self.a.shape == self.z.shape):
            raise DimensionMismatch("outcome, exposure and instrument lengths differ")
        if not np.all((self.z == 0) | (self.z == 1)):
            raise ValueError("the instrument must be binary")

    @classmethod
    def from_frame(cls, frame: AnalysisFrame, covariates: bool = False) -> "IVFrame":
        if frame.z is None:
            raise ValueError("the analysis frame declares no instrument")
        L = frame.L if covariates else None
        return cls(frame.spec, frame.y, frame.a, frame.z, L, frame.L_labels if covariates else None)


@dataclass
class IVFit:
    beta_iv: float
    first_stage: RegressionFit
    second_stage: RegressionFit
    first_stage_coef: float
    first_stage_f: float


def _arms(frame: IVFrame):
    on, off = frame.z == 1, frame.z == 0
    if not on.any() or not off.any():
        raise WeakOrNullFirstStage("the instrument does not vary")
    return on, off


def _first_stage_gap(frame: IVFrame) -> float:
    on, off = _arms(frame)
    gap = frame.a[on].mean() - frame.a[off].mean()
    if abs(gap) <= NULL_FIRST_STAGE or abs(gap) < WEAK_ERROR:
        raise WeakOrNullFirstStage(f"first-stage exposure difference {gap:.3g} is too small")
    if abs(gap) < WEAK_WARNING:
        warnings.warn(f"weak instrument: first-stage difference {gap:.3g}", WeakInstrumentWarning,
                      stacklevel=3)
    return float(gap)


def _interpretation(spec):
    return "ATE under effect homogeneity; CACE under monotonicity"


def wald(frame: IVFrame) -> EstimateReport:
    """Ratio of the instrument's effect on the outcome to its effect on the exposure.

    The SE is the delta-method value for a ratio of two independent-arm mean
    differences, including the within-arm outcome/exposure covariance.
    """
    gap = _first_stage_gap(frame)
    on, off = _arms(frame)
    y, a = frame.y, frame.a
    num = y[on].mean() - y[off].mean()
    beta = num / gap
    var_num = var_gap = cov = 0.0
    for arm in (on, off):
        k = arm.sum()
        if k < 2:
            continue
        C = np.cov(y[arm], a[arm])
        var_num += C[0, 0] / k
        var_gap += C[1, 1] / k
        cov += C[0, 1] / k
    var = (var_num - 2 * beta * cov + beta ** 2 * var_gap) / gap ** 2
    return EstimateReport(frame.spec, "IV (Wald)", float(beta), float(np.sqrt(max(var, 0.0))),
                          se_method="delta",
                          diagnostics={"first_stage": gap, "interpretation": _interpretation(frame.spec)})


def fit_tsls(frame: IVFrame) -> IVFit:
    _first_stage_gap(frame)
    blocks, labels = [frame.z], ["Z"]
    cov_blocks, cov_labels = [], []
    if frame.L is not None and frame.L.shape[1]:
        cov_blocks, cov_labels = [frame.L], list(frame.L_labels)
    X1 = DesignMatrix.build(*blocks, *cov_blocks, labels=labels + cov_labels)
    first = ols_fit(X1, frame.a)
    a_hat = X1.values @ first.coefficients
    X2 = DesignMatrix.build(a_hat, *cov_blocks, labels=["A_hat"] + cov_labels)
    second = ols_fit(X2, frame.y)
    # structural residuals use the observed exposure, not its projection
    X_obs = DesignMatrix.build(frame.a, *cov_blocks, labels=["A"] + cov_labels).values
    r = frame.y - X_obs @ second.coefficients
    n, p = X2.values.shape
    sigma2 = float(r @ r) / (n - p)
    cov = sigma2 * np.linalg.inv(X2.values.T @ X2.values)
    second = replace(second, covariance=cov, sigma2=sigma2)
    t = first.coef("Z") / first.se("Z")
    return IVFit(second.coef("A_hat"), first, second, first.coef("Z"), float(t * t))


def tsls(frame: IVFrame) -> EstimateReport:
    """Two-stage least squares with optional covariates in both stages."""
    fit = fit_tsls(frame)
    name = "IV (2SLS, covariates)" if frame.L is not None else "IV (2SLS)"
    return EstimateReport(frame.spec, name, float(fit.beta_iv), fit.second_stage.se("A_hat"),
                          se_method="2sls",
                          diagnostics={"first_stage": fit.first_stage_coef, "first_stage_F": fit.first_stage_f})


def smm_att(frame: IVFrame) -> EstimateReport:
    """Effect among the exposed from the additive structural mean model.

    Solves sum_i (z_i - zbar)(y_i - beta a_i) = 0; the SE is the sandwich of that
    estimating equation (with the outcome intercept profiled out).
    """
    _first_stage_gap(frame)
    zc = frame.z - frame.z.mean()
    denom = np.sum(zc * frame.a)
    beta = np.sum(zc * frame.y) / denom
    resid = frame.y - beta * frame.a
    u = zc * (resid - resid.mean())
    se = float(np.sqrt(np.sum(u * u)) / abs(denom))
    spec = replace(frame.spec, contrast="ATT", instrument=frame.spec.instrument or "a1")
    return EstimateReport(spec, "IV (SMM)", float(beta), se, se_method="sandwich")


def as_ate(report: EstimateReport) -> EstimateReport:
    """The SMM estimate relabelled as an ATE, valid if the effect does not vary with
    the exposure actually received."""
    spec = replace(report.spec, contrast="ATE")
    diag = dict(report.diagnostics, assumption="no current-treatment interaction")
    return EstimateReport(spec, report.method, report.estimate, report.se, report.ci95,
                          report.se_method, report.ci_method, diag)


def iv_diagnostics(frame: IVFrame, covariates: pd.DataFrame | None = None) -> dict:
    """Instrument strength and covariate balance across instrument arms."""
    on, off = _arms(frame)
    gap = float(frame.a[on].mean() - frame.a[off].mean())
    X = DesignMatrix.build(frame.z, labels=["Z"])
    first = ols_fit(X, frame.a)
    f_stat = (first.coef("Z") / first.se("Z")) ** 2 if first.se("Z") > 0 else float("inf")
    rows = []
    if covariates is not None:
        for name in covariates.columns:
            x = covariates[name].to_numpy(dtype=float)
            v1, v0 = x[on].var(), x[off].var()
            sd = np.sqrt(0.5 * (v1 + v0))
            smd = 0.0 if sd == 0 else (x[on].mean() - x[off].mean()) / sd
            rows.append({"covariate": name, "smd": float(smd)})
    balance = pd.DataFrame(rows, columns=["covariate", "smd"])
    return {
        "first_stage_difference": gap,
        "first_stage_F": float(f_stat),
        "weak": abs(gap) < WEAK_WARNING,
        "balance": balance,
        "max_abs_smd": float(balance["smd"].abs().max()) if len(balance) else 0.0,
        "untestable": UNTESTABLE,
    }

"""Estimator batteries: every method for a set of estimands, with attached SEs.

Rows come out in a fixed order (the preset's method order, crude first) and a
failing method records its error instead of aborting the battery.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from . import iv_estimators as ive
from . import nuc_estimators as ne
from . import propensity as ps
from .errors import CausalChainError
from .estimands import EstimandSpec, EstimateReport, resolve
from .inference import BootstrapPlan, bootstrap, resample_frame

# method name -> contrasts it supports
METHODS = {
    "crude": ("ATE", "ATT"),
    "or_no_interactions": ("ATE",),
    "or_interactions": ("ATE", "ATT"),
    "ps_stratification": ("ATE", "ATT"),
    "ps_regression": ("ATE",),
    "ps_matching_1": ("ATE", "ATT"),
    "ps_matching_3": ("ATE", "ATT"),
    "ps_ipw": ("ATE", "ATT"),
    "ps_dr": ("ATE",),
    "iv_wald": ("ATE",),
    "iv_2sls": ("ATE",),
    "iv_smm": ("ATT",),
}
BOOTSTRAPPED = {"or_interactions", "ps_stratification", "ps_regression", "ps_ipw", "ps_dr"}
NEVER_BOOTSTRAP = {"ps_matching_1", "ps_matching_3"}
LABELS = {
    "crude": "Crude regression",
    "or_no_interactions": "Regression adjustment (no interactions)",
    "or_interactions": "Regression adjustment (interactions)",
    "ps_stratification": "PS stratification",
    "ps_regression": "Regression with PS",
    "ps_matching_1": "PS matching (1 match)",
    "ps_matching_3": "PS matching (3 matches)",
    "ps_ipw": "PS IPW",
    "ps_dr": "PS DR IPW",
    "iv_wald": "IV (Wald)",
    "iv_2sls": "IV (2SLS, covariates)",
    "iv_smm": "IV (SMM)",
}

TABLE5_ATE = ["crude", "or_no_interactions", "or_interactions", "ps_stratification", "ps_regression",
              "ps_matching_1", "ps_matching_3", "ps_ipw", "ps_dr", "iv_wald", "iv_2sls"]
TABLE5_ATT = ["crude", "or_interactions", "ps_stratification", "ps_matching_1", "ps_matching_3",
              "ps_ipw", "iv_smm"]
TABLE6_ATE = ["crude", "or_no_interactions", "or_interactions", "ps_regression", "ps_stratification",
              "ps_matching_1", "ps_matching_3", "ps_ipw", "ps_dr", "iv_wald"]
TABLE6_ATT = ["crude", "or_interactions", "ps_stratification", "ps_matching_1", "ps_matching_3", "ps_ipw"]

PRESETS = {
    "a1": [("ATE:A1", ["crude"])],
    "table5": [("ATE:A2", TABLE5_ATE), ("ATT:A2", TABLE5_ATT)],
    "table6": [("ATE:A3:a1=0", TABLE6_ATE), ("ATT:A3:a1=0", TABLE6_ATT),
               ("ATE:A3:a1=1", TABLE6_ATE), ("ATT:A3:a1=1", TABLE6_ATT)],
}

RESULT_COLUMNS = ["estimand", "method", "estimate", "se", "se_method", "ci_low", "ci_high",
                  "ci_method", "truth", "diagnostics", "error"]


@dataclass(frozen=True)
class BatteryConfig:
    B: int = 1000
    base_seed: int = 20240101
    strata: int = 6
    ate_weights: str = "ate_stabilized"
    att_weights: str = "att_stabilized"
    truncation: float | None = None
    workers: int | None = None

    @property
    def plan(self) -> BootstrapPlan:
        return BootstrapPlan(self.B, self.base_seed, self.workers)


@dataclass
class Row:
    spec: EstimandSpec
    method: str
    report: EstimateReport | None = None
    truth: float = math.nan
    error: str = ""

    def as_dict(self) -> dict:
        r = self.report
        return {
            "estimand": self.spec.to_string(),
            "method": LABELS.get(self.method, self.method),
            "estimate": r.estimate if r else math.nan,
            "se": r.se if r else math.nan,
            "se_method": r.se_method if r else "",
            "ci_low": r.ci95[0] if r else math.nan,
            "ci_high": r.ci95[1] if r else math.nan,
            "ci_method": r.ci_method if r else "",
            "truth": self.truth,
            "diagnostics": format_diagnostics(r.diagnostics) if r else "",
            "error": self.error,
        }


def format_diagnostics(diag: dict) -> str:
    parts = []
    for k in sorted(diag):
        v = diag[k]
        if isinstance(v, (list, tuple)):
            v = len(v)  # id lists are summarised by their length
        if isinstance(v, float):
            v = f"{v:.10g}"
        parts.append(f"{k}={v}")
    return ";".join(parts)


def validate_methods(methods) -> None:
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown method(s): {', '.join(unknown)}; choose from {', '.join(METHODS)}")


# ---------------------------------------------------------------- point estimates


def _point(method, spec, frame, cache, config):
    """One method's report on ``frame``; ``cache`` shares fitted models across methods."""
    contrast = spec.contrast
    if contrast not in METHODS[method]:
        raise ValueError(f"{method} does not estimate the {contrast}")

    def psfit():
        if "ps" not in cache:
            cache["ps"] = ps.fit_ps(frame)
        return cache["ps"]

    def outcome():
        if "om" not in cache:
            cache["om"] = ne.fit_outcome_model(frame, True)
        return cache["om"]

    def strata():
        if "strata" not in cache:
            cache["strata"] = ps.stratify_by_ps(psfit(), config.strata)
        return cache["strata"]

    if method == "crude":
        return ne.crude(frame)
    if method == "or_no_interactions":
        return ne.or_ate(frame, with_interactions=False)
    if method == "or_interactions":
        return ne.or_ate(frame, model=outcome()) if contrast == "ATE" else ne.or_att(frame, model=outcome())
    if method == "ps_stratification":
        fn = ne.stratification_ate if contrast == "ATE" else ne.stratification_att
        return fn(frame, strata())
    if method == "ps_regression":
        return ne.ps_regression(frame, psfit())
    if method in ("ps_matching_1", "ps_matching_3"):
        M = int(method[-1])
        return ne.matching(frame, psfit(), ne.MatchConfig(M), contrast)
    if method == "ps_ipw":
        kind = config.ate_weights if contrast == "ATE" else config.att_weights
        w = ps.make_weights(psfit(), kind=kind, truncation=config.truncation)
        return ne.ipw(frame, w, contrast)
    if method == "ps_dr":
        return ne.aipw(frame, psfit(), outcome())
    raise ValueError(method)


def _iv_report(method, spec, df):
    iv_spec = replace(spec, contrast="ATE" if method != "iv_smm" else "ATT",
                      instrument=spec.instrument or "a1")
    frame = resolve(iv_spec, df)
    if method == "iv_wald":
        return ive.wald(ive.IVFrame.from_frame(frame))
    if method == "iv_2sls":
        return ive.tsls(ive.IVFrame.from_frame(frame, covariates=True))
    return ive.smm_att(ive.IVFrame.from_frame(frame))


# ---------------------------------------------------------------- battery


def _truth(df, spec):
    from .simlearner import POTENTIAL_COLUMNS, true_contrast

    if not set(POTENTIAL_COLUMNS[:9]).issubset(df.columns):
        return math.nan
    try:
        return true_contrast(df, spec)
    except CausalChainError:
        return math.nan


def run_battery(df: pd.DataFrame, items, config: BatteryConfig = BatteryConfig()) -> list[Row]:
    """Run ``items`` = [(EstimandSpec or text, [method, ...]), ...].

    Bootstrap SEs for all bootstrapped methods of estimands sharing one analysis
    frame come from a single bootstrap pass.
    """
    parsed = []
    for spec, methods in items:
        spec = EstimandSpec.from_string(spec) if isinstance(spec, str) else spec
        validate_methods(methods)
        if methods and methods[0] != "crude":
            methods = ["crude", *[m for m in methods if m != "crude"]]
        parsed.append((spec, list(methods)))

    rows: list[Row] = []
    groups: dict = {}
    for spec, methods in parsed:
        key = (spec.exposure, spec.world, spec.subpopulation)
        try:
            frame = resolve(replace(spec, instrument=None), df)
            frame_error = None
        except CausalChainError as err:
            frame, frame_error = None, err
        g = groups.setdefault(key, {"frame": frame, "error": frame_error, "cache": {}, "boot": []})
        for method in methods:
            row = Row(spec, method)
            row.truth = _truth(df, spec if not method.startswith("iv_") else replace(
                spec, contrast="ATT" if method == "iv_smm" else spec.contrast))
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    if method.startswith("iv_"):
                        row.report = _iv_report(method, spec, df)
                    elif g["error"] is not None:
                        raise g["error"]
                    else:
                        row.report = _point(method, spec, g["frame"], g["cache"], config)
                if method in BOOTSTRAPPED and config.B > 0:
                    g["boot"].append(row)
            except (CausalChainError, ValueError, np.linalg.LinAlgError) as err:
                row.error = f"{type(err).__name__}: {err}"
            rows.append(row)

    for g in groups.values():
        if g["boot"]:
            _attach_bootstrap(g["frame"], g["boot"], config)
    return rows


def _attach_bootstrap(frame, boot_rows, config):
    jobs = [(r.method, r.spec) for r in boot_rows]

    def closure(idx):
        sub = resample_frame(frame, idx)
        cache = {}
        out = []
        for method, spec in jobs:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    out.append(_point(method, spec, sub, cache, config).estimate)
            except (CausalChainError, np.linalg.LinAlgError):
                out.append(math.nan)
        return out

    try:
        res = bootstrap(closure, frame.n, config.plan)
    except CausalChainError as err:
        for r in boot_rows:
            r.error = f"{type(err).__name__}: {err}"
        return
    for j, r in enumerate(boot_rows):
        se, ci, failed = res.component(j)
        r.report.with_bootstrap(se, ci, failed)


def results_frame(rows) -> pd.DataFrame:
    return pd.DataFrame([r.as_dict() for r in rows], columns=RESULT_COLUMNS)


def preset_items(name: str):
    if name not in PRESETS:
        raise ValueError(f"unknown battery preset {name!r}; choose from {', '.join(PRESETS)}")
    return PRESETS[name]

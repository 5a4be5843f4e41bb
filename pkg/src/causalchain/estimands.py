"""Estimand vocabulary and the resolver that turns an estimand into an analysis frame.

An :class:`EstimandSpec` names a contrast (ATE/ATT/ATNT/CACE), the exposure in the
chain ``a1 -> a2 -> a3 -> a4`` and, for downstream exposures, the upstream "world"
in which the exposure is set.  ``resolve`` applies the adjustment-set conventions
used throughout the package (see ``DEFAULT_CONFOUNDERS``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import IllegalWorld, MissingColumn

CONTRASTS = ("ATE", "ATT", "ATNT", "CACE")
EXPOSURES = ("A1", "A2", "A3", "A4")

# Adjustment sets per exposure.  Quadratic terms are listed by the base column
# name in ``DEFAULT_QUADRATICS``; categorical columns expand to dummies.
DEFAULT_CONFOUNDERS = {
    "A1": [],
    "A2": ["age", "edu", "allergy", "smoke", "urban", "east"],
    "A3": ["age", "edu", "allergy", "smoke", "urban", "east", "female", "bweight", "caesar"],
    "A4": ["age", "edu", "allergy", "smoke", "urban", "east", "female", "bweight", "caesar", "a1", "a2"],
}
DEFAULT_QUADRATICS = {"A1": [], "A2": ["age"], "A3": ["age", "bweight"], "A4": ["age", "bweight"]}
CATEGORICAL = {"edu": (1, 2)}  # reference level 0 (low)


@dataclass(frozen=True)
class EstimandSpec:
    contrast: str
    exposure: str
    world: tuple = ()
    subpopulation: tuple = ()
    instrument: str | None = None

    def __post_init__(self):
        if self.contrast not in CONTRASTS:
            raise ValueError(f"unknown contrast {self.contrast!r}")
        if self.exposure not in EXPOSURES:
            raise ValueError(f"unknown exposure {self.exposure!r}")
        # accept dicts for convenience; store sorted tuples so specs hash
        for name in ("world", "subpopulation"):
            value = getattr(self, name)
            if isinstance(value, dict):
                object.__setattr__(self, name, tuple(sorted(value.items())))
        if self.contrast == "CACE" and self.instrument is None:
            raise IllegalWorld("CACE requires a declared instrument")

    @property
    def world_dict(self) -> dict:
        return dict(self.world)

    @property
    def subpop_dict(self) -> dict:
        return dict(self.subpopulation)

    @property
    def label(self) -> str:
        parts = [f"{self.contrast}_{self.exposure[1]}"]
        if self.world:
            parts.append(",".join(f"{k}({v})" for k, v in self.world))
        if self.subpopulation:
            parts.append("|" + ",".join(f"{k}={v}" for k, v in self.subpopulation))
        if self.instrument:
            parts.append(f"iv={self.instrument}")
        return " ".join(parts)

    def to_string(self) -> str:
        """Compact text form used in CLI config files, e.g. ``ATT:A3:a1=1:edu=0``."""
        world = ",".join(f"{k}={v}" for k, v in self.world) or "-"
        sub = ",".join(f"{k}={v}" for k, v in self.subpopulation) or "-"
        text = f"{self.contrast}:{self.exposure}:{world}:{sub}"
        if self.instrument:
            text += f":{self.instrument}"
        return text

    @classmethod
    def from_string(cls, text: str) -> "EstimandSpec":
        parts = text.strip().split(":")
        if len(parts) < 2:
            raise ValueError(f"cannot parse estimand {text!r}")
        contrast, exposure = parts[0].upper(), parts[1].upper()

        def kv(chunk):
            if not chunk or chunk == "-":
                return {}
            out = {}
            for item in chunk.split(","):
                key, _, value = item.partition("=")
                out[key.strip()] = int(value)
            return out

        world = kv(parts[2]) if len(parts) > 2 else {}
        sub = kv(parts[3]) if len(parts) > 3 else {}
        instrument = parts[4] if len(parts) > 4 and parts[4] else None
        return cls(contrast, exposure, world, sub, instrument)


@dataclass
class EstimateReport:
    spec: EstimandSpec
    method: str
    estimate: float
    se: float = math.nan
    ci95: tuple = (math.nan, math.nan)
    se_method: str = ""
    ci_method: str = "normal"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isnan(self.se) and self.se < 0:
            raise ValueError("standard error must be non-negative")
        if all(math.isnan(c) for c in self.ci95) and not math.isnan(self.se):
            self.ci95 = (self.estimate - 1.96 * self.se, self.estimate + 1.96 * self.se)

    def with_bootstrap(self, se: float, ci: tuple, failed: int = 0) -> "EstimateReport":
        self.se = float(se)
        self.ci95 = (float(ci[0]), float(ci[1]))
        self.se_method = "bootstrap"
        self.ci_method = "percentile"
        self.diagnostics["bootstrap_failed"] = failed
        return self


@dataclass
class AnalysisFrame:
    """Rows of the dataset that the estimand concerns, ready for estimation."""

    spec: EstimandSpec
    y: np.ndarray
    a: np.ndarray
    L: np.ndarray  # confounder design block, no intercept
    L_labels: list
    mask: np.ndarray  # boolean mask into the source dataset
    z: np.ndarray | None = None
    data: pd.DataFrame | None = None  # the selected rows, for re-resolving

    @property
    def n(self) -> int:
        return len(self.y)


def confounder_block(df: pd.DataFrame, confounders, quadratics=()) -> tuple[np.ndarray, list]:
    """Materialise the confounder columns (dummies, centred quadratics) as a matrix."""
    cols, labels = [], []
    for name in confounders:
        if name not in df.columns:
            raise MissingColumn(f"dataset has no column {name!r}")
        x = df[name].to_numpy(dtype=float)
        if name in CATEGORICAL:
            for level in CATEGORICAL[name]:
                cols.append((x == level).astype(float))
                labels.append(f"{name}={level}")
        else:
            cols.append(x)
            labels.append(name)
    for name in quadratics:
        if name not in df.columns:
            raise MissingColumn(f"dataset has no column {name!r}")
        x = df[name].to_numpy(dtype=float)
        # centring keeps the quadratic well conditioned next to the linear term
        cols.append((x - x.mean()) ** 2)
        labels.append(f"{name}^2")
    if not cols:
        return np.empty((len(df), 0)), []
    return np.column_stack(cols), labels


def _subpop_mask(df, spec):
    mask = np.ones(len(df), dtype=bool)
    for key, value in spec.subpopulation:
        if key not in df.columns:
            raise MissingColumn(f"dataset has no column {key!r}")
        mask &= df[key].to_numpy() == value
    return mask


def resolve(spec: EstimandSpec, df: pd.DataFrame, confounders=None, quadratics=None) -> AnalysisFrame:
    """Build the analysis frame for ``spec`` from an observed dataset.

    A2 contrasts use the full sample (offer acts as an instrument for uptake, so
    conditioning on it is unnecessary).  A3 contrasts are restricted to the
    randomisation arm named by the world and, in world ``a1=1``, adjust for uptake
    as well.  A4 contrasts are only supported among initiators.
    """
    for col in ("y", spec.exposure.lower()):
        if col not in df.columns:
            raise MissingColumn(f"dataset has no column {col!r}")
    world = spec.world_dict
    exposure = spec.exposure
    conf = list(DEFAULT_CONFOUNDERS[exposure] if confounders is None else confounders)
    quad = list(DEFAULT_QUADRATICS[exposure] if quadratics is None else quadratics)
    mask = _subpop_mask(df, spec)
    instrument = spec.instrument

    if exposure == "A1":
        if world:
            raise IllegalWorld("A1 is the first exposure in the chain; it takes no world")
        conf, quad = [], []
    elif exposure == "A2":
        if world:
            raise IllegalWorld("A2 contrasts take no world (a2=1 implies a1=1)")
        if spec.contrast == "ATNT":
            # the non-treated of interest are those offered the programme who declined
            _require(df, "a1")
            mask &= df["a1"].to_numpy() == 1
        if instrument is not None and instrument.lower() != "a1":
            raise IllegalWorld(f"only a1 is a valid instrument for A2, got {instrument!r}")
    elif exposure == "A3":
        if instrument is not None:
            raise IllegalWorld("a1 is not a valid instrument for A3: it also acts through A2")
        if set(world) != {"a1"}:
            if "a2" in world:
                raise IllegalWorld("the a2(1) world has no observational analogue to estimate from")
            raise IllegalWorld("A3 contrasts need the offer world a1=0 or a1=1")
        _require(df, "a1")
        mask &= df["a1"].to_numpy() == world["a1"]
        if world["a1"] == 1 and confounders is None:
            conf.append("a2")
    elif exposure == "A4":
        if instrument is not None:
            raise IllegalWorld("no instrument is available for A4")
        if world.get("a3") != 1:
            raise IllegalWorld("A4 contrasts have no support outside initiators; set world a3=1")
        _require(df, "a3")
        mask &= df["a3"].to_numpy() == 1

    sub = df.loc[mask]
    L, labels = confounder_block(sub, conf, quad)
    z = None
    if instrument is not None:
        _require(df, instrument.lower())
        z = sub[instrument.lower()].to_numpy(dtype=float)
    return AnalysisFrame(
        spec=spec,
        y=sub["y"].to_numpy(dtype=float),
        a=sub[exposure.lower()].to_numpy(dtype=float),
        L=L,
        L_labels=labels,
        mask=mask,
        z=z,
        data=sub.reset_index(drop=True),
    )


def _require(df, col):
    if col not in df.columns:
        raise MissingColumn(f"dataset has no column {col!r}")

"""Synthetic mother-infant cohort with a nested exposure chain and full potential outcomes.

Exposures: ``a1`` randomised programme offer, ``a2`` programme uptake (only possible
when offered), ``a3`` breastfeeding initiation, ``a4`` breastfeeding for the full 91
days.  Every record carries the potential outcomes needed for the truth table, so
any estimator can be checked against the contrast it targets.

Structure of the data-generating process::

    L1 = (age, urban, east, edu, allergy, smoke)      baseline
    L2 = (female, bweight, caesar)                     at birth, unaffected by a1
    a2_offer ~ Bern(expit(uptake(L1) + s*U))           potential uptake if offered
    A3(a2)   = 1[V3 < expit(init(L, a2) + s*U)]        shared V3: monotone in a2
    D(a2)    = clip(dur(L, a2) + sd*Z_D, 1, 91)        shared Z_D across worlds
    Y(s, d)  = base(L) + s * m(L) * (start + dur_gain * d/91) + sd_y*eps + s*u_y*U

The shared per-individual noise terms make the potential outcomes correlated and
rank preserving; marginal contrasts do not depend on that choice.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import EmptySubpopulation, InvalidConfig, IoFailure, UnsupportedWorld
from .estimands import EstimandSpec

CHUNK = 1 << 16  # rows per RNG block; fixed so record i never depends on n
N_UNIFORM = 10
N_NORMAL = 5
DUR_MAX = 91.0
DUR_MIN = 1.0

AGE_REF, AGE_SCALE = 26.0, 5.0
BW_REF, BW_SCALE = 3450.0, 500.0

COVARIATE_COLUMNS = ["age", "urban", "east", "edu", "allergy", "smoke", "female", "bweight", "caesar"]
OBSERVED_COLUMNS = ["id", *COVARIATE_COLUMNS, "a1", "a2", "a3", "a4", "bfdur", "y"]
POTENTIAL_COLUMNS = [
    "y_a1_0", "y_a1_1", "y_a2_0", "y_a2_1", "y_a3_0",
    "y_a1_0_a3_1", "y_a1_1_a3_1", "y_a2_1_a3_1", "y_a4_1", "a2_offer", "u",
]
FLAG_COLUMNS = {"urban", "east", "edu", "allergy", "smoke", "female", "caesar",
                "a1", "a2", "a3", "a4", "a2_offer"}

# Truth-table layout: rows are interventions, columns are subpopulations.
TRUTH_ROWS = [
    ("y_a1_0", "offer withheld"),
    ("y_a1_1", "offer made"),
    ("y_a2_0", "programme not followed"),
    ("y_a2_1", "programme followed"),
    ("y_a3_0", "no breastfeeding"),
    ("y_a1_0_a3_1", "offer withheld, breastfeeding started"),
    ("y_a1_1_a3_1", "offer made, breastfeeding started"),
    ("y_a2_1_a3_1", "programme followed, breastfeeding started"),
    ("y_a4_1", "breastfeeding for 91 days"),
]
TRUTH_COLUMNS = {
    "overall": lambda d: np.ones(len(d), dtype=bool),
    "a2=1": lambda d: d["a2"] == 1,
    "a1=1,a2=0": lambda d: (d["a1"] == 1) & (d["a2"] == 0),
    "a1=1,a3=1": lambda d: (d["a1"] == 1) & (d["a3"] == 1),
    "a1=1,a3=0": lambda d: (d["a1"] == 1) & (d["a3"] == 0),
    "a1=0,a3=1": lambda d: (d["a1"] == 0) & (d["a3"] == 1),
    "a1=0,a3=0": lambda d: (d["a1"] == 0) & (d["a3"] == 0),
    "edu=low": lambda d: d["edu"] == 0,
    "edu=int": lambda d: d["edu"] == 1,
    "edu=high": lambda d: d["edu"] == 2,
}

# Mean potential weights (grams) that the default configuration is calibrated to,
# laid out like ``truth_table``.  ``scripts/calibrate_dgp.py`` fits against these.
TARGET_TRUTH = pd.DataFrame(
    [
        [6017, 6047, 5964, 6149, 5733, 6274, 5761, 5914, 6057, 6141],
        [6115, 6200, 5964, 6292, 5733, 6308, 5923, 6024, 6155, 6207],
        [6017, 6047, 5964, 6149, 5733, 6274, 5761, 5914, 6057, 6141],
        [6182, 6200, 6149, 6308, 5911, 6329, 6035, 6128, 6208, 6226],
        [5827, 5849, 5788, 5871, 5733, 5893, 5761, 5730, 5854, 5981],
        [6214, 6226, 6193, 6251, 6133, 6274, 6153, 6154, 6248, 6246],
        [6249, 6282, 6193, 6292, 6157, 6308, 6191, 6207, 6276, 6262],
        [6277, 6282, 6270, 6308, 6212, 6329, 6225, 6261, 6292, 6266],
        [6351, 6345, 6362, 6372, 6307, 6392, 6311, 6393, 6339, 6286],
    ],
    index=[r for r, _ in TRUTH_ROWS],
    columns=list(TRUTH_COLUMNS),
    dtype=float,
)


@dataclass(frozen=True)
class DGPConfig:
    """All structural coefficients of the generator.

    Logit coefficients are per 5 years of age (centred at 26) and per 500 g of
    birth weight (centred at 3450 g).  Duration coefficients are in days, outcome
    coefficients in grams.  Defaults are the calibrated values also stored in
    ``configs/dgp_calibrated.ini``.
    """

    n: int = 17044
    seed: int = 1
    config_version: str = "1"

    # baseline covariates (L1)
    age_mean: float = 26.0
    age_sd: float = 5.0
    age_min: float = 16.0
    age_max: float = 45.0
    p_urban: float = 0.6
    p_east: float = 0.5
    p_edu_low: float = 0.370033
    p_edu_int: float = 0.477159
    p_allergy: float = 0.15
    smoke_0: float = -2.0
    smoke_low: float = 0.8
    smoke_high: float = -0.8
    # birth covariates (L2)
    p_female: float = 0.49
    bw_mean: float = 3450.0
    bw_male: float = 120.0
    bw_smoke: float = -180.0
    bw_sd: float = 430.0
    bw_min: float = 1000.0
    bw_max: float = 5500.0
    caesar_0: float = -2.0
    caesar_age: float = 0.2
    caesar_bw: float = 0.3
    # programme uptake among the offered (logit)
    up_0: float = 0.165989
    up_age: float = 0.361692
    up_int: float = 0.602098
    up_high: float = 1.419362
    up_smoke: float = -0.466239
    # breastfeeding initiation (logit)
    in_0: float = -0.186198
    in_a2: float = 1.641267
    in_age: float = 0.954932
    in_int: float = 0.331763
    in_high: float = 0.728572
    in_smoke: float = -0.212841
    in_bw: float = 0.249791
    in_female: float = -0.093656
    # breastfeeding duration among initiators (days, before clipping to [1, 91])
    du_0: float = 56.127707
    du_a2: float = 20.759021
    du_age: float = 4.0
    du_int: float = 21.087454
    du_high: float = 31.084114
    du_smoke: float = -12.985449
    du_allergy: float = 5.0
    du_bw: float = 9.432552
    du_caesar: float = -6.0
    du_male: float = -4.0
    du_sd: float = 25.0
    # outcome without breastfeeding (grams)
    y_0: float = 5786.783019
    y_age: float = 10.0
    y_int: float = 101.488274
    y_high: float = 210.75633
    y_smoke: float = -30.150754
    y_bw: float = 1.18114  # grams at 3 months per gram at birth
    y_male: float = 150.0
    y_urban: float = 20.0
    y_east: float = -20.0
    y_caesar: float = -30.0
    y_allergy: float = -10.0
    y_sd: float = 100.0
    # breastfeeding effect: m(L) * (eff_start + eff_dur * d / 91)
    eff_start: float = 149.15157
    eff_dur: float = 418.066061
    mod_int: float = -0.254573
    mod_high: float = -0.685664
    mod_smoke: float = 0.480466
    mod_bw: float = -0.170257
    # unmeasured confounder U ~ N(0, 1); 0 means no unmeasured confounding
    unmeasured_confounding_strength: float = 0.0
    u_uptake: float = 1.0
    u_init: float = 1.0
    u_outcome: float = 100.0

    def validate(self) -> None:
        if self.n < 1:
            raise InvalidConfig("n must be at least 1")
        probs = [self.p_urban, self.p_east, self.p_allergy, self.p_female, self.p_edu_low, self.p_edu_int]
        if any(not 0 <= p <= 1 for p in probs) or self.p_edu_low + self.p_edu_int > 1:
            raise InvalidConfig("covariate probabilities must lie in [0, 1]")
        if min(self.age_sd, self.bw_sd, self.du_sd, self.y_sd) < 0:
            raise InvalidConfig("scale parameters must be non-negative")
        if self.unmeasured_confounding_strength < 0:
            raise InvalidConfig("unmeasured_confounding_strength must be non-negative")
        # qualitative structure of the exposure and outcome mechanisms
        signs = {
            "up_age": +1, "up_int": +1, "up_high": +1, "up_smoke": -1,
            "in_a2": +1, "in_age": +1, "in_int": +1, "in_high": +1, "in_smoke": -1,
            "in_bw": +1, "in_female": -1,
            "du_a2": +1, "du_age": +1, "du_int": +1, "du_high": +1, "du_allergy": +1,
            "du_bw": +1, "du_smoke": -1, "du_caesar": -1, "du_male": -1,
            "eff_dur": +1,
        }
        bad = [k for k, s in signs.items() if s * getattr(self, k) < 0]
        if self.up_high < self.up_int:
            bad.append("up_high<up_int")
        if bad:
            raise InvalidConfig(f"coefficient signs violate the assumed structure: {', '.join(bad)}")

    def replace(self, **changes) -> "DGPConfig":
        return dataclasses.replace(self, **changes)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        parser["dgp"] = {f.name: repr(getattr(self, f.name)) if f.type == "float" else str(getattr(self, f.name))
                         for f in fields(self)}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def digest(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()[:12]

    @classmethod
    def from_ini(cls, path, **overrides) -> "DGPConfig":
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as err:
            raise IoFailure(str(err)) from err
        section = parser["dgp"] if parser.has_section("dgp") else parser.defaults()
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for key, raw in section.items():
            if key not in types:
                raise InvalidConfig(f"unknown configuration key {key!r}")
            kind = types[key]
            values[key] = int(raw) if kind == "int" else raw.strip() if kind == "str" else float(raw)
        values.update(overrides)
        return cls(**values)


PRESETS = {
    "default": {},
    "null-effect": {"eff_start": 0.0, "eff_dur": 0.0},
}


def preset(name: str, **overrides) -> DGPConfig:
    if name not in PRESETS:
        raise InvalidConfig(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return DGPConfig(**{**PRESETS[name], **overrides})


def _expit(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _chunk_draws(seed: int, chunk: int):
    """Uniform and normal draws for one fixed-size block of record ids.

    The stream for a block is keyed by ``(seed, block index)`` so any block can be
    produced independently, in any order, on any thread.
    """
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, chunk])
    rng = np.random.Generator(np.random.Philox(ss))
    uni = rng.random((CHUNK, N_UNIFORM))
    nor = rng.standard_normal((CHUNK, N_NORMAL))
    return uni, nor


def simulate_block(cfg: DGPConfig, uni: np.ndarray, nor: np.ndarray) -> dict:
    """Apply the structural equations to a block of draws; returns column arrays."""
    s = cfg.unmeasured_confounding_strength
    U = nor[:, 4]

    age = np.clip(cfg.age_mean + cfg.age_sd * nor[:, 0], cfg.age_min, cfg.age_max)
    c_age = (age - AGE_REF) / AGE_SCALE
    urban = uni[:, 1] < cfg.p_urban
    east = uni[:, 2] < cfg.p_east
    edu = np.where(uni[:, 3] < cfg.p_edu_low, 0, np.where(uni[:, 3] < cfg.p_edu_low + cfg.p_edu_int, 1, 2))
    e_int = (edu == 1).astype(float)
    e_high = (edu == 2).astype(float)
    allergy = uni[:, 4] < cfg.p_allergy
    smoke = uni[:, 5] < _expit(cfg.smoke_0 + cfg.smoke_low * (edu == 0) + cfg.smoke_high * e_high)
    female = uni[:, 6] < cfg.p_female
    male = ~female
    bw = np.clip(cfg.bw_mean + cfg.bw_male * (male - 0.51) + cfg.bw_smoke * smoke + cfg.bw_sd * nor[:, 1],
                 cfg.bw_min, cfg.bw_max)
    z_bw = (bw - BW_REF) / BW_SCALE
    caesar = uni[:, 7] < _expit(cfg.caesar_0 + cfg.caesar_age * c_age + cfg.caesar_bw * z_bw)

    a1 = uni[:, 0] < 0.5
    p_up = _expit(cfg.up_0 + cfg.up_age * c_age + cfg.up_int * e_int + cfg.up_high * e_high
                  + cfg.up_smoke * smoke + s * cfg.u_uptake * U)
    a2_offer = uni[:, 8] < p_up

    eta_in = (cfg.in_0 + cfg.in_age * c_age + cfg.in_int * e_int + cfg.in_high * e_high
              + cfg.in_smoke * smoke + cfg.in_bw * z_bw + cfg.in_female * female + s * cfg.u_init * U)
    init0 = uni[:, 9] < _expit(eta_in)
    init1 = uni[:, 9] < _expit(eta_in + cfg.in_a2)

    mu_d = (cfg.du_0 + cfg.du_age * c_age + cfg.du_int * e_int + cfg.du_high * e_high
            + cfg.du_smoke * smoke + cfg.du_allergy * allergy + cfg.du_bw * z_bw
            + cfg.du_caesar * caesar + cfg.du_male * male + cfg.du_sd * nor[:, 2])
    dur0 = np.clip(mu_d, DUR_MIN, DUR_MAX)
    dur1 = np.clip(mu_d + cfg.du_a2, DUR_MIN, DUR_MAX)

    base = (cfg.y_0 + cfg.y_age * c_age + cfg.y_int * e_int + cfg.y_high * e_high + cfg.y_smoke * smoke
            + cfg.y_bw * (bw - BW_REF) + cfg.y_male * (male - 0.51) + cfg.y_urban * urban
            + cfg.y_east * east + cfg.y_caesar * caesar + cfg.y_allergy * allergy
            + cfg.y_sd * nor[:, 3] + s * cfg.u_outcome * U)
    mod = np.exp(cfg.mod_int * e_int + cfg.mod_high * e_high + cfg.mod_smoke * smoke + cfg.mod_bw * z_bw)

    def bf(dur):
        return base + mod * (cfg.eff_start + cfg.eff_dur * dur / DUR_MAX)

    y_a3_0 = base
    y_a1_0_a3_1 = bf(dur0)
    y_a2_1_a3_1 = bf(dur1)
    y_a1_1_a3_1 = np.where(a2_offer, y_a2_1_a3_1, y_a1_0_a3_1)
    y_a4_1 = bf(np.full_like(dur0, DUR_MAX))
    y_a1_0 = np.where(init0, y_a1_0_a3_1, base)
    y_a2_1 = np.where(init1, y_a2_1_a3_1, base)
    y_a1_1 = np.where(a2_offer, y_a2_1, y_a1_0)

    a2 = a1 & a2_offer
    a3 = np.where(a2, init1, init0)
    bfdur = np.where(a3, np.where(a2, dur1, dur0), 0.0)
    a4 = bfdur >= DUR_MAX
    y = np.where(a1, y_a1_1, y_a1_0)

    return {
        "age": age, "urban": urban, "east": east, "edu": edu, "allergy": allergy, "smoke": smoke,
        "female": female, "bweight": bw, "caesar": caesar,
        "a1": a1, "a2": a2, "a3": a3, "a4": a4, "bfdur": bfdur, "y": y,
        "y_a1_0": y_a1_0, "y_a1_1": y_a1_1, "y_a2_0": y_a1_0.copy(), "y_a2_1": y_a2_1,
        "y_a3_0": y_a3_0, "y_a1_0_a3_1": y_a1_0_a3_1, "y_a1_1_a3_1": y_a1_1_a3_1,
        "y_a2_1_a3_1": y_a2_1_a3_1, "y_a4_1": y_a4_1, "a2_offer": a2_offer, "u": U,
    }


def _frame(block: dict, start: int) -> pd.DataFrame:
    n = len(block["y"])
    cols = {"id": np.arange(start, start + n, dtype=np.int64)}
    for name in OBSERVED_COLUMNS[1:] + POTENTIAL_COLUMNS:
        v = block[name]
        cols[name] = v.astype(np.int8) if name in FLAG_COLUMNS else np.asarray(v, dtype=float)
    return pd.DataFrame(cols)


def generate(config: DGPConfig | None = None, workers: int | None = None) -> pd.DataFrame:
    """Generate ``config.n`` records, one row each, observed and potential columns.

    Rows are built block by block from counter-keyed streams, so the result is
    identical for any ``workers`` count and record ``i`` is the same for every
    ``n > i``.
    """
    cfg = config or DGPConfig()
    cfg.validate()
    if workers is None:
        workers = int(os.environ.get("CAUSALCHAIN_THREADS", "1") or 1)
    n_chunks = -(-cfg.n // CHUNK)

    def build(k):
        uni, nor = _chunk_draws(cfg.seed, k)
        rows = min(CHUNK, cfg.n - k * CHUNK)
        block = simulate_block(cfg, uni[:rows], nor[:rows])
        return _frame(block, k * CHUNK)

    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(build, range(n_chunks)))
    else:
        parts = [build(k) for k in range(n_chunks)]
    return pd.concat(parts, ignore_index=True) if len(parts) > 1 else parts[0]


# ---------------------------------------------------------------- record view


@dataclass(frozen=True)
class CovariateProfile:
    maternal_age: float
    urban: bool
    east_region: bool
    education: int
    allergy_history: bool
    smoked_in_pregnancy: bool
    infant_female: bool
    birth_weight: float
    caesarean: bool


@dataclass(frozen=True)
class ExposurePath:
    a1_offered: bool
    a2_followed: bool
    a3_started_bf: bool
    a4_full3months: bool
    bf_duration: float


@dataclass(frozen=True)
class PotentialOutcomeSet:
    y_a1_0: float
    y_a1_1: float
    y_a2_0: float
    y_a2_1: float
    y_a1_0_a3_0: float
    y_a1_0_a3_1: float
    y_a1_1_a3_1: float
    y_a2_1_a3_1: float
    y_a4_1: float
    a2_under_offer: bool


@dataclass(frozen=True)
class IndividualRecord:
    id: int
    covariates: CovariateProfile
    exposures: ExposurePath
    y_observed: float
    potentials: PotentialOutcomeSet | None = None
    u_hidden: float | None = None

    def consistent(self) -> bool:
        """Observed outcome equals the potential outcome selected by the realised path."""
        p = self.potentials
        if p is None:
            return True
        e = self.exposures
        selected = p.y_a1_1 if e.a1_offered else p.y_a1_0
        return selected == self.y_observed


def iter_records(df: pd.DataFrame):
    """Yield :class:`IndividualRecord` views of a generated or imported dataset."""
    has_pot = all(c in df.columns for c in POTENTIAL_COLUMNS)
    for row in df.itertuples(index=False):
        pots = None
        if has_pot:
            pots = PotentialOutcomeSet(row.y_a1_0, row.y_a1_1, row.y_a2_0, row.y_a2_1, row.y_a3_0,
                                       row.y_a1_0_a3_1, row.y_a1_1_a3_1, row.y_a2_1_a3_1, row.y_a4_1,
                                       bool(row.a2_offer))
        yield IndividualRecord(
            id=int(row.id),
            covariates=CovariateProfile(row.age, bool(row.urban), bool(row.east), int(row.edu),
                                        bool(row.allergy), bool(row.smoke), bool(row.female),
                                        row.bweight, bool(row.caesar)),
            exposures=ExposurePath(bool(row.a1), bool(row.a2), bool(row.a3), bool(row.a4), row.bfdur),
            y_observed=row.y,
            potentials=pots,
            u_hidden=row.u if has_pot else None,
        )


def consistency_violations(df: pd.DataFrame) -> int:
    selected = np.where(df["a1"] == 1, df["y_a1_1"], df["y_a1_0"])
    by_path = np.where(df["a3"] == 0, df["y_a3_0"],
                       np.where(df["a2"] == 1, df["y_a2_1_a3_1"],
                                np.where(df["a1"] == 1, df["y_a1_1_a3_1"], df["y_a1_0_a3_1"])))
    return int(np.sum(selected != df["y"]) + np.sum(by_path != df["y"]))


def chain_violations(df: pd.DataFrame) -> int:
    a1, a2, a3, a4 = (df[c].to_numpy() for c in ("a1", "a2", "a3", "a4"))
    dur = df["bfdur"].to_numpy()
    bad = (a2 > a1) | (a4 > a3) | ((dur == 0) != (a3 == 0)) | ((dur >= DUR_MAX) != (a4 == 1))
    return int(bad.sum())


# ---------------------------------------------------------------- truth


def truth_table(df: pd.DataFrame) -> pd.DataFrame:
    """Mean of each potential outcome in each subpopulation."""
    missing = [r for r, _ in TRUTH_ROWS if r not in df.columns]
    if missing:
        raise UnsupportedWorld(f"dataset lacks potential outcomes {missing}")
    rows = [r for r, _ in TRUTH_ROWS]
    values = df[rows].to_numpy()
    out = {}
    for name, select in TRUTH_COLUMNS.items():
        mask = np.asarray(select(df))
        if not mask.any():
            raise EmptySubpopulation(f"truth-table column {name!r} is empty")
        out[name] = values[mask].mean(axis=0)
    return pd.DataFrame(out, index=rows)


def _potential_pair(spec: EstimandSpec):
    """Columns (treated, reference) of the potential outcomes a spec contrasts."""
    world = spec.world_dict
    if spec.exposure == "A1":
        return "y_a1_1", "y_a1_0"
    if spec.exposure == "A2":
        return "y_a2_1", "y_a2_0"
    if spec.exposure == "A3":
        if world == {"a1": 0}:
            return "y_a1_0_a3_1", "y_a3_0"
        if world == {"a1": 1}:
            return "y_a1_1_a3_1", "y_a3_0"
        if world == {"a2": 1}:
            return "y_a2_1_a3_1", "y_a3_0"
        raise UnsupportedWorld(f"no potential outcome generated for A3 in world {world or 'unset'}")
    if spec.exposure == "A4":
        if world and world != {"a3": 1}:
            raise UnsupportedWorld(f"no potential outcome generated for A4 in world {world}")
        # full breastfeeding against none at all
        return "y_a4_1", "y_a3_0"
    raise UnsupportedWorld(spec.exposure)


def subpopulation_mask(df: pd.DataFrame, spec: EstimandSpec) -> np.ndarray:
    """Units over which the contrast of ``spec`` is averaged."""
    world = spec.world_dict
    mask = np.ones(len(df), dtype=bool)
    for key, value in spec.subpopulation:
        mask &= df[key].to_numpy() == value
    a = {k: df[k].to_numpy() for k in ("a1", "a2", "a3")}
    if spec.contrast == "CACE":
        if spec.exposure != "A2":
            raise UnsupportedWorld("compliance types are only generated for uptake of the offer")
        return mask & (df["a2_offer"].to_numpy() == 1)
    if spec.contrast == "ATE":
        return mask
    treated = spec.contrast == "ATT"
    if spec.exposure == "A1":
        return mask & (a["a1"] == int(treated))
    if spec.exposure == "A2":
        return mask & (a["a2"] == 1) if treated else mask & (a["a1"] == 1) & (a["a2"] == 0)
    if spec.exposure == "A3":
        if "a1" in world:
            mask &= a["a1"] == world["a1"]
        elif "a2" in world:
            mask &= a["a2"] == 1
        return mask & (a["a3"] == int(treated))
    if spec.exposure == "A4":
        return mask & (df["a4"].to_numpy() == int(treated)) & (a["a3"] == 1)
    raise UnsupportedWorld(spec.exposure)


def true_contrast(df: pd.DataFrame, spec: EstimandSpec) -> float:
    """Mean difference of the two potential outcomes ``spec`` contrasts, in grams."""
    treated, reference = _potential_pair(spec)
    if treated not in df.columns or reference not in df.columns:
        raise UnsupportedWorld("dataset carries no potential outcomes")
    mask = subpopulation_mask(df, spec)
    if not mask.any():
        raise EmptySubpopulation(f"no units in the subpopulation of {spec.label}")
    return float(np.mean(df[treated].to_numpy()[mask] - df[reference].to_numpy()[mask]))


def classify_compliance(record: IndividualRecord) -> str:
    """Compliance type with respect to the offer.

    Uptake is impossible without an offer, so always-takers and defiers cannot
    occur: a unit is a complier exactly when she would follow the programme if
    offered.
    """
    return "complier" if record.potentials.a2_under_offer else "never_taker"


# ---------------------------------------------------------------- CSV


def export(df: pd.DataFrame, path, include_potentials: bool = True) -> Path:
    """Write the dataset as UTF-8 CSV; drop simulator-only columns on request."""
    cols = list(OBSERVED_COLUMNS)
    if include_potentials:
        cols += POTENTIAL_COLUMNS
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise UnsupportedWorld(f"cannot export, dataset lacks {missing}")
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(cols) + "\n")
            # float columns use repr so every double round-trips exactly
            formatted = []
            for c in cols:
                v = df[c].to_numpy()
                if c == "id" or c in FLAG_COLUMNS:
                    formatted.append(v.astype(np.int64).astype(str))
                else:
                    formatted.append(np.array([repr(x) for x in v.astype(float).tolist()], dtype=object))
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerows(zip(*formatted))
    except OSError as err:
        raise IoFailure(str(err)) from err
    return path


def load(path) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.EmptyDataError) as err:
        raise IoFailure(str(err)) from err
    for c in df.columns:
        if c in FLAG_COLUMNS:
            df[c] = df[c].astype(np.int8)
    return df

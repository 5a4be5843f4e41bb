"""End-to-end acceptance checks; each prints one PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v -s``.  Every dataset
uses seed 1 unless a check needs many replications, which use seeds 1..100.
"""
import time
import warnings

import numpy as np
import pytest

from causalchain import battery as bt
from causalchain import cli
from causalchain import iv_estimators as iv
from causalchain import nuc_estimators as nuc
from causalchain import propensity as ps
from causalchain import simlearner as sl
from causalchain.estimands import DEFAULT_CONFOUNDERS, EstimandSpec, resolve
from causalchain.inference import BootstrapPlan, bootstrap_se
from causalchain.reference_tables import DERIVED_CONTRASTS, TABLE5, TABLE6

from conftest import F8, FIV, make_frame

SEED = 1
ANALYSIS_N = 17044


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, f"{name}: {detail}"
    return emit


def _derived(df):
    """The ten headline contrasts from per-record potentials (overall population)."""
    m = lambda col, sel=None: df[col].mean() if sel is None else df.loc[sel, col].mean()
    a2, a3, a1 = df["a2"] == 1, df["a3"] == 1, df["a1"] == 1
    return {
        "ATE_1": m("y_a1_1") - m("y_a1_0"),
        "ATE_2": m("y_a2_1") - m("y_a2_0"),
        "ATT_2": m("y_a2_1", a2) - m("y_a2_0", a2),
        "ATNT_2": m("y_a2_1", a1 & ~a2) - m("y_a2_0", a1 & ~a2),
        "ATE_3 a1(0)": m("y_a1_0_a3_1") - m("y_a3_0"),
        "ATE_3 a1(1)": m("y_a1_1_a3_1") - m("y_a3_0"),
        "ATE_3 a2(1)": m("y_a2_1_a3_1") - m("y_a3_0"),
        "ATT_3 a1(1)": m("y_a1_1_a3_1", a1 & a3) - m("y_a3_0", a1 & a3),
        "ATT_3 a1(0)": m("y_a1_0_a3_1", ~a1 & a3) - m("y_a3_0", ~a1 & a3),
        "ATE_4 a3(1)": m("y_a4_1") - m("y_a3_0"),
    }


def test_c1_truth_table_reproduction(verdict):
    t0 = time.perf_counter()
    df = sl.generate(sl.DGPConfig(n=5_000_000, seed=SEED), workers=1)
    table = sl.truth_table(df)
    elapsed = time.perf_counter() - t0
    cell_dev = (table["overall"] - sl.TARGET_TRUTH["overall"]).abs().max()
    derived = _derived(df)
    contrast_dev = max(abs(derived[k] - v) for k, v in DERIVED_CONTRASTS.items())
    ok = cell_dev <= 5 and contrast_dev <= 5 and elapsed < 300
    verdict("C1 truth table (n=5e6)", ok,
            f"max overall-cell dev {cell_dev:.2f} g, max contrast dev {contrast_dev:.2f} g, {elapsed:.1f} s")


def test_c2_randomised_offer_coverage(verdict):
    t0 = time.perf_counter()
    covered = []
    for seed in range(1, 101):
        df = sl.generate(sl.DGPConfig(n=ANALYSIS_N, seed=seed))
        r = nuc.crude(resolve(EstimandSpec("ATE", "A1"), df))
        covered.append(r.ci95[0] <= DERIVED_CONTRASTS["ATE_1"] <= r.ci95[1])
    elapsed = time.perf_counter() - t0
    rate = np.mean(covered)
    verdict("C2 crude A1 coverage", rate >= 0.93 and elapsed < 120,
            f"{rate:.0%} of 100 CIs cover 98 g, {elapsed:.1f} s")


def _band_failures(rows, table, iv_key):
    """Rows outside 3 published SEs of the published value or 3 own SEs of truth."""
    table = {(EstimandSpec.from_string(e).to_string(), m): v for (e, m), v in table.items()}
    failures, checked = [], 0
    for row in rows:
        d = row.as_dict()
        key = (d["estimand"], iv_key if row.method.startswith("iv_") else row.method)
        if row.error:
            if row.method.startswith("iv_") and not row.spec.exposure == "A2":
                continue  # instruments are illegal in this world by construction
            failures.append(f"{key}: {row.error}")
            continue
        if key not in table and iv_key in key:
            key = (key[0].replace("ATT", "ATE"), iv_key)
        if key in table:
            ref, ref_se = table[key]
            checked += 1
            if abs(d["estimate"] - ref) > 3 * ref_se:
                failures.append(f"{key}: {d['estimate']:.1f} vs published {ref} (3 SE = {3 * ref_se:.1f})")
        if row.method == "crude":
            continue  # confounded by design; compared with the published value only
        if not abs(d["estimate"] - d["truth"]) <= 3 * d["se"]:
            failures.append(f"{key}: {d['estimate']:.1f} vs truth {d['truth']:.1f} (3 SE = {3 * d['se']:.1f})")
    return failures, checked


def test_c3_table5_battery(verdict, calibrated):
    t0 = time.perf_counter()
    rows = bt.run_battery(calibrated, bt.preset_items("table5"), bt.BatteryConfig(B=1000))
    elapsed = time.perf_counter() - t0
    failures, checked = _band_failures(rows, TABLE5, "iv")
    verdict("C3 Table 5 battery", not failures and elapsed < 300,
            f"{len(rows)} rows, {checked} published comparisons, {elapsed:.1f} s"
            + ("; " + "; ".join(failures) if failures else ""))


def test_c4_table6_battery(verdict, calibrated):
    t0 = time.perf_counter()
    rows = bt.run_battery(calibrated, bt.preset_items("table6"), bt.BatteryConfig(B=1000))
    elapsed = time.perf_counter() - t0
    failures, checked = _band_failures(rows, TABLE6, "iv")
    illegal = [r for r in rows if r.method == "iv_wald"]
    ok = not failures and all("IllegalWorld" in r.error for r in illegal)
    verdict("C4 Table 6 battery", ok,
            f"{len(rows)} rows, {checked} published comparisons, {elapsed:.1f} s"
            + ("; " + "; ".join(failures) if failures else ""))


def test_c5_oracle_suite(verdict):
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fr = make_frame(F8[:, 2], F8[:, 1], F8[:, 0], ["L"])
        att = make_frame(F8[:, 2], F8[:, 1], F8[:, 0], ["L"], contrast="ATT")
        fit = ps.fit_ps(fr)
        strata = ps.stratify_by_ps(fit, 2)
        ate_values = {
            "or_ate": nuc.or_ate(fr).estimate,
            "stratification_ate": nuc.stratification_ate(fr, strata).estimate,
            "ht_ipw": nuc.ipw(fr, ps.make_weights(fit, kind="ate_unstabilized"), form="ht").estimate,
            "aipw": nuc.aipw(fr, fit, nuc.fit_outcome_model(fr)).estimate,
            "matching_ties_all": nuc.matching(fr, fit, nuc.MatchConfig(ties="all")).estimate,
        }
        att_values = {
            "or_att": nuc.or_att(att).estimate,
            "stratification_att": nuc.stratification_att(att, strata).estimate,
            "ht_ipw_att": nuc.ipw(att, ps.make_weights(fit, kind="att_unstabilized"), "ATT", form="ht").estimate,
            "hajek_ipw_att": nuc.ipw(att, ps.make_weights(fit, kind="att_stabilized"), "ATT").estimate,
            "matching_att": nuc.matching(att, fit, nuc.MatchConfig(ties="all"), target="ATT").estimate,
        }
        fiv = iv.IVFrame(EstimandSpec("ATE", "A2", instrument="a1"), FIV[:, 2], FIV[:, 1], FIV[:, 0])
        iv_values = {"wald": iv.wald(fiv).estimate, "tsls": iv.tsls(fiv).estimate,
                     "smm_att": iv.smm_att(fiv).estimate}
    elapsed = time.perf_counter() - t0
    dev = max([abs(v - 6.0) for v in ate_values.values()] + [abs(v - 6.4) for v in att_values.values()]
              + [abs(v - 6.0) for v in iv_values.values()])
    verdict("C5 oracle suite", dev <= 1e-10 and elapsed < 1, f"max deviation {dev:.2e}, {elapsed:.3f} s")


def test_c6_double_robustness(verdict):
    df = sl.generate(sl.DGPConfig(n=100_000, seed=SEED))
    spec = EstimandSpec("ATE", "A2")
    truth = sl.true_contrast(df, spec)
    full = resolve(spec, df)
    no_edu = [c for c in DEFAULT_CONFOUNDERS["A2"] if c != "edu"]
    short = resolve(spec, df, confounders=no_edu)
    plan = BootstrapPlan(B=200, base_seed=SEED)
    lines, ok = [], True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")

        def aipw_ps_wrong(f):
            return nuc.aipw(f, ps.fit_ps(f, L=f.L[:, _cols(full, no_edu)]), nuc.fit_outcome_model(f)).estimate

        def aipw_or_wrong(f):
            Ls = f.L[:, _cols(full, no_edu)]
            return nuc.aipw(f, ps.fit_ps(f), nuc.fit_outcome_model(f, L=Ls, labels=short.L_labels), L=Ls).estimate

        for name, dr, single in (
            ("PS omits edu", aipw_ps_wrong,
             lambda: nuc.ipw(full, ps.make_weights(ps.fit_ps(short), kind="ate_stabilized"))),
            ("outcome model omits edu", aipw_or_wrong, lambda: nuc.or_ate(short)),
        ):
            est = dr(full)
            se, _ = bootstrap_se(dr, full, plan)
            s = single()
            dr_ok = abs(est - truth) <= 3 * se
            single_off = abs(s.estimate - truth) > 3 * s.se
            ok &= dr_ok and single_off
            lines.append(f"{name}: AIPW {est:.1f} (SE {se:.1f}), {s.method} {s.estimate:.1f} "
                         f"(SE {s.se:.1f}), truth {truth:.1f}")
    verdict("C6 double robustness (n=1e5)", ok, "; ".join(lines))


def _cols(frame, keep):
    """Columns of ``frame.L`` that belong to the confounders in ``keep``."""
    return [j for j, lab in enumerate(frame.L_labels) if lab.split("=")[0].split("^")[0] in keep]


def test_c7_unmeasured_confounding(verdict):
    # strength 1.0 is the smallest round value whose NUC bias clears 30 g
    df = sl.generate(sl.DGPConfig(n=100_000, seed=SEED, unmeasured_confounding_strength=1.0))
    spec = EstimandSpec("ATT", "A2")
    truth = sl.true_contrast(df, spec)
    fr = resolve(spec, df)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = ps.fit_ps(fr)
        w = nuc.ipw(fr, ps.make_weights(fit, kind="att_stabilized"), "ATT")
        o = nuc.or_att(fr)
        smm = iv.smm_att(iv.IVFrame(EstimandSpec("ATT", "A2", instrument="a1"), fr.y, fr.a,
                                    df["a1"].to_numpy(float)))
    bias = min(abs(w.estimate - truth), abs(o.estimate - truth))
    ok = (bias > 30 and abs(w.estimate - truth) > 3 * w.se and abs(o.estimate - truth) > 3 * o.se
          and abs(smm.estimate - truth) <= 3 * smm.se)
    verdict("C7 unmeasured confounding", ok,
            f"truth {truth:.1f}; IPW {w.estimate:.1f} (SE {w.se:.1f}); OR {o.estimate:.1f} (SE {o.se:.1f}); "
            f"SMM {smm.estimate:.1f} (SE {smm.se:.1f})")


def test_c8_balance_and_overlap(verdict, calibrated):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a2 = resolve(EstimandSpec("ATE", "A2"), calibrated)
        fit2 = ps.fit_ps(a2)
        smd = ps.balance_check(a2, weights=ps.make_weights(fit2, kind="ate_stabilized"))["smd_after"].abs().max()
        ovl2 = ps.overlap_check(fit2).overlap_coefficient
        ovl3 = {w: ps.overlap_check(ps.fit_ps(resolve(EstimandSpec("ATE", "A3", {"a1": w}), calibrated)))
                .overlap_coefficient for w in (0, 1)}
    ok = smd < 0.05 and all(v < ovl2 for v in ovl3.values())
    verdict("C8 balance and overlap", ok,
            f"max |SMD| after weighting {smd:.4f}; overlap A2 {ovl2:.3f}, "
            f"A3 a1(0) {ovl3[0]:.3f}, A3 a1(1) {ovl3[1]:.3f}")


def test_c9_determinism(verdict, tmp_path):
    def run_all(tag, threads):
        d = tmp_path / tag
        d.mkdir()
        common = ["--threads", threads]
        cmds = [
            ["generate", "--n", str(ANALYSIS_N), "--seed", str(SEED), "--potentials",
             "--out", str(d / "data.csv"), *common],
            ["truth", "--data", str(d / "data.csv"), "--out", str(d / "truth.csv")],
            ["estimate", "--data", str(d / "data.csv"), "--preset", "table5", "--B", "50",
             "--seed", "7", "--out", str(d / "results.csv"), *common],
            ["balance", "--data", str(d / "data.csv"), "--estimand", "ATE:A2", "--out", str(d / "balance.csv"),
             "--overlap-out", str(d / "overlap.csv")],
            ["report", "--results", str(d / "results.csv"), "--truth", str(d / "truth.csv"),
             "--balance", str(d / "balance.csv"), "--out", str(d / "report.md")],
        ]
        for c in cmds:
            assert cli.main(c) == 0, c
        return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    runs = [run_all("a", "1"), run_all("b", "1"), run_all("c", "4")]
    differing = sorted({k for r in runs[1:] for k in r if r[k] != runs[0][k]})
    verdict("C9 determinism", not differing and len(runs[0]) == 6,
            f"{len(runs[0])} output files compared across 3 runs (1, 1, 4 threads)"
            + (f"; differing: {differing}" if differing else ""))

import subprocess
import sys

import pandas as pd
import pytest

from causalchain import cli
from causalchain.errors import EmptyInput


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "d.csv"
    assert cli.main(["generate", "--n", "4000", "--seed", "3", "--out", str(out), "--potentials"]) == 0
    return out


def test_generate_writes_requested_rows(dataset, tmp_path):
    assert len(pd.read_csv(dataset)) == 4000
    obs = tmp_path / "o.csv"
    cli.main(["generate", "--n", "10", "--seed", "3", "--out", str(obs)])
    assert not any(c.startswith("y_a") for c in pd.read_csv(obs).columns)


def test_null_effect_truth_is_flat(tmp_path):
    out = tmp_path / "t.csv"
    assert cli.main(["truth", "--preset", "null-effect", "--n", "2000", "--seed", "4", "--out", str(out)]) == 0
    table = pd.read_csv(out).set_index("potential_outcome")
    assert (table.nunique(axis=0) == 1).all()


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CAUSALCHAIN_SEED", "12")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    cli.main(["generate", "--n", "50", "--out", str(a)])
    cli.main(["generate", "--n", "50", "--seed", "12", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_estimate_is_byte_identical_across_runs_and_threads(dataset, tmp_path):
    outs = []
    for i, threads in enumerate(["1", "1", "4"]):
        out = tmp_path / f"r{i}.csv"
        code = cli.main(["estimate", "--data", str(dataset), "--estimand", "ATE:A2",
                         "--methods", "crude,or_interactions,ps_ipw,ps_matching_1,iv_wald",
                         "--B", "40", "--threads", threads, "--out", str(out)])
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    res = pd.read_csv(tmp_path / "r0.csv")
    assert list(res.columns) == cli.bt.RESULT_COLUMNS
    assert res["method"].iloc[0] == cli.bt.LABELS["crude"]
    assert res["truth"].notna().all()


def test_illegal_iv_world_becomes_error_row(dataset, tmp_path):
    out = tmp_path / "r.csv"
    assert cli.main(["estimate", "--data", str(dataset), "--estimand", "ATE:A3:a1=0",
                     "--methods", "crude,iv_wald", "--B", "5", "--out", str(out)]) == 0
    res = pd.read_csv(out)
    row = res[res["method"] == "IV (Wald)"].iloc[0]
    assert "IllegalWorld" in str(row["error"])
    assert pd.isna(row["estimate"])


def test_unknown_method_rejected(dataset, capsys):
    code = cli.main(["estimate", "--data", str(dataset), "--estimand", "ATE:A2", "--methods", "magic"])
    assert code == 1
    assert "unknown method" in capsys.readouterr().err


def test_battery_config_file(dataset, tmp_path):
    cfg = tmp_path / "b.ini"
    cfg.write_text("[battery]\nB = 10\nseed = 5\n\n[estimand ATT:A2]\nmethods = crude, ps_stratification\n")
    out = tmp_path / "r.csv"
    assert cli.main(["estimate", "--data", str(dataset), "--battery-config", str(cfg), "--out", str(out)]) == 0
    res = pd.read_csv(out)
    assert len(res) == 2 and res["se_method"].iloc[1] == "bootstrap"


def test_balance_and_report(dataset, tmp_path):
    bal, ovl, res, truth, rep = (tmp_path / f for f in ("b.csv", "o.csv", "r.csv", "t.csv", "rep.md"))
    assert cli.main(["balance", "--data", str(dataset), "--estimand", "ATE:A2", "--out", str(bal),
                     "--overlap-out", str(ovl)]) == 0
    assert "smd_after" in pd.read_csv(bal).columns
    assert "overlap_coefficient" in pd.read_csv(ovl).columns
    cli.main(["estimate", "--data", str(dataset), "--estimand", "ATE:A3:a1=0", "--methods", "crude,iv_wald",
              "--B", "5", "--out", str(res)])
    cli.main(["truth", "--data", str(dataset), "--out", str(truth)])
    assert cli.main(["report", "--results", str(res), "--truth", str(truth), "--balance", str(bal),
                     "--out", str(rep)]) == 0
    text = rep.read_text()
    assert "## Estimates" in text and "## Truth table" in text and "—" in text


def test_report_rejects_empty_results(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(EmptyInput):
        cli.render_report(pd.DataFrame())
    assert cli.main(["report", "--results", str(empty)]) == 1


def test_missing_file_and_module_entry_point(tmp_path):
    assert cli.main(["estimate", "--data", str(tmp_path / "nope.csv"), "--estimand", "ATE:A2"]) == 1
    proc = subprocess.run([sys.executable, "-m", "causalchain", "truth", "--data", str(tmp_path / "x.csv")],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "error:" in proc.stderr

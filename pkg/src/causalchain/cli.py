"""Command-line interface: ``python -m causalchain <command> ...``.

Commands: generate, truth, estimate, balance, report.  Every numeric output is
written with at least ten significant digits; the environment variables
``CAUSALCHAIN_SEED`` and ``CAUSALCHAIN_THREADS`` supply defaults for ``--seed``
and ``--threads``.
"""
from __future__ import annotations

import argparse
import configparser
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from . import battery as bt
from . import propensity as ps
from . import simlearner as sl
from .errors import CausalChainError, EmptyInput, InvalidConfig, IoFailure
from .estimands import EstimandSpec, resolve

FLOAT_FORMAT = "%.10g"
COMMANDS = ("generate", "truth", "estimate", "balance", "report")


@dataclass
class RunConfig:
    command: str
    data: Path | None = None
    config: Path | None = None
    estimands: list = field(default_factory=list)  # [(EstimandSpec, [method, ...])]
    out: Path | None = None
    seed: int | None = None
    B: int = 1000
    threads: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        for spec, methods in self.estimands:
            bt.validate_methods(methods)
        for p in (self.data, self.config):
            if p is not None and not Path(p).is_file():
                raise IoFailure(f"no such file: {p}")
        if self.out is not None and not Path(self.out).resolve().parent.is_dir():
            raise IoFailure(f"output directory does not exist: {Path(self.out).parent}")


def _env_int(name, default):
    raw = os.environ.get(name)
    return int(raw) if raw not in (None, "") else default


def _write_csv(df: pd.DataFrame, out):
    try:
        if out is None:
            df.to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        else:
            df.to_csv(out, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as err:
        raise IoFailure(str(err)) from err


def _dgp_config(args) -> sl.DGPConfig:
    overrides = {}
    if args.n is not None:
        overrides["n"] = args.n
    seed = args.seed if args.seed is not None else _env_int("CAUSALCHAIN_SEED", None)
    if seed is not None:
        overrides["seed"] = seed
    if args.config:
        cfg = sl.DGPConfig.from_ini(args.config, **overrides)
        if args.preset != "default":
            cfg = cfg.replace(**sl.PRESETS[args.preset])
        return cfg
    return sl.preset(args.preset, **overrides)


# ---------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    cfg = _dgp_config(args)
    df = sl.generate(cfg, workers=args.threads)
    sl.export(df, args.out, include_potentials=args.potentials)
    print(f"n={cfg.n} seed={cfg.seed} config={cfg.digest()} out={args.out}")
    return 0


def cmd_truth(args) -> int:
    if args.data:
        df = sl.load(args.data)
    else:
        df = sl.generate(_dgp_config(args), workers=args.threads)
    table = sl.truth_table(df)
    table.index.name = "potential_outcome"
    out = table.reset_index()
    _write_csv(out, args.out)
    return 0


def load_battery_config(path) -> tuple[list, dict]:
    """Estimands and settings from a battery file.

    ``[battery]`` holds ``B`` and ``seed``; each ``[estimand <spec>]`` section lists
    its ``methods`` in output order, or names a ``preset``.
    """
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as err:
        raise IoFailure(str(err)) from err
    settings = dict(parser["battery"]) if parser.has_section("battery") else {}
    items = []
    for section in parser.sections():
        if section == "battery":
            continue
        kind, _, spec_text = section.partition(" ")
        if kind == "preset":
            items += bt.preset_items(spec_text.strip())
            continue
        if kind != "estimand" or not spec_text:
            raise InvalidConfig(f"unknown battery section [{section}]")
        methods = [m.strip() for m in parser[section].get("methods", "").split(",") if m.strip()]
        items.append((spec_text.strip(), methods))
    return items, settings


def _estimand_items(args):
    items, settings = [], {}
    if args.battery_config:
        items, settings = load_battery_config(args.battery_config)
    if args.preset:
        items += bt.preset_items(args.preset)
    methods = [m.strip() for m in (args.methods or "").split(",") if m.strip()]
    for text in args.estimand or []:
        items.append((text, methods or ["crude"]))
    if not items:
        raise InvalidConfig("nothing to estimate: give --preset, --estimand or --battery-config")
    return [(EstimandSpec.from_string(s) if isinstance(s, str) else s, m) for s, m in items], settings


def cmd_estimate(args) -> int:
    items, settings = _estimand_items(args)
    B = args.B if args.B is not None else int(settings.get("b", 1000))
    seed = args.seed if args.seed is not None else _env_int("CAUSALCHAIN_SEED", int(settings.get("seed", 20240101)))
    run = RunConfig("estimate", data=Path(args.data), estimands=items, out=args.out and Path(args.out),
                    seed=seed, B=B, threads=args.threads)
    df = sl.load(run.data)
    rows = bt.run_battery(df, run.estimands, bt.BatteryConfig(B=run.B, base_seed=run.seed, workers=run.threads))
    _write_csv(bt.results_frame(rows), run.out)
    failed = sum(1 for r in rows if r.error)
    print(f"{len(rows)} rows, {failed} with errors", file=sys.stderr)
    return 0


def cmd_balance(args) -> int:
    df = sl.load(args.data)
    spec = EstimandSpec.from_string(args.estimand)
    frame = resolve(spec, df)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = ps.fit_ps(frame)
    kind = args.weights or ("att_stabilized" if spec.contrast == "ATT" else "ate_stabilized")
    if args.strata:
        table = ps.balance_check(frame, strata=ps.stratify_by_ps(fit, args.strata))
        adjustment = f"strata={args.strata}"
    else:
        table = ps.balance_check(frame, weights=ps.make_weights(fit, kind=kind))
        adjustment = kind
    table.insert(0, "adjustment", adjustment)
    table.insert(0, "estimand", spec.to_string())
    overlap = ps.overlap_check(fit)
    _write_csv(table, args.out)
    if args.overlap_out:
        o = overlap.to_frame().reset_index()
        o.insert(0, "estimand", spec.to_string())
        _write_csv(o, args.overlap_out)
    print(f"max |SMD| after: {table['smd_after'].abs().max():.6g}; "
          f"outside common support: {overlap.fraction_outside:.6g}; "
          f"overlap coefficient: {overlap.overlap_coefficient:.6g}", file=sys.stderr)
    return 0


def _fmt(x, digits=6) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "—"
    return f"{x:.{digits}g}"


def render_report(results: pd.DataFrame, truth: pd.DataFrame | None = None,
                  balance: pd.DataFrame | None = None) -> str:
    """Markdown tables of the battery, with truth and 3-SE deviation flags."""
    if results.empty:
        raise EmptyInput("results file has no rows")
    lines = []
    if truth is not None and not truth.empty:
        lines += ["## Truth table", "", "| potential outcome | " + " | ".join(truth.columns[1:]) + " |",
                  "|---" * len(truth.columns) + "|"]
        for _, r in truth.iterrows():
            lines.append(f"| {r.iloc[0]} | " + " | ".join(_fmt(v) for v in r.iloc[1:]) + " |")
        lines.append("")
    lines += ["## Estimates", "",
              "| estimand | method | estimate | SE | SE method | truth | flag | error |",
              "|---|---|---|---|---|---|---|---|"]
    flags = 0
    for _, r in results.iterrows():
        truth_v = r.get("truth", math.nan)
        truth_v = math.nan if pd.isna(truth_v) else float(truth_v)
        flag = ""
        if not math.isnan(truth_v) and not pd.isna(r["se"]) and not pd.isna(r["estimate"]):
            if abs(r["estimate"] - truth_v) > 3 * r["se"]:
                flag, flags = ">3 SE", flags + 1
        err = "" if pd.isna(r.get("error", "")) else str(r.get("error", ""))
        lines.append(f"| {r['estimand']} | {r['method']} | {_fmt(float(r['estimate']))} | "
                     f"{_fmt(float(r['se']))} | {'' if pd.isna(r['se_method']) else r['se_method']} | "
                     f"{_fmt(truth_v)} | {flag} | {err} |")
    errors = int(results["error"].fillna("").astype(str).str.len().gt(0).sum()) if "error" in results else 0
    lines += ["", f"{len(results)} rows, {flags} flagged beyond 3 SE of truth, {errors} with errors", ""]
    if balance is not None and not balance.empty:
        lines += ["## Balance", "", "| " + " | ".join(balance.columns) + " |", "|---" * len(balance.columns) + "|"]
        for _, r in balance.iterrows():
            lines.append("| " + " | ".join(_fmt(v) if isinstance(v, float) else str(v) for v in r) + " |")
        lines.append("")
    return "\n".join(lines)


def _read_csv(path):
    try:
        return pd.read_csv(path, float_precision="round_trip", keep_default_na=True)
    except pd.errors.EmptyDataError:
        return pd.DataFrame()
    except OSError as err:
        raise IoFailure(str(err)) from err


def cmd_report(args) -> int:
    frames = [_read_csv(p) for p in args.results]
    frames = [f for f in frames if not f.empty]
    results = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()
    truth = _read_csv(args.truth) if args.truth else None
    balance = _read_csv(args.balance) if args.balance else None
    text = render_report(results, truth, balance)
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as err:
            raise IoFailure(str(err)) from err
    else:
        print(text)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="causalchain", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    threads = _env_int("CAUSALCHAIN_THREADS", 1)

    def dgp_flags(q):
        q.add_argument("--n", type=int)
        q.add_argument("--seed", type=int)
        q.add_argument("--preset", default="default", choices=sorted(sl.PRESETS))
        q.add_argument("--config", help="INI file with a [dgp] section")
        q.add_argument("--threads", type=int, default=threads)

    g = sub.add_parser("generate", help="simulate a dataset and write it as CSV")
    dgp_flags(g)
    g.add_argument("--out", required=True)
    g.add_argument("--potentials", action="store_true", help="include simulator-only columns")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("truth", help="truth table from a dataset with potentials, or simulated in memory")
    dgp_flags(t)
    t.add_argument("--data")
    t.add_argument("--out")
    t.set_defaults(func=cmd_truth)

    e = sub.add_parser("estimate", help="run an estimator battery")
    e.add_argument("--data", required=True)
    e.add_argument("--preset", choices=sorted(bt.PRESETS))
    e.add_argument("--estimand", action="append", help="e.g. ATE:A2 or ATT:A3:a1=1")
    e.add_argument("--methods", help=f"comma-separated from: {', '.join(bt.METHODS)}")
    e.add_argument("--battery-config")
    e.add_argument("--B", type=int)
    e.add_argument("--seed", type=int, help="bootstrap base seed")
    e.add_argument("--threads", type=int, default=threads)
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    b = sub.add_parser("balance", help="balance and overlap diagnostics for one estimand")
    b.add_argument("--data", required=True)
    b.add_argument("--estimand", required=True)
    b.add_argument("--weights", choices=ps.WEIGHT_KINDS)
    b.add_argument("--strata", type=int)
    b.add_argument("--out")
    b.add_argument("--overlap-out")
    b.set_defaults(func=cmd_balance)

    r = sub.add_parser("report", help="render results (and truth/balance) as markdown")
    r.add_argument("--results", nargs="+", required=True)
    r.add_argument("--truth")
    r.add_argument("--balance")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CausalChainError, ValueError) as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

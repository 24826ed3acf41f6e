"""Command-line front end.

Exit codes: 0 success, 2 user or validation error, 3 degenerate data,
4 internal error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
import traceback
from pathlib import Path

from timatch.config import ConfigError, RunConfig
from timatch.dataset import Dataset, load_csv, write_csv
from timatch.errors import DegenerateDataError, SchemaError, ValidationError
from timatch.imbalance import compute_l1, default_binning
from timatch.pipeline import run_pipeline
from timatch.reports import (
    benchmark_report_dict,
    estimate_report_dict,
    match_report_dict,
    write_json,
    write_rows_csv,
)
from timatch.simulate import REPLICATE_FIELDS, generate, generate_survey, run_benchmark, scenario

log = logging.getLogger("timatch")

EXIT_OK, EXIT_USER, EXIT_DEGENERATE, EXIT_INTERNAL = 0, 2, 3, 4


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for attr, key in (
        ("input", "input"),
        ("schema", "schema"),
        ("out", "output_dir"),
        ("seed", "seed"),
        ("threads", "threads"),
        ("scenario", "scenario"),
        ("reps", "replicates"),
        ("n", "n"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def _load(cfg: RunConfig) -> Dataset:
    if not cfg.input:
        raise ConfigError("no input CSV given (config key 'input' or --input)")
    if not Path(cfg.input).exists():
        raise ConfigError(f"input file not found: {cfg.input}")
    return load_csv(cfg.input, cfg.resolved_schema())


def cmd_match(args) -> int:
    cfg = _config(args)
    ds = _load(cfg)
    report = run_pipeline(ds, cfg.pipeline_options(), estimate=False)
    if not report.match.strata:
        raise DegenerateDataError("no matched strata")
    out = Path(cfg.output_dir) / "match_report.json"
    write_json(match_report_dict(ds, report, cfg.to_dict(), cfg.seed), out)
    print(f"T_f={report.match.t_fraction:.4f} strata={len(report.match.strata)} -> {out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = _config(args)
    ds = _load(cfg)
    report = run_pipeline(ds, cfg.pipeline_options(), estimate=True)
    outdir = Path(cfg.output_dir)
    doc = estimate_report_dict(ds, report, cfg.to_dict(), cfg.seed)
    write_json(doc, outdir / "estimate_report.json")
    write_rows_csv(
        doc["estimate"]["per_stratum"],
        ("stratum_id", "cate", "total_weight", "m_treated", "m_control"),
        outdir / "per_stratum.csv",
    )
    s = doc["summary"]
    print(
        f"CATE={s['cate']:.6g} naive={s['naive_dim']:.6g} T_f={s['Tf']:.4f} "
        f"L1={s['L1']:.4f} L1m={s['L1m']:.4f} -> {outdir / 'estimate_report.json'}"
    )
    return EXIT_OK


def _scenario_spec(cfg: RunConfig, seed):
    if not cfg.scenario:
        raise ConfigError("no scenario given (--scenario)")
    try:
        spec = scenario(cfg.scenario, seed=seed, confounding=cfg.confounding)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    overrides = {"treatment_effect": cfg.treatment_effect}
    if cfg.n is not None:
        overrides["n"] = cfg.n
    return spec.__class__(**{**spec.__dict__, **overrides})


def cmd_simulate(args) -> int:
    cfg = _config(args)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    if cfg.scenario and cfg.scenario.upper() == "SURVEY":
        ds = generate_survey(cfg.n or 250_000, cfg.seed)
        tag = "SURVEY"
    else:
        spec = _scenario_spec(cfg, cfg.seed)
        ds, _ = generate(spec)
        tag = spec.scenario_id
    path = outdir / f"scenario_{tag}_seed{cfg.seed}.csv"
    schema = write_csv(ds, path)
    write_json(schema, outdir / f"scenario_{tag}_schema.json")
    print(f"wrote {ds.n} rows -> {path}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _config(args)
    spec = _scenario_spec(cfg, cfg.seed)
    t0 = time.perf_counter()
    result = run_benchmark(spec, cfg.replicates, threads=cfg.threads, options=cfg.pipeline_options())
    wall = time.perf_counter() - t0
    outdir = Path(cfg.output_dir)
    doc = benchmark_report_dict(spec, result, cfg.to_dict(), wall)
    write_json(doc, outdir / f"benchmark_{spec.scenario_id}.json")
    write_rows_csv(result["rows"], REPLICATE_FIELDS, outdir / f"benchmark_{spec.scenario_id}.csv")
    s = result["summary"]
    print(
        f"{spec.scenario_id}: reps={s['replicates']} failed={s['failed']} "
        f"bias={s['bias']['mean']} L1m={s['L1m']['mean']} Tf={s['Tf']['mean']}"
    )
    return EXIT_OK


def cmd_imbalance(args) -> int:
    cfg = _config(args)
    if args.group_column:
        schema = {
            c: ("ignore" if r == "treatment" else r) for c, r in cfg.resolved_schema().items()
        }
        if args.group_column not in schema:
            raise ConfigError(f"group column {args.group_column!r} not in schema")
        schema[args.group_column] = "treatment"
        cfg.schema = schema
    ds = _load(cfg)
    binning = default_binning(ds)
    X = ds.covariates
    l1 = compute_l1(X[ds.treatment == 1], X[ds.treatment == 0], binning)
    print(f"L1={l1:.6f} n_group1={ds.n_treated} n_group0={ds.n_control}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out", help="output directory")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", help="input CSV")
    data.add_argument("--schema", help="JSON column-role schema")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--scenario", help="scenario id, 1A..6B (simulate also accepts SURVEY)")
    sim.add_argument("--n", type=int, help="override sample size")

    p = argparse.ArgumentParser(prog="tim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("match", parents=[common, data], help="importance + coarsen + match").set_defaults(func=cmd_match)
    sub.add_parser("estimate", parents=[common, data], help="full pipeline with CATE and L1").set_defaults(func=cmd_estimate)
    sub.add_parser("simulate", parents=[common, sim], help="write a synthetic dataset").set_defaults(func=cmd_simulate)
    b = sub.add_parser("benchmark", parents=[common, sim], help="replicated simulation study")
    b.add_argument("--reps", type=int)
    b.set_defaults(func=cmd_benchmark)
    im = sub.add_parser("imbalance", parents=[common, data], help="L1 between two labeled groups")
    im.add_argument("--group-column", help="binary 0/1 column defining the groups (default: treatment)")
    im.set_defaults(func=cmd_imbalance)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("TIM_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USER
    try:
        return args.func(args)
    except DegenerateDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ConfigError, SchemaError, ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

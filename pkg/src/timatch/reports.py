"""JSON/CSV report emission."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Optional

from timatch import __version__
from timatch.dataset import Dataset
from timatch.pipeline import MatchReport

SCHEMA_VERSION = "1.0"
TIMING_KEYS = frozenset({"timings", "time_seconds"})


def _header(kind: str, config: Optional[dict], seed) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "tool": {"name": "timatch", "version": __version__},
        "config": config or {},
        "seed": seed,
    }


def _data_section(ds: Dataset) -> dict:
    return {
        "n": ds.n,
        "k": ds.k,
        "n_treated": ds.n_treated,
        "n_control": ds.n_control,
        "columns": [{"name": c, "kind": kd.value} for c, kd in zip(ds.column_names, ds.kinds)],
        "codebook": ds.codebook,
    }


def match_report_dict(ds: Dataset, report: MatchReport, config=None, seed=None) -> dict:
    names = list(ds.column_names)
    m = report.match
    if report.refined is not None:
        strata = [rs.to_dict(names) for rs in report.refined]
    else:
        strata = [s.to_dict(names) for s in m.strata]
    doc = _header("match", config, seed)
    doc.update(
        data=_data_section(ds),
        importance=report.importance.to_dict(names),
        coarsening={names[j]: [float(v) for v in e] for j, e in report.view.bin_edges.items()},
        match={
            "t_fraction": m.t_fraction,
            "n_strata": len(m.strata),
            "iterations_run": m.iterations_run,
            "reuse_controls": m.reuse_controls,
            "unmatched_treated": [int(i) for i in m.unmatched_treated],
            "n_unmatched_controls": int(len(m.unmatched_controls)),
            "strata": strata,
        },
        timings=dict(report.timings),
    )
    return doc


def estimate_report_dict(ds: Dataset, report: MatchReport, config=None, seed=None) -> dict:
    doc = match_report_dict(ds, report, config, seed)
    doc["kind"] = "estimate"
    imb = report.imbalance
    doc["estimate"] = report.estimate.to_dict()
    doc["imbalance"] = {
        "l1_pre": imb.l1_pre,
        "l1_post": imb.l1_post,
        "cells_occupied": imb.cells_occupied,
        "binning": imb.binning.to_dict(list(ds.column_names)),
    }
    doc["summary"] = {
        "cate": report.estimate.overall,
        "naive_dim": report.estimate.naive_dim,
        "Tf": report.match.t_fraction,
        "L1": imb.l1_pre,
        "L1m": imb.l1_post,
    }
    # timings last so the numeric payload reads first
    doc["timings"] = doc.pop("timings")
    return doc


def benchmark_report_dict(spec, result: dict, config=None, wall_seconds: float = 0.0) -> dict:
    doc = _header("benchmark", config, spec.seed)
    doc.update(
        scenario=spec.to_dict(),
        summary=result["summary"],
        rows=result["rows"],
        timings={"wall_clock_seconds": wall_seconds},
    )
    return doc


def strip_timings(doc):
    """Copy of a report without wall-clock fields (the non-reproducible part)."""
    if isinstance(doc, dict):
        return {k: strip_timings(v) for k, v in doc.items() if k not in TIMING_KEYS}
    if isinstance(doc, list):
        return [strip_timings(v) for v in doc]
    return doc


def write_json(doc: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, allow_nan=True)
        fh.write("\n")


def write_rows_csv(rows, fields, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def schema_path(kind: str) -> Path:
    return Path(__file__).parent / "schemas" / f"{kind}_report.schema.json"

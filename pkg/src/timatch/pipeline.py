"""End-to-end run: importance, coarsening, matching, refinement, estimation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from timatch.dataset import CoarsenedView, Dataset, coarsen, discretize_for_distance
from timatch.discrete_distance import build_model
from timatch.estimator import CateEstimate, estimate_cate
from timatch.imbalance import ImbalanceReport, default_binning, imbalance_report
from timatch.importance import ImportanceVector, compute_importance
from timatch.matcher import MatchResult, run_matching
from timatch.refine import RefinedStratum, refine_all


@dataclass(frozen=True)
class PipelineOptions:
    bins_per_column: Dict = field(default_factory=dict)
    normalize: bool = True
    reuse_controls: bool = True
    weight_by_treated: bool = False
    weight_l1_by_inverse_score: bool = False
    l1_bins_per_column: Dict = field(default_factory=dict)
    importance_method: str = "regression"
    ridge: float = 1e-6
    irls_tol: float = 1e-8
    irls_max_iter: int = 100


@dataclass(eq=False)
class MatchReport:
    importance: ImportanceVector
    view: CoarsenedView
    match: MatchResult
    refined: Optional[List[RefinedStratum]] = None
    estimate: Optional[CateEstimate] = None
    imbalance: Optional[ImbalanceReport] = None
    timings: Dict[str, float] = field(default_factory=dict)


class _Clock:
    def __init__(self):
        self.timings = {}

    def __call__(self, name):
        clock = self

        class _Span:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                clock.timings[name] = time.perf_counter() - self.t0

        return _Span()


def run_pipeline(ds: Dataset, options: PipelineOptions | None = None, estimate: bool = True) -> MatchReport:
    """Run every stage; with ``estimate=False`` stop after matching."""
    opts = options or PipelineOptions()
    clock = _Clock()
    t0 = time.perf_counter()
    imp_opts = {}
    if opts.importance_method == "regression":
        imp_opts = dict(ridge=opts.ridge, tol=opts.irls_tol, max_iter=opts.irls_max_iter)
    with clock("importance"):
        imp = compute_importance(ds, opts.importance_method, **imp_opts)
    with clock("coarsen"):
        view = coarsen(ds, opts.bins_per_column)
    with clock("match"):
        match = run_matching(view, ds.treatment, imp.order, reuse_controls=opts.reuse_controls)
    report = MatchReport(importance=imp, view=view, match=match)
    if estimate:
        with clock("refine"):
            dmodel = build_model(discretize_for_distance(ds, view))
            report.refined = refine_all(match, ds, view, dmodel, normalize=opts.normalize)
        with clock("estimate"):
            report.estimate = estimate_cate(
                report.refined, ds.outcome, ds.treatment, weight_by_treated=opts.weight_by_treated
            )
        with clock("imbalance"):
            binning = default_binning(ds, _index_map(ds, opts.l1_bins_per_column))
            weights = None
            controls = match.matched_controls()
            if opts.weight_l1_by_inverse_score and report.refined:
                # a control serving several strata keeps its best score
                best = np.zeros(ds.n)
                for rs in report.refined:
                    np.maximum.at(best, rs.base.control_members, rs.inverse_score)
                weights = best[controls]
            report.imbalance = imbalance_report(
                ds, match.matched_treated(), controls, binning, control_weights=weights
            )
    clock.timings["total"] = time.perf_counter() - t0
    report.timings = clock.timings
    return report


def _index_map(ds: Dataset, mapping: Dict) -> Dict[int, int]:
    out = {}
    for key, v in (mapping or {}).items():
        out[ds.column_names.index(key) if key in ds.column_names else int(key)] = int(v)
    return out

"""Stratum-level CATE from inverse-score weighted effects."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from timatch.errors import EstimationError
from timatch.refine import RefinedStratum


@dataclass(frozen=True)
class StratumEffect:
    stratum_id: int
    cate: float
    total_weight: float
    m_treated: int
    m_control: int


@dataclass(frozen=True)
class CateEstimate:
    per_stratum: List[StratumEffect]
    overall: float
    naive_dim: float
    weighting: str = "stratum"

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "naive_dim": self.naive_dim,
            "weighting": self.weighting,
            "per_stratum": [
                {
                    "stratum_id": e.stratum_id,
                    "cate": e.cate,
                    "total_weight": e.total_weight,
                    "m_treated": e.m_treated,
                    "m_control": e.m_control,
                }
                for e in self.per_stratum
            ],
        }


def naive_difference_in_means(outcome, treatment) -> float:
    y = np.asarray(outcome, dtype=float)
    t = np.asarray(treatment).astype(bool)
    return float(y[t].mean() - y[~t].mean())


def stratum_cate(y_treated: np.ndarray, y_controls: np.ndarray, weights: np.ndarray) -> tuple:
    """Weighted mean of ``mean(y_treated) - y_control``; returns (cate, weight sum)."""
    effects = y_treated.mean() - y_controls
    w_sum = float(weights.sum())
    if w_sum > 0:
        return float(np.dot(weights, effects) / w_sum), w_sum
    return float(effects.mean()), w_sum


def estimate_cate(
    refined: Sequence[RefinedStratum],
    outcome,
    treatment,
    weight_by_treated: bool = False,
) -> CateEstimate:
    """Per-stratum CATE and their average.

    Args:
        refined: Strata with inverse scores for their controls.
        outcome, treatment: Full-sample vectors (strata hold row indices).
        weight_by_treated: Average strata by treated count instead of the
            plain mean over strata. Off by default.
    """
    if not refined:
        raise EstimationError("no matched strata")
    y = np.asarray(outcome, dtype=float)
    effects = []
    for rs in sorted(refined, key=lambda r: r.base.id):
        s = rs.base
        if s.m_treated == 0 or s.m_control == 0:
            continue
        cate, w = stratum_cate(y[s.treated_members], y[s.control_members], rs.inverse_score)
        effects.append(StratumEffect(s.id, cate, w, s.m_treated, s.m_control))
    if not effects:
        raise EstimationError("no matched strata")
    cates = np.array([e.cate for e in effects])
    if weight_by_treated:
        m = np.array([e.m_treated for e in effects], dtype=float)
        overall = float(np.dot(m, cates) / m.sum())
    else:
        overall = float(np.mean(cates))
    return CateEstimate(
        per_stratum=effects,
        overall=overall,
        naive_dim=naive_difference_in_means(y, treatment),
        weighting="treated" if weight_by_treated else "stratum",
    )

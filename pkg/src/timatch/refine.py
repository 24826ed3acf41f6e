"""Distance refinement inside strata that were matched on fewer than k columns.

Each control gets a grand distance to the treated members of its stratum,
computed over the dropped columns only: squared differences for continuous
columns plus squared Omega for discrete ones.  The inverse min-max score
turns distances into weights, 1 for the closest control and 0 for the
farthest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from timatch.dataset import CoarsenedView, CovariateKind, Dataset, scaled_covariates
from timatch.discrete_distance import DiscreteDistanceModel, omega_table
from timatch.matcher import MatchResult, Stratum

# above this many (treated, control, column) triples the per-column mean of
# squared differences is taken through the mean/variance identity
_DIRECT_BUDGET = 200_000


@dataclass(frozen=True, eq=False)
class RefinedStratum:
    base: Stratum
    control_distance: np.ndarray
    inverse_score: np.ndarray
    continuous_distance: np.ndarray
    discrete_distance: np.ndarray

    def to_dict(self, column_names=None) -> dict:
        d = self.base.to_dict(column_names)
        d["control_distance"] = [float(v) for v in self.control_distance]
        d["inverse_score"] = [float(v) for v in self.inverse_score]
        return d


def inverse_min_max(delta) -> np.ndarray:
    """``1 - (d - min) / (max - min)``; all ones when the range is empty."""
    delta = np.asarray(delta, dtype=float)
    if delta.size == 0:
        return delta.copy()
    lo, hi = delta.min(), delta.max()
    if hi <= lo:
        return np.ones_like(delta)
    return np.clip(1.0 - (delta - lo) / (hi - lo), 0.0, 1.0)


def _continuous_part(Xt: np.ndarray, Xc: np.ndarray) -> np.ndarray:
    """Mean over treated rows of the squared Euclidean distance to each control."""
    m_t, m_c, d = Xt.shape[0], Xc.shape[0], Xt.shape[1]
    if d == 0:
        return np.zeros(m_c)
    if m_t * m_c * d <= _DIRECT_BUDGET:
        diff = Xt[:, None, :] - Xc[None, :, :]
        return np.mean(np.sum(diff * diff, axis=2), axis=0)
    mean = Xt.mean(axis=0)
    var = Xt.var(axis=0)
    return np.sum((Xc - mean) ** 2 + var, axis=1)


def refine_stratum(
    s: Stratum,
    ds: Dataset,
    view: CoarsenedView,
    dmodel: DiscreteDistanceModel,
    normalize: bool = True,
    scaled: np.ndarray | None = None,
) -> RefinedStratum:
    """Distances and inverse scores for the controls of one stratum.

    Continuous distances use the original (un-coarsened) values, min-max
    scaled to [0, 1] when ``normalize`` is set. ``scaled`` may carry that
    matrix precomputed.
    """
    m_c = s.m_control
    if not s.dropped_columns:
        zeros = np.zeros(m_c)
        return RefinedStratum(s, zeros, np.ones(m_c), zeros, zeros)
    if scaled is None:
        scaled = scaled_covariates(ds, normalize)
    cont = [j for j in s.dropped_columns if ds.kinds[j] is CovariateKind.CONTINUOUS]
    disc = [j for j in s.dropped_columns if ds.kinds[j] is CovariateKind.DISCRETE]

    d_cont = _continuous_part(scaled[np.ix_(s.treated_members, cont)], scaled[np.ix_(s.control_members, cont)])
    d_disc = np.zeros(m_c)
    for j in disc:
        om2 = omega_table(dmodel, j) ** 2
        t_codes = view.codes[s.treated_members, j]
        c_codes = view.codes[s.control_members, j]
        freq = np.bincount(t_codes, minlength=om2.shape[0]) / len(t_codes)
        d_disc += (freq @ om2)[c_codes]
    total = d_cont + d_disc
    return RefinedStratum(s, total, inverse_min_max(total), d_cont, d_disc)


def refine_all(
    result: MatchResult,
    ds: Dataset,
    view: CoarsenedView,
    dmodel: DiscreteDistanceModel,
    normalize: bool = True,
) -> List[RefinedStratum]:
    scaled = scaled_covariates(ds, normalize)
    return [refine_stratum(s, ds, view, dmodel, normalize, scaled) for s in result.strata]

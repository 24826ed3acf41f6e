"""Multivariate L1 imbalance over a shared, sparse multidimensional histogram.

Every unit is assigned the tuple of its per-column bin indices; only occupied
cells are materialized.  The same frozen :class:`Binning` must be used for
the pre-match and post-match comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from timatch.dataset import CovariateKind, Dataset, bin_codes, equal_width_edges, sturges_bins
from timatch.errors import ImbalanceError


@dataclass(frozen=True, eq=False)
class Binning:
    """Per-column cut points; ``None`` marks a discrete column (one bin per level)."""

    edges: tuple
    levels: tuple

    def cell_codes(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        if rows.ndim == 1:
            rows = rows[None, :]
        out = np.empty(rows.shape, dtype=np.int64)
        for j, e in enumerate(self.edges):
            if e is None:
                out[:, j] = rows[:, j].astype(np.int64)
            else:
                out[:, j] = bin_codes(rows[:, j], e)
        return out

    def to_dict(self, column_names=None) -> dict:
        names = column_names or [str(j) for j in range(len(self.edges))]
        return {
            name: ({"edges": [float(v) for v in e]} if e is not None else {"levels": lv})
            for name, e, lv in zip(names, self.edges, self.levels)
        }


@dataclass(frozen=True)
class ImbalanceReport:
    l1_pre: float
    l1_post: float
    cells_occupied: int
    binning: Binning


def default_binning(ds: Dataset, bins_per_column: Optional[Mapping[int, int]] = None) -> Binning:
    """Sturges equal-width bins on the pooled sample; discrete columns by level."""
    overrides = dict(bins_per_column or {})
    default = sturges_bins(ds.n)
    edges, levels = [], []
    for j, kind in enumerate(ds.kinds):
        if kind is CovariateKind.DISCRETE:
            edges.append(None)
            levels.append(ds.levels(j))
        else:
            e = equal_width_edges(ds.covariates[:, j], int(overrides.get(j, default)))
            e.setflags(write=False)
            edges.append(e)
            levels.append(len(e) - 1)
    return Binning(edges=tuple(edges), levels=tuple(levels))


def _cells(codes: np.ndarray):
    uniq, inv, counts = np.unique(codes, axis=0, return_inverse=True, return_counts=True)
    return uniq, inv.ravel(), counts


def compute_l1(
    treated_rows,
    control_rows,
    binning: Binning,
    treated_weights=None,
    control_weights=None,
) -> float:
    """Half the summed absolute difference of relative cell frequencies.

    Optional non-negative weights replace unit counts within a group.
    """
    a = binning.cell_codes(treated_rows)
    b = binning.cell_codes(control_rows)
    if len(a) == 0 or len(b) == 0:
        raise ImbalanceError("L1 imbalance is undefined for an empty group")
    wa = np.ones(len(a)) if treated_weights is None else np.asarray(treated_weights, dtype=float)
    wb = np.ones(len(b)) if control_weights is None else np.asarray(control_weights, dtype=float)
    if wa.sum() <= 0 or wb.sum() <= 0:
        raise ImbalanceError("L1 imbalance is undefined for a group with zero total weight")
    uniq, inv, _ = _cells(np.vstack([a, b]))
    m = len(uniq)
    f = np.bincount(inv[: len(a)], weights=wa, minlength=m) / wa.sum()
    g = np.bincount(inv[len(a) :], weights=wb, minlength=m) / wb.sum()
    # fsum is correctly rounded, so the result does not depend on cell order
    return float(min(max(0.5 * math.fsum(np.abs(f - g)), 0.0), 1.0))


def occupied_cells(rows, binning: Binning) -> int:
    return len(_cells(binning.cell_codes(rows))[0])


def imbalance_report(
    ds: Dataset,
    matched_treated: Sequence[int],
    matched_controls: Sequence[int],
    binning: Optional[Binning] = None,
    control_weights=None,
) -> ImbalanceReport:
    """Pre-match L1 on all units and post-match L1 on the matched units."""
    binning = binning or default_binning(ds)
    X = ds.covariates
    pre = compute_l1(X[ds.treatment == 1], X[ds.treatment == 0], binning)
    mt = np.asarray(matched_treated, dtype=np.int64)
    mc = np.asarray(matched_controls, dtype=np.int64)
    if len(mt) and len(mc):
        post = compute_l1(X[mt], X[mc], binning, control_weights=control_weights)
    else:
        post = float("nan")
    return ImbalanceReport(pre, post, occupied_cells(X, binning), binning)

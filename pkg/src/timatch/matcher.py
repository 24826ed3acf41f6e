"""Iterative exact matching on coarsened codes.

Iteration u groups the still-unmatched units on the k - u most important
columns.  Every group holding at least one treated and one control unit
becomes a stratum and its treated members leave the pool.  Then the least
important remaining column is dropped and grouping repeats, until no treated
unit is left or every column has been dropped.

By default controls stay in the pool and may serve several strata; otherwise
a small control pool runs dry long before every treated unit has found a
stratum.  ``reuse_controls=False`` consumes controls as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from timatch.dataset import CoarsenedView


@dataclass(frozen=True, eq=False)
class Stratum:
    id: int
    signature: tuple
    matched_columns: tuple
    dropped_columns: tuple
    treated_members: np.ndarray
    control_members: np.ndarray
    iteration: int

    @property
    def m_treated(self) -> int:
        return len(self.treated_members)

    @property
    def m_control(self) -> int:
        return len(self.control_members)

    def to_dict(self, column_names=None) -> dict:
        def cols(idx):
            return [column_names[j] for j in idx] if column_names else list(idx)

        return {
            "id": self.id,
            "iteration": self.iteration,
            "signature": [int(v) for v in self.signature],
            "matched_columns": cols(self.matched_columns),
            "dropped_columns": cols(self.dropped_columns),
            "treated": [int(i) for i in self.treated_members],
            "controls": [int(i) for i in self.control_members],
        }


@dataclass(frozen=True, eq=False)
class MatchResult:
    strata: List[Stratum]
    unmatched_treated: np.ndarray
    unmatched_controls: np.ndarray
    n_treated: int
    n_control: int
    iterations_run: int = 0
    order: tuple = field(default=())
    reuse_controls: bool = True

    @property
    def t_fraction(self) -> float:
        return (self.n_treated - len(self.unmatched_treated)) / self.n_treated

    def matched_treated(self) -> np.ndarray:
        if not self.strata:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([s.treated_members for s in self.strata])

    def matched_controls(self) -> np.ndarray:
        """Distinct control units that belong to at least one stratum."""
        if not self.strata:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate([s.control_members for s in self.strata]))


def _group_keys(codes: np.ndarray) -> np.ndarray:
    """Dense group id per row for identical code tuples (sorted by tuple)."""
    if codes.shape[1] == 0:
        return np.zeros(codes.shape[0], dtype=np.int64)
    radices = codes.max(axis=0).astype(np.int64) + 1
    if np.sum(np.log2(radices.astype(float))) < 62:
        mult = np.ones(codes.shape[1], dtype=np.int64)
        for c in range(codes.shape[1] - 2, -1, -1):
            mult[c] = mult[c + 1] * radices[c + 1]
        keys = codes.astype(np.int64) @ mult
        _, inv = np.unique(keys, return_inverse=True)
    else:
        _, inv = np.unique(codes, axis=0, return_inverse=True)
    return inv.ravel()


def run_matching(
    view: CoarsenedView, treatment, order: Sequence[int], reuse_controls: bool = True
) -> MatchResult:
    """Match treated to control units on progressively fewer columns.

    Args:
        view: Coarsened codes (n x k).
        treatment: Binary vector of length n.
        order: Column indices by descending importance; the last entry is
            dropped first.
        reuse_controls: Keep matched controls available to later
            iterations. With ``False`` every unit joins at most one stratum.
    """
    codes = np.asarray(view.codes)
    T = np.asarray(treatment).astype(bool)
    n, k = codes.shape
    order = [int(j) for j in order]
    if len(T) != n:
        raise ValueError("treatment length does not match the view")
    if sorted(order) != list(range(k)):
        raise ValueError("order must be a permutation of the column indices")

    remaining = np.arange(n)
    strata: List[Stratum] = []
    iterations = 0
    for u in range(k + 1):
        if not T[remaining].any():
            break
        iterations += 1
        matched_cols = tuple(order[: k - u])
        dropped = tuple(reversed(order[k - u :]))
        sub = codes[np.ix_(remaining, list(matched_cols))]
        gid = _group_keys(sub)
        n_groups = int(gid.max()) + 1 if len(gid) else 0
        t_rem = T[remaining]
        n_t = np.bincount(gid, weights=t_rem, minlength=n_groups)
        n_all = np.bincount(gid, minlength=n_groups)
        good = (n_t >= 1) & (n_all - n_t >= 1)
        if not good.any():
            continue
        sort = np.argsort(gid, kind="stable")
        bounds = np.searchsorted(gid[sort], np.arange(n_groups + 1))
        taken = np.zeros(len(remaining), dtype=bool)
        for g in np.flatnonzero(good):
            pos = sort[bounds[g] : bounds[g + 1]]
            members = remaining[pos]
            is_t = t_rem[pos]
            strata.append(
                Stratum(
                    id=len(strata),
                    signature=tuple(int(v) for v in sub[pos[0]]),
                    matched_columns=matched_cols,
                    dropped_columns=dropped,
                    treated_members=members[is_t],
                    control_members=members[~is_t],
                    iteration=u,
                )
            )
            taken[pos] = True
        if reuse_controls:
            taken &= t_rem
        remaining = remaining[~taken]
    used = np.zeros(n, dtype=bool)
    for st in strata:
        used[st.control_members] = True
    return MatchResult(
        strata=strata,
        unmatched_treated=remaining[T[remaining]],
        unmatched_controls=np.flatnonzero(~T & ~used),
        n_treated=int(T.sum()),
        n_control=int((~T).sum()),
        iterations_run=iterations,
        order=tuple(order),
        reuse_controls=reuse_controls,
    )

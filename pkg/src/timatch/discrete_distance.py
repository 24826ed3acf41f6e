"""Distribution-aware distance between two values of a discrete attribute.

For a target attribute and a co-attribute, the contrast between values x and
y is the largest achievable ``P(w | x) + P(not w | y) - 1`` over subsets w of
the co-attribute's values.  The maximizing subset is
``{v : P(v | x) >= P(v | y)}``, so the contrast is the total-variation
distance between the two conditional distributions.  The distance Omega
averages the contrast over every other attribute.

Conditionals are estimated once from the pooled sample (treated and control
together) on the all-discrete representation, in which continuous columns
appear as their coarsened codes.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np


class ZeroSupportWarning(UserWarning):
    pass


class SingleAttributeWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class DiscreteDistanceModel:
    """Pairwise conditional frequency tables.

    ``cooccurrence[(i, j)][x, v]`` is ``P(attr_j = v | attr_i = x)``; rows for
    values of attribute ``i`` that never occur are uniform and listed in
    ``zero_support[i]``.
    """

    cooccurrence: Dict[Tuple[int, int], np.ndarray]
    attribute_levels: Tuple[int, ...]
    k_total: int
    zero_support: Dict[int, frozenset] = field(default_factory=dict)
    _omega_cache: dict = field(default_factory=dict, repr=False)

    def conditional(self, target: int, co: int, x: int) -> np.ndarray:
        return self.cooccurrence[(target, co)][x]


def build_model(all_discrete: np.ndarray, k_total: int | None = None) -> DiscreteDistanceModel:
    """Count co-occurrences for every ordered attribute pair.

    Args:
        all_discrete: n x k matrix of dense non-negative integer codes.
        k_total: attribute count used for averaging; defaults to k.
    """
    codes = np.asarray(all_discrete, dtype=np.int64)
    if codes.ndim != 2 or codes.shape[0] == 0 or codes.shape[1] == 0:
        raise ValueError("all_discrete must be a non-empty 2-d matrix")
    if (codes < 0).any():
        raise ValueError("codes must be non-negative")
    n, k = codes.shape
    levels = tuple(int(codes[:, j].max()) + 1 for j in range(k))
    tables = {}
    zero = {}
    for i in range(k):
        counts_i = np.bincount(codes[:, i], minlength=levels[i])
        missing = np.flatnonzero(counts_i == 0)
        if missing.size:
            zero[i] = frozenset(int(x) for x in missing)
        for j in range(k):
            if i == j:
                continue
            joint = np.bincount(
                codes[:, i] * levels[j] + codes[:, j], minlength=levels[i] * levels[j]
            ).reshape(levels[i], levels[j]).astype(float)
            with np.errstate(invalid="ignore", divide="ignore"):
                cond = joint / counts_i[:, None]
            if missing.size:
                cond[missing] = 1.0 / levels[j]
            cond.setflags(write=False)
            tables[(i, j)] = cond
    return DiscreteDistanceModel(
        cooccurrence=tables,
        attribute_levels=levels,
        k_total=k if k_total is None else int(k_total),
        zero_support=zero,
    )


def _tv(a: np.ndarray, b: np.ndarray) -> float:
    # (sum of positive parts + sum of negative parts) / 2 is exactly symmetric
    d = a - b
    pos = float(np.sum(np.maximum(d, 0.0)))
    neg = float(np.sum(np.maximum(-d, 0.0)))
    return min(max((pos + neg) / 2.0, 0.0), 1.0)


def _check_code(model: DiscreteDistanceModel, attr: int, code: int) -> None:
    if not 0 <= code < model.attribute_levels[attr]:
        raise ValueError(
            f"code {code} out of range for attribute {attr} "
            f"(levels {model.attribute_levels[attr]})"
        )
    if code in model.zero_support.get(attr, ()):
        warnings.warn(
            f"value {code} of attribute {attr} never occurs; using a uniform conditional",
            ZeroSupportWarning,
            stacklevel=3,
        )


def delta_ij(model: DiscreteDistanceModel, target_attr: int, co_attr: int, x: int, y: int) -> float:
    """Contrast of values x, y of ``target_attr`` with respect to ``co_attr``."""
    _check_code(model, target_attr, x)
    _check_code(model, target_attr, y)
    if x == y:
        return 0.0
    table = model.cooccurrence[(target_attr, co_attr)]
    return _tv(table[x], table[y])


def omega(model: DiscreteDistanceModel, target_attr: int, x: int, y: int) -> float:
    """Average contrast of x and y over all other attributes."""
    _check_code(model, target_attr, x)
    _check_code(model, target_attr, y)
    if x == y:
        return 0.0
    k = len(model.attribute_levels)
    if k == 1:
        warnings.warn(
            "no co-attributes available; falling back to the 0/1 mismatch distance",
            SingleAttributeWarning,
            stacklevel=2,
        )
        return 1.0
    total = 0.0
    for j in range(k):
        if j != target_attr:
            total += _tv(model.cooccurrence[(target_attr, j)][x], model.cooccurrence[(target_attr, j)][y])
    return total / (model.k_total - 1)


def omega_table(model: DiscreteDistanceModel, target_attr: int) -> np.ndarray:
    """Full ``levels x levels`` matrix of Omega for one attribute (cached)."""
    cached = model._omega_cache.get(target_attr)
    if cached is not None:
        return cached
    L = model.attribute_levels[target_attr]
    k = len(model.attribute_levels)
    if k == 1:
        warnings.warn(
            "no co-attributes available; falling back to the 0/1 mismatch distance",
            SingleAttributeWarning,
            stacklevel=2,
        )
        out = 1.0 - np.eye(L)
    else:
        out = np.zeros((L, L))
        for j in range(k):
            if j == target_attr:
                continue
            C = model.cooccurrence[(target_attr, j)]
            d = C[:, None, :] - C[None, :, :]
            pos = np.maximum(d, 0.0).sum(axis=2)
            neg = np.maximum(-d, 0.0).sum(axis=2)
            out += np.clip((pos + neg) / 2.0, 0.0, 1.0)
        out /= model.k_total - 1
        np.fill_diagonal(out, 0.0)
    out.setflags(write=False)
    model._omega_cache[target_attr] = out
    return out


def dump_tables(model: DiscreteDistanceModel, attrs: Sequence[int], names: Sequence[str] | None = None) -> str:
    """JSON audit dump of the Omega table of each listed attribute."""
    doc = {}
    for a in attrs:
        key = names[a] if names is not None else str(a)
        doc[key] = omega_table(model, a).tolist()
    return json.dumps({"omega": doc}, indent=2)

"""Typed data model, CSV ingestion and the coarsened views used downstream.

A :class:`Dataset` holds the raw covariates (continuous values and dense
category codes side by side in one float matrix), the binary treatment and
the outcome.  :func:`coarsen` bins continuous columns on equal-width
intervals so exact matching can operate on integer codes.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from timatch.errors import DegenerateDataError, SchemaError, ValidationError

MAX_DISCRETE_LEVELS = 1024
MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none"})
ROLES = frozenset(
    {"treatment", "outcome", "covariate_continuous", "covariate_discrete", "ignore"}
)


class CovariateKind(enum.Enum):
    CONTINUOUS = "continuous"
    DISCRETE = "discrete"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of n units: covariates X, treatment T and outcome Y.

    Discrete covariates are stored as dense integer codes (as floats) in the
    same matrix as the continuous ones; ``codebook`` maps each discrete column
    name to the original labels in code order.
    """

    covariates: np.ndarray
    kinds: tuple
    treatment: np.ndarray
    outcome: np.ndarray
    column_names: tuple
    codebook: Mapping[str, list] = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.covariates, dtype=float)
        if X.ndim != 2:
            raise ValidationError("covariates must be a 2-d matrix")
        n, k = X.shape
        T = np.asarray(self.treatment)
        Y = np.asarray(self.outcome, dtype=float)
        kinds = tuple(CovariateKind(kd) for kd in self.kinds)
        names = tuple(str(c) for c in self.column_names)
        if n < 2 or k < 1:
            raise ValidationError(f"need n >= 2 and k >= 1, got n={n}, k={k}")
        if T.shape != (n,) or Y.shape != (n,):
            raise ValidationError("treatment and outcome must be vectors of length n")
        if len(kinds) != k or len(names) != k:
            raise ValidationError("kinds and column_names must have length k")
        if len(set(names)) != k:
            raise ValidationError("column names must be unique")
        bad = ~np.isin(T, (0, 1))
        if bad.any():
            raise ValidationError(
                "treatment must be binary", rows=(np.flatnonzero(bad) + 1).tolist()
            )
        T = T.astype(np.int8)
        if not np.isfinite(X).all() or not np.isfinite(Y).all():
            raise ValidationError("covariates and outcome must be finite")
        for j, kind in enumerate(kinds):
            if kind is CovariateKind.DISCRETE:
                col = X[:, j]
                if (col != np.round(col)).any() or (col < 0).any():
                    raise ValidationError(
                        f"discrete column {names[j]!r} must hold non-negative integer codes"
                    )
                levels = int(col.max()) + 1
                if levels > MAX_DISCRETE_LEVELS:
                    raise ValidationError(
                        f"discrete column {names[j]!r} has {levels} levels "
                        f"(limit {MAX_DISCRETE_LEVELS})"
                    )
                if np.unique(col).size != levels:
                    raise ValidationError(
                        f"discrete column {names[j]!r} codes are not dense 0..{levels - 1}"
                    )
        n_t = int(T.sum())
        if n_t == 0 or n_t == n:
            raise DegenerateDataError(
                f"need at least one treated and one control unit (n_T={n_t}, n_C={n - n_t})"
            )
        object.__setattr__(self, "covariates", _frozen(X))
        object.__setattr__(self, "treatment", _frozen(T))
        object.__setattr__(self, "outcome", _frozen(Y))
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "codebook", dict(self.codebook))

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def k(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_treated(self) -> int:
        return int(self.treatment.sum())

    @property
    def n_control(self) -> int:
        return self.n - self.n_treated

    @property
    def continuous_columns(self) -> list:
        return [j for j, kd in enumerate(self.kinds) if kd is CovariateKind.CONTINUOUS]

    @property
    def discrete_columns(self) -> list:
        return [j for j, kd in enumerate(self.kinds) if kd is CovariateKind.DISCRETE]

    def levels(self, j: int) -> int:
        """Category count of discrete column ``j``."""
        if self.kinds[j] is not CovariateKind.DISCRETE:
            raise ValueError(f"column {self.column_names[j]!r} is continuous")
        return int(self.covariates[:, j].max()) + 1

    def treated_index(self) -> np.ndarray:
        return np.flatnonzero(self.treatment == 1)

    def control_index(self) -> np.ndarray:
        return np.flatnonzero(self.treatment == 0)


@dataclass(frozen=True, eq=False)
class CoarsenedView:
    """Integer bin codes for every covariate.

    ``bin_edges`` maps continuous column index to the full ascending edge
    vector (``bins + 1`` entries); discrete columns are absent.
    """

    codes: np.ndarray
    bin_edges: Mapping[int, np.ndarray]

    def levels(self, j: int) -> int:
        edges = self.bin_edges.get(j)
        if edges is not None:
            return len(edges) - 1
        return int(self.codes[:, j].max()) + 1 if len(self.codes) else 0


def sturges_bins(n: int) -> int:
    """Sturges' rule, ``ceil(log2(n) + 1)``."""
    if n < 1:
        raise ValueError("n must be positive")
    return int(math.ceil(math.log2(n) + 1))


def equal_width_edges(values: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = float(np.min(values)), float(np.max(values))
    if hi <= lo:
        return np.array([lo, hi])
    return np.linspace(lo, hi, bins + 1)


def bin_codes(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Map values onto bins defined by ``edges``; out-of-range values clip."""
    inner = edges[1:-1]
    if inner.size == 0:
        return np.zeros(len(values), dtype=np.int64)
    return np.searchsorted(inner, values, side="right").astype(np.int64)


def coarsen(
    ds: Dataset, bins_per_column: Optional[Mapping[Union[int, str], int]] = None
) -> CoarsenedView:
    """Bin continuous columns on equal-width intervals between min and max.

    Args:
        ds: Source dataset.
        bins_per_column: Optional bin-count overrides keyed by column index or
            name. Columns without an override use Sturges' rule.

    Returns:
        CoarsenedView whose discrete columns carry the category codes unchanged.
    """
    overrides = _resolve_column_map(ds, bins_per_column or {})
    for j, b in overrides.items():
        if int(b) < 2:
            raise ValueError(f"bin count for column {ds.column_names[j]!r} must be >= 2")
    default = sturges_bins(ds.n)
    codes = np.empty((ds.n, ds.k), dtype=np.int64)
    edges = {}
    for j, kind in enumerate(ds.kinds):
        col = ds.covariates[:, j]
        if kind is CovariateKind.DISCRETE:
            codes[:, j] = col.astype(np.int64)
            continue
        e = equal_width_edges(col, int(overrides.get(j, default)))
        edges[j] = _frozen(e)
        codes[:, j] = bin_codes(col, e)
    return CoarsenedView(codes=_frozen(codes), bin_edges=edges)


def discretize_for_distance(ds: Dataset, view: CoarsenedView) -> np.ndarray:
    """All-discrete representation consumed by the discrete distance model.

    Continuous columns are replaced by their coarsened codes; discrete
    columns keep their category codes.
    """
    if view.codes.shape != ds.covariates.shape:
        raise ValueError("view was not built from this dataset")
    out = np.array(view.codes, dtype=np.int64)
    for j in ds.discrete_columns:
        out[:, j] = ds.covariates[:, j].astype(np.int64)
    return out


def scaled_covariates(ds: Dataset, normalize: bool = True) -> np.ndarray:
    """Covariates with continuous columns min-max scaled to [0, 1].

    Constant continuous columns map to 0. With ``normalize=False`` the raw
    values are returned.
    """
    X = np.array(ds.covariates, dtype=float)
    if not normalize:
        return X
    for j in ds.continuous_columns:
        lo, hi = X[:, j].min(), X[:, j].max()
        X[:, j] = (X[:, j] - lo) / (hi - lo) if hi > lo else 0.0
    return X


def _resolve_column_map(ds: Dataset, mapping: Mapping) -> dict:
    out = {}
    for key, value in mapping.items():
        if isinstance(key, str) and not key.isdigit():
            if key not in ds.column_names:
                raise SchemaError(f"unknown column {key!r}")
            out[ds.column_names.index(key)] = value
        else:
            j = int(key)
            if not 0 <= j < ds.k:
                raise SchemaError(f"column index {j} out of range")
            out[j] = value
    return out


# --------------------------------------------------------------------------
# CSV ingestion


def load_schema(path: Union[str, Path]) -> dict:
    """Read a column-name -> role JSON document."""
    try:
        with open(path, encoding="utf-8") as fh:
            schema = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema file is not valid JSON: {exc}") from exc
    except OSError as exc:
        raise SchemaError(f"cannot read schema file {path}: {exc}") from exc
    validate_schema(schema)
    return schema


def validate_schema(schema: Mapping[str, str]) -> None:
    if not isinstance(schema, Mapping) or not schema:
        raise SchemaError("schema must be a non-empty mapping of column -> role")
    for col, role in schema.items():
        if role not in ROLES:
            raise SchemaError(f"column {col!r}: unknown role {role!r}")
    roles = list(schema.values())
    for role in ("treatment", "outcome"):
        if roles.count(role) != 1:
            raise SchemaError(f"schema must name exactly one {role} column")
    if not any(r.startswith("covariate_") for r in roles):
        raise SchemaError("schema must name at least one covariate column")


def _parse_float(token: str) -> Optional[float]:
    if token.strip().lower() in MISSING_TOKENS:
        return None
    try:
        v = float(token)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def load_csv(path: Union[str, Path], schema: Mapping[str, str]) -> Dataset:
    """Load an RFC-4180 CSV with a header row into a :class:`Dataset`.

    Args:
        path: CSV file (UTF-8).
        schema: Column name -> role, roles being ``treatment``, ``outcome``,
            ``covariate_continuous``, ``covariate_discrete`` or ``ignore``.

    Raises:
        SchemaError: A schema column is missing from the header.
        ValidationError: Missing or unparseable cells, or non-binary
            treatment values. ``rows`` lists every offending data row
            (1-based, header excluded).
        DegenerateDataError: No treated or no control units.
    """
    validate_schema(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("CSV file is empty") from None
        missing = [c for c in schema if c not in header]
        if missing:
            raise SchemaError(f"columns missing from CSV header: {missing}")
        pos = {c: header.index(c) for c in schema}
        cov_names = [
            c for c in header if schema.get(c, "ignore").startswith("covariate_")
        ]
        kinds = [
            CovariateKind.CONTINUOUS
            if schema[c] == "covariate_continuous"
            else CovariateKind.DISCRETE
            for c in cov_names
        ]
        t_col = next(c for c, r in schema.items() if r == "treatment")
        y_col = next(c for c, r in schema.items() if r == "outcome")

        codes = {c: {} for c, kd in zip(cov_names, kinds) if kd is CovariateKind.DISCRETE}
        rows_X, rows_T, rows_Y = [], [], []
        problems = []
        for rowno, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                problems.append((rowno, f"expected {len(header)} fields, got {len(row)}"))
                continue
            t = _parse_float(row[pos[t_col]])
            if t is None or t not in (0.0, 1.0):
                problems.append((rowno, f"treatment value {row[pos[t_col]]!r} is not 0/1"))
                continue
            y = _parse_float(row[pos[y_col]])
            if y is None:
                problems.append((rowno, f"outcome value {row[pos[y_col]]!r} is missing or not numeric"))
                continue
            xs = []
            for c, kd in zip(cov_names, kinds):
                token = row[pos[c]]
                if kd is CovariateKind.CONTINUOUS:
                    v = _parse_float(token)
                    if v is None:
                        problems.append((rowno, f"column {c!r} value {token!r} is missing or not numeric"))
                        break
                    xs.append(v)
                else:
                    label = token.strip()
                    if label.lower() in MISSING_TOKENS:
                        problems.append((rowno, f"column {c!r} is missing"))
                        break
                    book = codes[c]
                    xs.append(book.setdefault(label, len(book)))
            else:
                rows_X.append(xs)
                rows_T.append(int(t))
                rows_Y.append(y)
        if problems:
            shown = "; ".join(f"row {r}: {msg}" for r, msg in problems[:20])
            more = f" (+{len(problems) - 20} more)" if len(problems) > 20 else ""
            raise ValidationError(
                f"{len(problems)} invalid row(s): {shown}{more}",
                rows=[r for r, _ in problems],
            )
    if len(rows_X) < 2:
        raise DegenerateDataError(f"need at least 2 rows, got {len(rows_X)}")
    X = np.asarray(rows_X, dtype=float)
    codebook = {}
    for c, book in codes.items():
        if len(book) > MAX_DISCRETE_LEVELS:
            raise ValidationError(
                f"discrete column {c!r} has {len(book)} levels (limit {MAX_DISCRETE_LEVELS})"
            )
        labels = list(book)
        numeric = [_parse_float(lab) for lab in labels]
        if all(v is not None for v in numeric):
            # numeric labels keep their natural order
            order = sorted(range(len(labels)), key=lambda i: numeric[i])
            remap = np.empty(len(labels))
            remap[order] = np.arange(len(labels))
            j = cov_names.index(c)
            X[:, j] = remap[X[:, j].astype(np.int64)]
            labels = [labels[i] for i in order]
        codebook[c] = labels
    return Dataset(
        covariates=X,
        kinds=tuple(kinds),
        treatment=np.asarray(rows_T, dtype=np.int8),
        outcome=np.asarray(rows_Y, dtype=float),
        column_names=tuple(cov_names),
        codebook=codebook,
    )


def write_csv(ds: Dataset, path: Union[str, Path], treatment="T", outcome="Y") -> dict:
    """Write a dataset as CSV and return the matching schema mapping.

    Discrete cells are written with their codebook labels when present.
    Continuous cells use ``repr`` so the file round-trips bit-exactly.
    """
    schema = {}
    for name, kind in zip(ds.column_names, ds.kinds):
        schema[name] = (
            "covariate_continuous" if kind is CovariateKind.CONTINUOUS else "covariate_discrete"
        )
    schema[treatment] = "treatment"
    schema[outcome] = "outcome"
    labels = [ds.codebook.get(c) for c in ds.column_names]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(ds.column_names) + [treatment, outcome])
        for i in range(ds.n):
            cells = []
            for j, kind in enumerate(ds.kinds):
                v = ds.covariates[i, j]
                if kind is CovariateKind.DISCRETE:
                    code = int(v)
                    cells.append(labels[j][code] if labels[j] else str(code))
                else:
                    cells.append(repr(float(v)))
            cells.append(str(int(ds.treatment[i])))
            cells.append(repr(float(ds.outcome[i])))
            w.writerow(cells)
    return schema


def from_arrays(
    covariates,
    treatment,
    outcome,
    kinds: Sequence,
    column_names: Optional[Sequence[str]] = None,
) -> Dataset:
    """Convenience constructor; column names default to ``x0, x1, ...``."""
    X = np.asarray(covariates, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    names = column_names or [f"x{j}" for j in range(X.shape[1])]
    return Dataset(X, tuple(kinds), np.asarray(treatment), np.asarray(outcome), tuple(names))

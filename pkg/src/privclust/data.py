"""Datasets, feature schemas, CSV ingestion and synthetic fixtures.

A :class:`Dataset` is an immutable record matrix plus one
:class:`FeatureSchema` per column. Categorical values are stored as integer
state codes ``0..m-1``; numeric columns hold raw reals until they are
discretized (see :func:`privclust.ldp.discretize`), after which they hold bin
codes and the schema records the bin edges.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, DomainError, ParseError

CATEGORICAL = "categorical"
NUMERIC = "numeric"


@dataclass(frozen=True)
class FeatureSchema:
    """Description of one column.

    ``m`` is the number of RR states. It is ``None`` for a numeric column that
    has not been discretized yet.
    """

    name: str
    kind: str
    m: int | None = None
    bin_edges: tuple[float, ...] | None = None
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in (CATEGORICAL, NUMERIC):
            raise ValueError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.m is not None and self.m < 1:
            raise ValueError(f"feature {self.name!r}: m must be >= 1")
        if self.kind == CATEGORICAL:
            if self.m is None:
                raise ValueError(f"categorical feature {self.name!r} needs m")
            if self.categories is not None and len(self.categories) != self.m:
                raise ValueError(f"feature {self.name!r}: {len(self.categories)} categories for m={self.m}")
        if self.bin_edges is not None:
            edges = np.asarray(self.bin_edges, dtype=float)
            if self.kind != NUMERIC:
                raise ValueError(f"feature {self.name!r}: bin_edges only apply to numeric features")
            if len(edges) != self.m + 1:
                raise ValueError(f"feature {self.name!r}: need m+1 bin edges")
            if self.m > 1 and np.any(np.diff(edges) <= 0):
                raise ValueError(f"feature {self.name!r}: bin_edges must be strictly increasing")

    @property
    def discrete(self) -> bool:
        return self.kind == CATEGORICAL or self.bin_edges is not None

    @property
    def midpoints(self) -> np.ndarray:
        edges = np.asarray(self.bin_edges, dtype=float)
        return (edges[:-1] + edges[1:]) / 2.0

    def hint(self) -> dict:
        """Schema hint that makes :func:`ingest_csv` reproduce this column."""
        out = {"kind": self.kind}
        if self.categories is not None:
            out["categories"] = list(self.categories)
        if self.bin_edges is not None:
            out["bin_edges"] = list(self.bin_edges)
        return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable n x d record matrix with schema, record ids and optional labels."""

    schema: tuple[FeatureSchema, ...]
    rows: np.ndarray
    ids: np.ndarray = None
    labels: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float, copy=True)
        if rows.ndim != 2:
            raise ValueError("rows must be a 2-D matrix")
        schema = tuple(self.schema)
        if rows.shape[1] != len(schema):
            raise ValueError(f"rows have {rows.shape[1]} columns but schema has {len(schema)}")
        ids = np.arange(rows.shape[0], dtype=np.int64) if self.ids is None else np.array(self.ids, dtype=np.int64)
        if ids.shape != (rows.shape[0],):
            raise ValueError("ids must have one entry per row")
        labels = None
        if self.labels is not None:
            labels = np.array(self.labels, copy=True)
            if labels.shape != (rows.shape[0],):
                raise ValueError("labels must cover all rows")
            labels.setflags(write=False)
        for j, feat in enumerate(schema):
            if feat.discrete:
                col = rows[:, j]
                if np.any(col != np.floor(col)) or np.any(col < 0) or np.any(col >= feat.m):
                    raise DomainError(f"feature {feat.name!r}: values outside state domain [0, {feat.m})")
        rows.setflags(write=False)
        ids.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "schema", schema)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.schema]

    def take(self, index) -> "Dataset":
        index = np.asarray(index)
        labels = None if self.labels is None else self.labels[index]
        return replace(self, rows=self.rows[index], ids=self.ids[index], labels=labels)

    def without_labels(self) -> "Dataset":
        return replace(self, labels=None)

    def decoded(self) -> np.ndarray:
        """Real-valued view: bin midpoints for discretized numerics, codes for categoricals."""
        out = np.array(self.rows, dtype=float)
        for j, feat in enumerate(self.schema):
            if feat.kind == NUMERIC and feat.bin_edges is not None:
                out[:, j] = feat.midpoints[self.rows[:, j].astype(int)]
        return out

    def equals(self, other: "Dataset") -> bool:
        if self.schema != other.schema:
            return False
        if not (np.array_equal(self.rows, other.rows) and np.array_equal(self.ids, other.ids)):
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        return self.labels is None or np.array_equal(self.labels, other.labels)


@dataclass(frozen=True)
class BlobSpec:
    """Isotropic Gaussian blobs. ``spread`` is a scalar or one std per cluster."""

    k_true: int
    n_per_cluster: int
    dim: int
    centers: np.ndarray
    spread: float | Sequence[float] = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.k_true < 1:
            raise ConfigError("k_true must be >= 1")
        centers = np.asarray(self.centers, dtype=float)
        if centers.shape != (self.k_true, self.dim):
            raise ConfigError(f"centers must be {self.k_true} x {self.dim}")
        if np.any(np.asarray(self.spread, dtype=float) <= 0):
            raise ConfigError("spread must be > 0")


def separated_centers(k: int, dim: int, min_dist: float, box: float, seed: int = 0,
                      max_tries: int = 10_000) -> np.ndarray:
    """Draw ``k`` centers uniformly in ``[0, box]^dim`` with pairwise distance >= ``min_dist``."""
    rng = np.random.default_rng(seed)
    centers = []
    for _ in range(max_tries):
        c = rng.uniform(0.0, box, size=dim)
        if all(np.linalg.norm(c - o) >= min_dist for o in centers):
            centers.append(c)
            if len(centers) == k:
                return np.array(centers)
    raise ConfigError(f"could not place {k} centers {min_dist} apart in a box of side {box}")


def simplex_centers(k: int, dim: int, gap: float) -> np.ndarray:
    """``k`` centers on scaled coordinate axes, every pair exactly ``gap`` apart."""
    if k > dim:
        raise ConfigError(f"equidistant layout needs dim >= k, got k={k}, dim={dim}")
    centers = np.zeros((k, dim))
    centers[np.arange(k), np.arange(k)] = gap / math.sqrt(2.0)
    return centers


def make_blobs(spec: BlobSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    spread = np.broadcast_to(np.asarray(spec.spread, dtype=float), (spec.k_true,))
    centers = np.asarray(spec.centers, dtype=float)
    parts = [centers[c] + spread[c] * rng.standard_normal((spec.n_per_cluster, spec.dim))
             for c in range(spec.k_true)]
    rows = np.vstack(parts) if parts else np.empty((0, spec.dim))
    labels = np.repeat(np.arange(spec.k_true), spec.n_per_cluster)
    schema = tuple(FeatureSchema(f"x{j}", NUMERIC) for j in range(spec.dim))
    return Dataset(schema, rows, labels=labels, name="blobs")


def _parse_float(token: str, row: int, col: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"row {row}: non-numeric token {token!r} in numeric column {col!r}") from None
    if not math.isfinite(value):
        raise ParseError(f"row {row}: non-finite value in column {col!r}")
    return value


def _is_number(token: str) -> bool:
    try:
        return math.isfinite(float(token))
    except ValueError:
        return False


def ingest_csv(path, schema_hints: Mapping[str, object] | None = None, label_column: str | None = None,
               id_column: str | None = None, name: str | None = None) -> Dataset:
    """Read a headed CSV file into a :class:`Dataset`.

    Args:
        path: CSV file with a header row.
        schema_hints: Optional per-column hints. A value is either ``"categorical"``,
            ``"numeric"``, or a dict as produced by :meth:`FeatureSchema.hint`
            (fixed category order or bin edges). Columns without a hint are
            numeric when every token parses as a finite float, else categorical.
        label_column: Column holding ground-truth classes; kept out of the features.
        id_column: Column holding integer record ids; defaults to row order.

    Returns:
        The parsed dataset. Categories not fixed by a hint get codes in order
        of first appearance.
    """
    path = Path(path)
    hints = dict(schema_hints or {})
    with path.open(newline="", encoding="utf-8") as fh:
        records = list(csv.reader(fh))
    records = [r for r in records if r]
    if not records:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in records[0]]
    body = records[1:]
    if not body:
        raise ParseError(f"{path}: no data rows")
    for i, rec in enumerate(body, start=1):
        if len(rec) != len(header):
            raise ParseError(f"row {i}: expected {len(header)} fields, got {len(rec)}")
        for j, tok in enumerate(rec):
            if tok.strip() == "":
                raise ParseError(f"row {i}: missing value in column {header[j]!r}")
    for col in [label_column, id_column, *hints]:
        if col is not None and col not in header:
            raise ParseError(f"{path}: column {col!r} not in header")

    columns = {h: [rec[j].strip() for rec in body] for j, h in enumerate(header)}
    ids = None
    if id_column is not None:
        ids = [int(_parse_float(t, i, id_column)) for i, t in enumerate(columns[id_column], start=1)]
    labels = None
    if label_column is not None:
        labels = _encode_labels(columns[label_column])

    schema, cols = [], []
    for col in header:
        if col in (label_column, id_column):
            continue
        hint = hints.get(col)
        if isinstance(hint, str):
            hint = {"kind": hint}
        tokens = columns[col]
        if hint is None:
            hint = {"kind": NUMERIC if all(_is_number(t) for t in tokens) else CATEGORICAL}
        kind = hint["kind"]
        if kind == CATEGORICAL:
            cats = list(hint.get("categories") or [])
            fixed = bool(cats)
            index = {c: i for i, c in enumerate(cats)}
            codes = []
            for i, t in enumerate(tokens, start=1):
                if t not in index:
                    if fixed:
                        raise ParseError(f"row {i}: unknown category {t!r} in column {col!r}")
                    index[t] = len(cats)
                    cats.append(t)
                codes.append(index[t])
            schema.append(FeatureSchema(col, CATEGORICAL, m=len(cats), categories=tuple(cats)))
            cols.append(np.array(codes, dtype=float))
        elif kind == NUMERIC:
            values = np.array([_parse_float(t, i, col) for i, t in enumerate(tokens, start=1)])
            edges = hint.get("bin_edges")
            if edges is not None:
                schema.append(FeatureSchema(col, NUMERIC, m=len(edges) - 1, bin_edges=tuple(float(e) for e in edges)))
            else:
                schema.append(FeatureSchema(col, NUMERIC))
            cols.append(values)
        else:
            raise ConfigError(f"column {col!r}: unknown kind {kind!r}")
    if not cols:
        raise ParseError(f"{path}: no feature columns")
    rows = np.column_stack(cols)
    return Dataset(tuple(schema), rows, ids=ids, labels=labels, name=name or path.stem)


def _encode_labels(tokens: Sequence[str]) -> np.ndarray:
    if all(_is_number(t) and float(t).is_integer() for t in tokens):
        return np.array([int(float(t)) for t in tokens])
    index: dict[str, int] = {}
    return np.array([index.setdefault(t, len(index)) for t in tokens])


def _format_cell(feat: FeatureSchema, value: float) -> str:
    if feat.kind == CATEGORICAL:
        code = int(value)
        return feat.categories[code] if feat.categories is not None else str(code)
    if feat.bin_edges is not None:
        return str(int(value))
    return repr(float(value))


def write_csv(d: Dataset, path, label_column: str = "label", id_column: str = "id") -> None:
    """Write ``d`` as a headed CSV (id column first, label column last if present)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = [id_column, *d.names]
        if d.labels is not None:
            header.append(label_column)
        w.writerow(header)
        for i in range(d.n):
            rec = [str(int(d.ids[i]))]
            rec += [_format_cell(f, d.rows[i, j]) for j, f in enumerate(d.schema)]
            if d.labels is not None:
                rec.append(str(d.labels[i]))
            w.writerow(rec)


def schema_hints(d: Dataset) -> dict[str, dict]:
    return {f.name: f.hint() for f in d.schema}


def standardize(d: Dataset) -> Dataset:
    """Z-score every raw numeric column (population std); constant columns are only centered.

    Categorical and discretized columns are left untouched.
    """
    if d.n < 2:
        raise ValueError("standardize needs at least 2 rows")
    rows = np.array(d.rows, dtype=float)
    for j, feat in enumerate(d.schema):
        if feat.discrete:
            continue
        col = rows[:, j]
        sd = col.std(ddof=0)
        # the mean of equal floats can round, leaving a tiny nonzero std, so test constancy exactly
        if col.min() == col.max() or sd == 0:
            rows[:, j] = 0.0
        else:
            rows[:, j] = (col - col.mean()) / sd
    return replace(d, rows=rows)


def split_sizes(n: int, shares: Sequence[float], rng: np.random.Generator) -> list[int]:
    """Largest-remainder rounding of ``n * share``; remainder ties broken by ``rng``."""
    shares = np.asarray(shares, dtype=float)
    raw = n * shares
    sizes = np.floor(raw).astype(int)
    left = n - sizes.sum()
    if left:
        frac = raw - sizes
        # random tiebreak, then stable sort on the fractional part (descending)
        jitter = rng.permutation(len(shares))
        order = sorted(range(len(shares)), key=lambda i: (-round(frac[i], 12), jitter[i]))
        for i in order[:left]:
            sizes[i] += 1
    return sizes.tolist()


def partition(d: Dataset, shares: Sequence[float], seed: int = 0) -> list[Dataset]:
    """Randomly split ``d`` into disjoint datasets with sizes proportional to ``shares``."""
    shares = list(shares)
    if not shares or any(s <= 0 for s in shares):
        raise ConfigError("shares must be positive")
    if abs(sum(shares) - 1.0) > 1e-9:
        raise ConfigError(f"shares sum to {sum(shares)}, not 1")
    rng = np.random.default_rng(seed)
    sizes = split_sizes(d.n, shares, rng)
    perm = rng.permutation(d.n)
    out, start = [], 0
    for i, size in enumerate(sizes):
        idx = np.sort(perm[start:start + size])
        out.append(replace(d.take(idx), name=f"{d.name}-owner{i}"))
        start += size
    return out


def concat(parts: Sequence[Dataset], name: str | None = None) -> Dataset:
    """Row-concatenate datasets sharing one schema."""
    if not parts:
        raise ValueError("nothing to concatenate")
    schema = parts[0].schema
    for p in parts[1:]:
        if p.schema != schema:
            raise ValueError("schemas differ")
    has_labels = all(p.labels is not None for p in parts)
    return replace(
        parts[0],
        rows=np.vstack([p.rows for p in parts]),
        ids=np.concatenate([p.ids for p in parts]),
        labels=np.concatenate([p.labels for p in parts]) if has_labels else None,
        name=name or parts[0].name,
    )

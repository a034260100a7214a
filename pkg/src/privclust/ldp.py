"""Generalized randomized response (GRR) over discrete state domains.

Each feature with ``m`` states is perturbed independently: the true state is
kept with probability ``p = e^eps / (e^eps + m - 1)`` and every other state is
reported with probability ``q = 1 / (e^eps + m - 1)``, so ``p / q = e^eps``.
Numeric features must first be mapped to equal-width bins by
:func:`discretize`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import NUMERIC, Dataset, ingest_csv, write_csv
from .errors import DomainError, EstimationError, ParameterError, ParseError, StateError

DEFAULT_BINS = 10


@dataclass(frozen=True)
class RRParams:
    epsilon: float
    m: int
    p: float
    q: float


def rr_params(epsilon: float, m: int) -> RRParams:
    if not (isinstance(epsilon, (int, float)) and math.isfinite(epsilon) and epsilon > 0):
        raise ParameterError(f"epsilon must be a positive finite number, got {epsilon!r}")
    if int(m) != m or m < 1:
        raise ParameterError(f"m must be an integer >= 1, got {m!r}")
    m = int(m)
    if m == 1:
        return RRParams(float(epsilon), 1, 1.0, 0.0)
    # written with e^-eps so large budgets do not overflow
    t = math.exp(-epsilon)
    denom = 1.0 + (m - 1) * t
    return RRParams(float(epsilon), m, 1.0 / denom, t / denom)


def _respond(codes: np.ndarray, params: RRParams, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF GRR: one uniform per value.

    ``u < p`` keeps the value; otherwise ``(u - p) / q`` indexes the m-1 other
    states in increasing order.
    """
    codes = np.asarray(codes, dtype=np.int64)
    if params.m == 1 or params.q == 0.0:
        return codes.copy()
    other = np.clip((u - params.p) / params.q, 0, params.m - 2).astype(np.int64)
    other = np.where(other >= codes, other + 1, other)
    return np.where(u < params.p, codes, other)


def perturb_value(v: int, params: RRParams, rng: np.random.Generator) -> int:
    """Report ``v`` with probability p, each other state with probability q."""
    if int(v) != v or not 0 <= v < params.m:
        raise DomainError(f"state {v!r} outside [0, {params.m})")
    u = rng.random()
    return int(_respond(np.array([v]), params, np.array([u]))[0])


def common_bounds(datasets: Sequence[Dataset]) -> list[tuple[float, float] | None]:
    """Per-column (min, max) over several datasets; ``None`` for non-raw-numeric columns."""
    first = datasets[0]
    out = []
    for j, feat in enumerate(first.schema):
        if feat.kind == NUMERIC and feat.bin_edges is None:
            lo = min(float(ds.rows[:, j].min()) for ds in datasets)
            hi = max(float(ds.rows[:, j].max()) for ds in datasets)
            out.append((lo, hi))
        else:
            out.append(None)
    return out


def discretize(d: Dataset, bins_per_feature: int = DEFAULT_BINS,
               bounds: Sequence[tuple[float, float] | None] | None = None) -> Dataset:
    """Quantize raw numeric columns into equal-width bins.

    Args:
        d: Dataset; categorical and already-discretized columns pass through.
        bins_per_feature: Number of bins per numeric column (>= 2).
        bounds: Optional per-column ``(lo, hi)`` range shared by several owners.
            Defaults to each column's own min and max. Values outside the range
            fall into the first or last bin.

    Returns:
        Dataset whose numeric columns hold bin codes, with ``bin_edges`` and
        ``m`` recorded in the schema. A constant column becomes a single bin.
    """
    if bins_per_feature < 2:
        raise ParameterError("bins_per_feature must be >= 2")
    rows = np.array(d.rows, dtype=float)
    schema = list(d.schema)
    for j, feat in enumerate(d.schema):
        if feat.discrete:
            continue
        col = rows[:, j]
        if bounds is not None and bounds[j] is not None:
            lo, hi = map(float, bounds[j])
        else:
            lo, hi = float(col.min()), float(col.max())
        if hi <= lo:
            rows[:, j] = 0.0
            schema[j] = replace(feat, m=1, bin_edges=(lo, lo))
            continue
        edges = np.linspace(lo, hi, bins_per_feature + 1)
        codes = np.floor((col - lo) / (hi - lo) * bins_per_feature)
        rows[:, j] = np.clip(codes, 0, bins_per_feature - 1)
        schema[j] = replace(feat, m=bins_per_feature, bin_edges=tuple(edges.tolist()))
    return replace(d, schema=tuple(schema), rows=rows)


@dataclass(frozen=True, eq=False)
class NoisyDataset(Dataset):
    """Perturbed copy of a dataset; labels are always absent."""

    epsilon: float = 0.0
    params: tuple[RRParams, ...] = ()

    def __post_init__(self):
        if self.labels is not None:
            raise StateError("noisy datasets never carry labels")
        super().__post_init__()
        if len(self.params) != len(self.schema):
            raise ValueError("need one RRParams per feature")


def record_uniforms(ids: np.ndarray, d: int, seed: int) -> np.ndarray:
    """``len(ids) x d`` uniforms; row i comes from a stream keyed by (seed, ids[i]).

    Column j of a row is the j-th draw of that record's stream, so every cell
    is a fixed function of (seed, record id, feature index) regardless of row
    order or batching.
    """
    out = np.empty((len(ids), d))
    for i, rid in enumerate(ids):
        out[i] = np.random.default_rng([int(seed), int(rid)]).random(d)
    return out


def perturb_dataset(d: Dataset, epsilon: float, seed: int) -> NoisyDataset:
    """Pass every cell of a fully discrete dataset through GRR; drop labels."""
    for feat in d.schema:
        if not feat.discrete:
            raise StateError(f"numeric feature {feat.name!r} has no bin_edges; call discretize() first")
    if np.any(d.ids < 0):
        raise ValueError("record ids must be non-negative to key RNG streams")
    params = tuple(rr_params(epsilon, f.m) for f in d.schema)
    u = record_uniforms(d.ids, d.d, seed)
    rows = np.empty_like(d.rows)
    for j, prm in enumerate(params):
        rows[:, j] = _respond(d.rows[:, j].astype(np.int64), prm, u[:, j])
    return NoisyDataset(d.schema, rows, ids=d.ids, labels=None, name=f"{d.name}-noisy",
                        epsilon=float(epsilon), params=params)


def estimate_frequencies(observed_counts, params: RRParams) -> np.ndarray:
    """Unbiased state frequencies from GRR output counts: ``(c/N - q) / (p - q)``."""
    counts = np.asarray(observed_counts, dtype=float)
    if params.m < 2 or counts.shape != (params.m,):
        raise ParameterError(f"need {params.m} counts with m >= 2")
    total = counts.sum()
    if total < 1:
        raise ParameterError("counts must total at least 1")
    if params.p == params.q:
        raise EstimationError("p == q: the responses carry no information")
    return (counts / total - params.q) / (params.p - params.q)


def estimate_from_responses(codes, params: RRParams) -> np.ndarray:
    counts = np.bincount(np.asarray(codes, dtype=np.int64), minlength=params.m)
    return estimate_frequencies(counts, params)


def sidecar_path(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.name + ".meta.json")


def write_noisy(nd: NoisyDataset, path) -> Path:
    """Write the noisy CSV plus a JSON sidecar with epsilon and per-feature domains."""
    write_csv(nd, path)
    meta = {
        "epsilon": nd.epsilon,
        "features": [
            {**f.hint(), "name": f.name, "m": f.m, "p": prm.p, "q": prm.q}
            for f, prm in zip(nd.schema, nd.params)
        ],
    }
    side = sidecar_path(path)
    side.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return side


def read_noisy(path) -> NoisyDataset:
    side = sidecar_path(path)
    if not side.exists():
        raise ParseError(f"missing sidecar metadata {side}")
    meta = json.loads(side.read_text(encoding="utf-8"))
    hints = {f["name"]: {k: f[k] for k in ("kind", "categories", "bin_edges") if k in f} for f in meta["features"]}
    d = ingest_csv(path, schema_hints=hints, id_column="id")
    eps = float(meta["epsilon"])
    params = tuple(rr_params(eps, f.m) for f in d.schema)
    return NoisyDataset(d.schema, d.rows, ids=d.ids, name=d.name, epsilon=eps, params=params)

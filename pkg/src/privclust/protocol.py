"""Five-step collaborative flow.

1. Each owner perturbs its dataset with GRR.
2. Each owner sends a uniform sample (fraction ``f``) of its noisy rows.
3. The server merges the shares and picks an algorithm and parameters.
4. The recommendation is broadcast back.
5. The owners cluster their pooled clean data with it and evaluate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import data as dm
from .clustering import ClusterAssignment
from .errors import PrivclustError, ProtocolError, ShareError
from .ldp import DEFAULT_BINS, NoisyDataset, common_bounds, discretize, perturb_dataset
from .metrics import MetricReport, evaluate
from .selection import AlgorithmCandidate, Recommendation, SelectionConfig, server_recommend


def derive_seed(seed: int, *keys: int) -> int:
    """Independent child seed for a (seed, key...) path."""
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1, np.uint32)[0])


@dataclass(frozen=True, eq=False)
class OwnerState:
    id: int
    dataset: dm.Dataset
    noisy: NoisyDataset
    share_fraction: float
    shared: NoisyDataset


def share_count(f: float, n: int) -> int:
    return int(math.floor(f * n + 0.5))


def owner_prepare(d: dm.Dataset, epsilon: float, f: float, seed: int, owner_id: int = 0) -> OwnerState:
    """Perturb every row of a discrete dataset, then sample ``round(f*n)`` rows to share."""
    if not 0 < f <= 1:
        raise ShareError(f"share fraction must be in (0, 1], got {f}", step="prepare")
    count = share_count(f, d.n)
    if count == 0:
        raise ShareError(f"owner {owner_id}: f={f} of {d.n} rows shares nothing", step="prepare")
    noisy = perturb_dataset(d, epsilon, derive_seed(seed, 1))
    rng = np.random.default_rng(derive_seed(seed, 2))
    idx = np.sort(rng.choice(d.n, size=count, replace=False))
    return OwnerState(owner_id, d, noisy, float(f), noisy.take(idx))


def server_combine(shares: Sequence[NoisyDataset]) -> NoisyDataset:
    if not shares:
        raise ProtocolError("no shares received", step="combine")
    first = shares[0]
    for s in shares[1:]:
        if s.schema != first.schema:
            raise ProtocolError("shares have different schemas", step="combine")
        if s.epsilon != first.epsilon or s.params != first.params:
            raise ProtocolError(f"shares use different budgets ({first.epsilon} vs {s.epsilon})", step="combine")
    return dm.concat(list(shares), name="combined-noisy")


def server_stage(states: Sequence[OwnerState], config: SelectionConfig, seed: int) -> Recommendation:
    """Steps 3-4. Reads nothing but each owner's shared noisy rows."""
    combined = server_combine([s.shared for s in states])
    return server_recommend(combined, config, seed)


@dataclass(frozen=True)
class ProtocolConfig:
    bins: int = DEFAULT_BINS
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    standardize: bool = False


@dataclass(frozen=True, eq=False)
class RunReport:
    recommendation: Recommendation
    final_assignment: ClusterAssignment
    metrics: MetricReport | None
    provenance: dict
    candidate_metrics: tuple[tuple[AlgorithmCandidate, MetricReport | None], ...] = ()
    server_input: NoisyDataset | None = None

    def to_record(self) -> dict:
        return {
            "recommendation": self.recommendation.to_record(),
            "metrics": None if self.metrics is None else self.metrics.as_dict(),
            "k_effective": self.final_assignment.k_effective,
            "provenance": self.provenance,
        }


def _step(name):
    def wrap(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ProtocolError:
            raise
        except (PrivclustError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            raise ProtocolError(f"{type(exc).__name__}: {exc}", step=name) from exc
    return wrap


def prepare_owners(owners: Sequence[dm.Dataset], epsilon: float, f: float, bins: int,
                   seed: int) -> list[OwnerState]:
    """Steps 1-2 for every owner. Bin edges come from the owners' common value range."""
    bounds = _step("discretize")(common_bounds, owners)
    states = []
    for i, owner in enumerate(owners):
        disc = _step("discretize")(discretize, owner, bins, bounds)
        states.append(_step("prepare")(owner_prepare, disc, epsilon, f, derive_seed(seed, 100, i), i))
    return states


def run_protocol(owners: Sequence[dm.Dataset], epsilon: float, f: float,
                 config: ProtocolConfig = ProtocolConfig(), seed: int = 0,
                 evaluate_all: bool = True) -> RunReport:
    """Run all five steps and score the result against the ground-truth labels.

    Args:
        owners: Clean datasets, one per owner, sharing a schema.
        epsilon: Per-feature GRR budget.
        f: Fraction of each owner's noisy rows sent to the server.
        config: Binning, server selection settings and the standardize flag.
        seed: Master seed; owners and the server derive their own seeds from it.
        evaluate_all: Also cluster the pooled clean data with every other
            candidate the server scored, for side-by-side tables.
    """
    owners = list(owners)
    if len(owners) < 2:
        raise ProtocolError("collaboration needs at least 2 owners", step="setup")
    if any(o.schema != owners[0].schema for o in owners[1:]):
        raise ProtocolError("owners do not share a schema", step="setup")
    sel = replace(config.selection, standardize=config.standardize)
    states = prepare_owners(owners, epsilon, f, config.bins, seed)
    server_seed = derive_seed(seed, 200)
    rec = _step("recommend")(server_stage, states, sel, server_seed)
    combined = server_combine([s.shared for s in states])

    # step 5: owners trust each other and cluster the pooled clean rows
    pooled = dm.concat(owners, name="combined")
    if config.standardize:
        pooled = _step("cluster")(dm.standardize, pooled)
    x = pooled.rows
    final_seed = derive_seed(seed, 300)
    assignment = _step("cluster")(rec.best_algorithm.run, x, final_seed)
    truth = pooled.labels
    metrics = _step("evaluate")(evaluate, x, truth, assignment) if truth is not None else None
    cand_metrics = []
    if evaluate_all:
        for sc in rec.scored:
            cand = sc.candidate
            if cand == rec.best_algorithm:
                cand_metrics.append((cand, metrics))
                continue
            a = _step("cluster")(cand.run, x, final_seed)
            cand_metrics.append((cand, _step("evaluate")(evaluate, x, truth, a) if truth is not None else None))
    provenance = {
        "epsilon": float(epsilon),
        "share_fraction": float(f),
        "seed": int(seed),
        "owners": [o.n for o in owners],
        "shared_rows": int(sum(s.shared.n for s in states)),
        "bins": config.bins,
        "algorithms": list(sel.algorithms),
        "alpha": sel.alpha,
        "k_range": list(sel.k_range),
        "standardize": config.standardize,
    }
    return RunReport(rec, assignment, metrics, provenance, tuple(cand_metrics), combined)

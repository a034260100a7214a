"""Distance-based membership inference against the shared noisy rows.

The attacker holds candidate records and the server's noisy share. A record
scores its distance to the nearest shared row; it is declared a member when
that distance falls below a threshold calibrated on records known to be
outside the share (the control group) at a fixed false-positive rate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import data as dm
from .clustering import sq_distances
from .errors import ParameterError
from .ldp import DEFAULT_BINS, NoisyDataset, discretize
from .protocol import derive_seed, owner_prepare

MIN_GROUP = 20


@dataclass(frozen=True, eq=False)
class AttackSetup:
    case_group: dm.Dataset
    control_group: dm.Dataset
    shared: NoisyDataset
    distance: str = "euclidean-standardized"

    def __post_init__(self):
        if np.intersect1d(self.case_group.ids, self.control_group.ids).size:
            raise ParameterError("case and control groups overlap")


@dataclass(frozen=True)
class CurvePoint:
    epsilon: float
    threshold: float
    tpr: float
    fpr: float


@dataclass(frozen=True)
class AttackCurve:
    points: tuple[CurvePoint, ...]

    @property
    def epsilons(self) -> list[float]:
        return [p.epsilon for p in self.points]

    @property
    def tpr(self) -> np.ndarray:
        return np.array([p.tpr for p in self.points])

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epsilon", "threshold", "tpr", "fpr"])
            for p in self.points:
                w.writerow([repr(p.epsilon), repr(p.threshold), repr(p.tpr), repr(p.fpr)])


def _matrix(shared) -> np.ndarray:
    if isinstance(shared, dm.Dataset):
        return shared.decoded()
    return np.atleast_2d(np.asarray(shared, dtype=float))


def membership_scores(targets, shared) -> np.ndarray:
    """Distance from each target row to its nearest shared row."""
    s = _matrix(shared)
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    if len(s) == 0:
        raise ParameterError("shared set is empty")
    if t.shape[1] != s.shape[1]:
        raise ParameterError(f"dimension mismatch: targets have {t.shape[1]}, shared has {s.shape[1]}")
    out = np.empty(len(t))
    for start in range(0, len(t), 1024):
        out[start:start + 1024] = np.sqrt(sq_distances(t[start:start + 1024], s).min(1))
    return out


def membership_score(target, shared) -> float:
    return float(membership_scores(np.asarray(target, dtype=float)[None, :], shared)[0])


def calibrate_threshold(control_scores: Sequence[float], target_fpr: float) -> float:
    """Lower ``target_fpr``-quantile of the control scores.

    Declaring membership on ``score < threshold`` then flags at most a
    ``target_fpr`` fraction of the control group.
    """
    scores = np.asarray(control_scores, dtype=float)
    if not 0 < target_fpr < 1:
        raise ParameterError(f"target_fpr must be in (0, 1), got {target_fpr}")
    if len(scores) < MIN_GROUP:
        raise ParameterError(f"need at least {MIN_GROUP} control scores, got {len(scores)}")
    return float(np.quantile(scores, target_fpr, method="lower"))


def _standardizer(reference: np.ndarray):
    mu = reference.mean(0)
    sd = reference.std(0, ddof=0)
    sd = np.where(sd > 0, sd, 1.0)
    return lambda x: (x - mu) / sd


def run_attack(setup: AttackSetup, target_fpr: float = 0.1) -> CurvePoint:
    """Score both groups against ``setup.shared`` and measure TPR at the calibrated threshold."""
    case = setup.case_group.decoded()
    control = setup.control_group.decoded()
    z = _standardizer(np.vstack([case, control]))
    shared = z(setup.shared.decoded())
    case_s = membership_scores(z(case), shared)
    ctrl_s = membership_scores(z(control), shared)
    tau = calibrate_threshold(ctrl_s, target_fpr)
    return CurvePoint(setup.shared.epsilon, tau, float(np.mean(case_s < tau)), float(np.mean(ctrl_s < tau)))


def build_setup(population: dm.Dataset, epsilon: float, case_size: int, control_size: int, seed: int,
                bins: int = DEFAULT_BINS, null: bool = False) -> AttackSetup:
    """Draw disjoint case/control groups and share the case group's noisy rows.

    The groups keep their clean values (the attacker knows its targets); only
    the shared rows go through discretization and perturbation.

    With ``null`` the shared rows come from a third, disjoint group, so the
    share carries no information about the case group.
    """
    need = case_size + control_size + (case_size if null else 0)
    if population.n < need:
        raise ParameterError(f"population of {population.n} rows is smaller than the {need} needed")
    disc = discretize(population, bins)
    rng = np.random.default_rng(derive_seed(seed, 500))
    perm = rng.permutation(population.n)
    case_idx = np.sort(perm[:case_size])
    control_idx = np.sort(perm[case_size:case_size + control_size])
    source_idx = np.sort(perm[need - case_size:need]) if null else case_idx
    case, control = population.take(case_idx).without_labels(), population.take(control_idx).without_labels()
    source = disc.take(source_idx).without_labels()
    state = owner_prepare(source, epsilon, 1.0, derive_seed(seed, 501))
    return AttackSetup(case, control, state.shared)


def attack_power(population_factory: Callable[[int], dm.Dataset], eps_grid: Sequence[float], case_size: int,
                 control_size: int, target_fpr: float = 0.1, seeds: Sequence[int] = (0,),
                 bins: int = DEFAULT_BINS, null: bool = False) -> AttackCurve:
    """Attack TPR at a fixed control FPR for each budget, averaged over seeds.

    Args:
        population_factory: ``seed -> Dataset`` of clean records to draw groups from.
        eps_grid: Budgets to evaluate.
        case_size: Rows whose noisy versions are shared.
        control_size: Rows never shared; used to calibrate the threshold.
        target_fpr: False-positive rate the threshold is calibrated to.
        seeds: One independent population draw and perturbation per seed. The
            same seed is reused across budgets so curves are paired.
        null: Share an unrelated group instead of the case group.
    """
    if case_size < MIN_GROUP or control_size < MIN_GROUP:
        raise ParameterError(f"case and control groups need at least {MIN_GROUP} rows")
    if not len(eps_grid):
        raise ParameterError("empty epsilon grid")
    seeds = list(seeds)
    if not seeds:
        raise ParameterError("no seeds")
    acc = {float(e): [] for e in eps_grid}
    for seed in seeds:
        pop = population_factory(seed)
        for eps in acc:
            setup = build_setup(pop, eps, case_size, control_size, seed, bins, null)
            acc[eps].append(run_attack(setup, target_fpr))
    points = []
    for eps in sorted(acc):
        pts = acc[eps]
        points.append(CurvePoint(
            eps,
            float(np.mean([p.threshold for p in pts])),
            float(np.mean([p.tpr for p in pts])),
            float(np.mean([p.fpr for p in pts])),
        ))
    return AttackCurve(tuple(points))


def count_inversions(values) -> tuple[int, float]:
    """Adjacent decreases in ``values``: (count, largest drop)."""
    drops = [a - b for a, b in zip(values[:-1], values[1:]) if b < a]
    return len(drops), max(drops, default=0.0)

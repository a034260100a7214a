"""Experiment configuration: YAML file -> validated dataclasses.

Example (every key optional except where noted)::

    dataset:
      source: blobs            # blobs | csv
      layout: simplex          # blobs only: simplex (equidistant) | random
      k_true: 7
      n_per_cluster: 300
      dim: 8
      spread: 1.0
      min_center_distance: 10.0  # exact gap for simplex, lower bound for random
      box: 20.0                  # random layout only
      data_seed: 1
      # path: data/obesity.csv # csv only (required)
      # label_column: NObeyesdad
      # hints: {Gender: categorical}
    owners:
      shares: [0.5, 0.5]
    experiment:
      epsilons: [0.1, 1, 5]
      fractions: [0.1]
      alpha: 0.1
      k_range: [2, 12]
      algorithms: [kmeans, hierarchical, gmm, dbscan]
      linkage: ward
      seeds: [0, 1, 2]
      standardize: false
      bins: 10
    attack:
      epsilons: [0.1, 1, 5, 10]
      case_size: 150
      control_size: 150
      target_fpr: 0.1
    gapviz:
      epsilons: [1, 5, 10]
      clusters: [0, 1]
      dims: [0, 1]
    workers: 1
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import data as dm
from .clustering import LINKAGES
from .errors import ConfigError
from .ldp import DEFAULT_BINS
from .mia import MIN_GROUP
from .protocol import ProtocolConfig
from .selection import DEFAULT_ALPHA, DEFAULT_K_RANGE, KINDS, SelectionConfig


@dataclass(frozen=True)
class DatasetConfig:
    source: str = "blobs"
    layout: str = "simplex"
    k_true: int = 7
    n_per_cluster: int = 300
    dim: int = 8
    spread: float = 1.0
    min_center_distance: float = 10.0
    box: float = 20.0
    data_seed: int = 1
    path: str | None = None
    label_column: str | None = None
    id_column: str | None = None
    hints: dict = field(default_factory=dict)

    def blob_spec(self, seed: int | None = None) -> dm.BlobSpec:
        if self.layout == "simplex":
            centers = dm.simplex_centers(self.k_true, self.dim, self.min_center_distance)
        else:
            centers = dm.separated_centers(self.k_true, self.dim, self.min_center_distance, self.box,
                                           seed=self.data_seed)
        return dm.BlobSpec(self.k_true, self.n_per_cluster, self.dim, centers, self.spread,
                           seed=self.data_seed if seed is None else seed)

    def load(self, seed: int | None = None) -> dm.Dataset:
        """The clean dataset. For blobs, ``seed`` redraws the points around fixed centers."""
        if self.source == "blobs":
            return dm.make_blobs(self.blob_spec(seed))
        return dm.ingest_csv(self.path, self.hints, label_column=self.label_column, id_column=self.id_column)


@dataclass(frozen=True)
class AttackConfig:
    epsilons: tuple[float, ...] = (0.1, 1.0, 5.0, 10.0)
    case_size: int = 150
    control_size: int = 150
    target_fpr: float = 0.1
    null: bool = False


@dataclass(frozen=True)
class GapvizConfig:
    epsilons: tuple[float, ...] = (1.0, 5.0, 10.0)
    clusters: tuple[int, ...] | None = None
    dims: tuple[int, int] = (0, 1)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    shares: tuple[float, ...] = (0.5, 0.5)
    epsilons: tuple[float, ...] = (0.1, 1.0, 5.0)
    fractions: tuple[float, ...] = (0.1,)
    alpha: float = DEFAULT_ALPHA
    k_range: tuple[int, int] = DEFAULT_K_RANGE
    algorithms: tuple[str, ...] = KINDS
    linkage: str = "ward"
    seeds: tuple[int, ...] = (0,)
    standardize: bool = False
    bins: int = DEFAULT_BINS
    dbscan_eps: float | None = None
    dbscan_min_pts: int | None = None
    attack: AttackConfig = field(default_factory=AttackConfig)
    gapviz: GapvizConfig = field(default_factory=GapvizConfig)
    workers: int = 1

    @property
    def selection(self) -> SelectionConfig:
        return SelectionConfig(alpha=self.alpha, k_range=tuple(self.k_range), algorithms=tuple(self.algorithms),
                               linkage=self.linkage, standardize=self.standardize,
                               dbscan_eps=self.dbscan_eps, dbscan_min_pts=self.dbscan_min_pts)

    @property
    def protocol(self) -> ProtocolConfig:
        return ProtocolConfig(bins=self.bins, selection=self.selection, standardize=self.standardize)

    def as_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Stable hash of everything that affects results (workers excluded)."""
        payload = self.as_dict()
        payload.pop("workers")
        blob = json.dumps(payload, sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _tuple(value, name, cast=float):
    if value is None:
        return None
    if not isinstance(value, (list, tuple)):
        value = [value]
    try:
        return tuple(cast(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a list of {cast.__name__}, got {value!r}") from None


def _section(raw: dict, key: str) -> dict:
    sec = raw.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{key}: expected a mapping")
    return sec


def _build(cls, raw: dict, section: str, converters: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        conv = converters.get(key)
        try:
            kwargs[key] = conv(value) if conv and value is not None else value
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{section}.{key}: {exc}") from None
    return cls(**kwargs)


def from_dict(raw: dict | None, base_dir: Path | None = None) -> ExperimentConfig:
    raw = dict(raw or {})
    allowed = {"dataset", "owners", "experiment", "attack", "gapviz", "workers"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    ds_raw = dict(_section(raw, "dataset"))
    if ds_raw.get("path") and base_dir is not None and not Path(ds_raw["path"]).is_absolute():
        ds_raw["path"] = str(base_dir / ds_raw["path"])
    dataset = _build(DatasetConfig, ds_raw, "dataset", {
        "k_true": int, "n_per_cluster": int, "dim": int, "spread": float,
        "min_center_distance": float, "box": float, "data_seed": int, "hints": dict,
    })
    exp = dict(_section(raw, "experiment"))
    owners = _section(raw, "owners")
    if set(owners) - {"shares"}:
        raise ConfigError(f"owners: unknown keys {sorted(set(owners) - {'shares'})}")
    if "shares" in owners:
        exp["shares"] = owners["shares"]
    attack = _build(AttackConfig, _section(raw, "attack"), "attack", {
        "epsilons": lambda v: _tuple(v, "attack.epsilons"),
        "case_size": int, "control_size": int, "target_fpr": float, "null": bool,
    })
    gapviz = _build(GapvizConfig, _section(raw, "gapviz"), "gapviz", {
        "epsilons": lambda v: _tuple(v, "gapviz.epsilons"),
        "clusters": lambda v: _tuple(v, "gapviz.clusters", int),
        "dims": lambda v: _tuple(v, "gapviz.dims", int),
    })
    cfg = _build(ExperimentConfig, exp, "experiment", {
        "shares": lambda v: _tuple(v, "owners.shares"),
        "epsilons": lambda v: _tuple(v, "experiment.epsilons"),
        "fractions": lambda v: _tuple(v, "experiment.fractions"),
        "alpha": float,
        "k_range": lambda v: _tuple(v, "experiment.k_range", int),
        "algorithms": lambda v: _tuple(v, "experiment.algorithms", str),
        "seeds": lambda v: _tuple(v, "experiment.seeds", int),
        "standardize": bool,
        "bins": int,
        "dbscan_eps": float,
        "dbscan_min_pts": int,
    })
    workers = raw.get("workers", 1)
    if not isinstance(workers, int):
        raise ConfigError("workers: expected an integer")
    return replace(cfg, dataset=dataset, attack=attack, gapviz=gapviz, workers=workers)


def load(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return from_dict(raw, base_dir=path.parent)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check every field before any work starts; raises ConfigError naming the field."""
    ds = cfg.dataset
    if ds.source not in ("blobs", "csv"):
        raise ConfigError(f"dataset.source: expected 'blobs' or 'csv', got {ds.source!r}")
    if ds.source == "csv":
        if not ds.path:
            raise ConfigError("dataset.path: required for csv datasets")
        if not Path(ds.path).exists():
            raise ConfigError(f"dataset.path: {ds.path} does not exist")
    else:
        if ds.k_true < 1 or ds.n_per_cluster < 1 or ds.dim < 1:
            raise ConfigError("dataset: k_true, n_per_cluster and dim must be >= 1")
        if ds.spread <= 0:
            raise ConfigError("dataset.spread: must be > 0")
        if ds.layout not in ("simplex", "random"):
            raise ConfigError(f"dataset.layout: expected 'simplex' or 'random', got {ds.layout!r}")
        if ds.layout == "simplex" and ds.dim < ds.k_true:
            raise ConfigError("dataset.dim: the simplex layout needs dim >= k_true")
    for name in ("shares", "epsilons", "fractions", "seeds", "algorithms"):
        if not getattr(cfg, name):
            raise ConfigError(f"experiment.{name}: must be non-empty")
    if any(s <= 0 for s in cfg.shares) or abs(sum(cfg.shares) - 1) > 1e-9:
        raise ConfigError(f"owners.shares: must be positive and sum to 1, got {list(cfg.shares)}")
    if any(not (e > 0 and np.isfinite(e)) for e in cfg.epsilons):
        raise ConfigError("experiment.epsilons: every budget must be positive and finite")
    if any(not 0 < f <= 1 for f in cfg.fractions):
        raise ConfigError("experiment.fractions: every fraction must be in (0, 1]")
    if cfg.alpha < 0:
        raise ConfigError("experiment.alpha: must be >= 0")
    if len(cfg.k_range) != 2 or cfg.k_range[0] < 1 or cfg.k_range[1] - cfg.k_range[0] < 2:
        raise ConfigError("experiment.k_range: need [lo, hi] with lo >= 1 spanning at least 3 values")
    bad = set(cfg.algorithms) - set(KINDS)
    if bad:
        raise ConfigError(f"experiment.algorithms: unknown {sorted(bad)}; choose from {list(KINDS)}")
    if cfg.linkage not in LINKAGES:
        raise ConfigError(f"experiment.linkage: choose from {list(LINKAGES)}")
    if cfg.bins < 2:
        raise ConfigError("experiment.bins: must be >= 2")
    if cfg.dbscan_eps is not None and cfg.dbscan_eps <= 0:
        raise ConfigError("experiment.dbscan_eps: must be > 0")
    if cfg.workers < 1:
        raise ConfigError("workers: must be >= 1")
    at = cfg.attack
    if not at.epsilons or any(e <= 0 for e in at.epsilons):
        raise ConfigError("attack.epsilons: must be non-empty and positive")
    if at.case_size < MIN_GROUP or at.control_size < MIN_GROUP:
        raise ConfigError(f"attack.case_size / attack.control_size: must be >= {MIN_GROUP}")
    if not 0 < at.target_fpr < 1:
        raise ConfigError("attack.target_fpr: must be in (0, 1)")
    gv = cfg.gapviz
    if not gv.epsilons or any(e <= 0 for e in gv.epsilons):
        raise ConfigError("gapviz.epsilons: must be non-empty and positive")
    if len(gv.dims) != 2:
        raise ConfigError("gapviz.dims: need exactly two column indices")
    return cfg

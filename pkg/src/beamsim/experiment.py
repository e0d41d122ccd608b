"""Seeded Monte Carlo driver for position-aided beam alignment.

Each snapshot draws traffic, picks a communicating vehicle (CV), perturbs its
reported position with GPS noise, looks up the reported cell in the prior,
and compares the short candidate sweep with an exhaustive sweep over the
region-of-interest beams on the same channel.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

from .channel import ArrayOrientation, PropagationConfig, assemble_channel, trace_paths
from .codebook import AngularSector, ArrayGeometry, beams_covering_sector, build_dft_codebook
from .prior import (
    CandidatePairs,
    GridSpec,
    LinkSetup,
    PriorDatabase,
    build_prior,
    candidate_pairs_for_cell,
    locate_cell,
)
from .scene import (
    NoEligibleVehicle,
    Scene,
    TrafficConfig,
    antenna_position,
    default_scene_template,
    sample_snapshot,
    select_communicating_vehicle,
)
from .search import AlignmentResult, PowerMeter, exhaustive_search, loss_status, power_loss_db, restricted_search

log = logging.getLogger(__name__)

CONFIG_SCHEMA_VERSION = 1
METRICS_SCHEMA = "beamsim.metrics/1"
CDF_SCHEMA = "beamsim.cdf/1"
NEGLIGIBLE_LOSS_DB = 0.5
MAX_RESAMPLES = 1000

DEFAULT_TX_SECTOR = AngularSector(-86.0, 86.0, -26.0, -2.0)
DEFAULT_RX_SECTOR = AngularSector(-86.0, 86.0, 2.0, 26.0)


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    array_sizes: tuple[int, ...] = (8, 16)
    snapshots: int = 100
    seed: int = 1
    gps_sigma: float = 2.5
    cv_window: float = 100.0
    K: int = 25
    top: int = 5
    noise_std: float = 0.0
    element_spacing: float = 0.5
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    scene: Scene = field(default_factory=default_scene_template)
    grid: GridSpec = field(default_factory=GridSpec)
    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    tx_orientation: ArrayOrientation = ArrayOrientation(yaw=90.0)
    rx_mount_yaw: float = -90.0  # relative to the CV heading
    rx_tilt: float = 0.0
    tx_sector: AngularSector = DEFAULT_TX_SECTOR
    rx_sector: AngularSector = DEFAULT_RX_SECTOR
    output_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.snapshots < 1:
            raise ConfigError("snapshots must be at least 1")
        if not self.array_sizes or any(int(n) != n or n < 1 for n in self.array_sizes):
            raise ConfigError(f"array_sizes must be positive integers, got {self.array_sizes}")
        if self.gps_sigma < 0:
            raise ConfigError("gps_sigma must be non-negative")
        if self.grid.extent < self.cv_window:
            raise ConfigError("grid extent must cover the CV selection window")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def geometry(self, n: int) -> ArrayGeometry:
        return ArrayGeometry.square(
            n, element_spacing=self.element_spacing,
            carrier_frequency=self.propagation.carrier_frequency)

    def link(self, n: int) -> LinkSetup:
        heading = self.scene.lanes[self.scene.cv_lane].heading
        rx = ArrayOrientation(heading + self.rx_mount_yaw, self.rx_tilt)
        return LinkSetup(self.geometry(n), self.geometry(n), self.tx_orientation, rx)

    def grid_for_scene(self) -> GridSpec:
        return replace(self.grid, origin=self.scene.infrastructure_position[0])


# -- config files -----------------------------------------------------------

_NESTED = {
    "traffic": TrafficConfig,
    "grid": GridSpec,
    "propagation": PropagationConfig,
    "tx_orientation": ArrayOrientation,
    "tx_sector": AngularSector,
    "rx_sector": AngularSector,
}


def _check_scalars(cls, data: dict, where: str) -> dict:
    """Coerce numeric fields by their defaults' types; reject anything else.

    YAML 1.1 reads ``6.0e10`` (no exponent sign) as a string, so numeric
    strings are accepted and converted rather than passed through.
    """
    out = dict(data)
    for f in fields(cls):
        if f.name not in out or not isinstance(f.default, (bool, int, float)):
            continue
        value, kind = out[f.name], type(f.default)
        if kind is bool:
            ok = isinstance(value, bool)
        elif isinstance(value, bool):
            ok = False
        elif kind is float:
            try:
                value, ok = float(value), True
            except (TypeError, ValueError):
                ok = False
        elif isinstance(value, float):
            ok = value.is_integer()
            value = int(value) if ok else value
        else:
            try:
                value, ok = int(str(value), 10), True
            except ValueError:
                ok = False
        if not ok:
            raise ConfigError(f"{where}.{f.name}: expected {kind.__name__}, got {out[f.name]!r}")
        out[f.name] = value
    return out


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    data = _check_scalars(cls, data, where)
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data or {})
    version = data.pop("schema_version", None)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {CONFIG_SCHEMA_VERSION}, got {version!r}")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    data = _check_scalars(ExperimentConfig, data, "config")
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _NESTED:
            kwargs[key] = _build(_NESTED[key], value, key)
        elif key == "scene":
            try:
                kwargs[key] = Scene.from_dict(value)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"scene: {exc}") from exc
        elif key == "array_sizes":
            kwargs[key] = tuple(int(n) for n in value)
        else:
            kwargs[key] = value
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out: dict[str, Any] = {"schema_version": CONFIG_SCHEMA_VERSION}
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name == "scene":
            out[f.name] = value.to_dict()
        elif f.name in _NESTED:
            out[f.name] = asdict(value)
        elif isinstance(value, tuple):
            out[f.name] = list(value)
        else:
            out[f.name] = value
    return out


def load_config(source: str | os.PathLike | None) -> ExperimentConfig:
    """Read a YAML config; ``None`` or ``"default"`` gives the built-in defaults."""
    if source is None or str(source) == "default":
        return ExperimentConfig()
    try:
        text = Path(source).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {source}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {source}: {exc}") from exc
    return config_from_dict(data)


# -- prior database ---------------------------------------------------------

def region_of_interest(cfg: ExperimentConfig, n: int) -> tuple[np.ndarray, np.ndarray]:
    link = cfg.link(n)
    tx = beams_covering_sector(build_dft_codebook(link.tx_geometry), link.tx_geometry, cfg.tx_sector)
    rx = beams_covering_sector(build_dft_codebook(link.rx_geometry), link.rx_geometry, cfg.rx_sector)
    return tx, rx


def build_prior_database(cfg: ExperimentConfig) -> PriorDatabase:
    grid = cfg.grid_for_scene()
    cells = build_prior(cfg.scene.empty(), grid, cfg.K, cfg.propagation)
    db = PriorDatabase(grid, cfg.K, cells)
    for n in cfg.array_sizes:
        link = cfg.link(n)
        tx_roi, rx_roi = region_of_interest(cfg, n)
        tx_cb = build_dft_codebook(link.tx_geometry)
        rx_cb = build_dft_codebook(link.rx_geometry)
        db.rois[n] = (tuple(int(i) for i in tx_roi), tuple(int(i) for i in rx_roi))
        db.candidates[n] = [
            CandidatePairs(c.cell_id, ())
            if c.empty
            else candidate_pairs_for_cell(c, tx_cb, rx_cb, link, tx_roi, rx_roi, cfg.top)
            for c in cells
        ]
    return db


# -- Monte Carlo ------------------------------------------------------------

METRIC_COLUMNS = (
    "snapshot", "resamples", "cv_x", "reported_x", "cell", "clamped", "n_paths", "los",
    "trained_pairs_exhaustive", "trained_pairs_restricted",
    "exhaustive_tx", "exhaustive_rx", "restricted_tx", "restricted_rx",
    "exhaustive_power_db", "restricted_power_db", "loss_db", "status",
)


def _sub_seeds(master: int, index: int, attempt: int, count: int) -> list[int]:
    seq = np.random.SeedSequence(master, spawn_key=(index, attempt))
    return [int(child.generate_state(1, np.uint64)[0]) for child in seq.spawn(count)]


def _db(power: float) -> float:
    return 10 * math.log10(power) if power > 0 else -math.inf


def simulate_snapshot(cfg: ExperimentConfig, db: PriorDatabase, index: int) -> dict[int, dict]:
    """Metrics row per array size for snapshot ``index``."""
    for attempt in range(MAX_RESAMPLES):
        traffic_seed, cv_seed, gps_seed, noise_seed = _sub_seeds(cfg.seed, index, attempt, 4)
        scene = sample_snapshot(cfg.scene, cfg.traffic, traffic_seed)
        try:
            cv = select_communicating_vehicle(scene, cv_seed, cfg.cv_window)
            break
        except NoEligibleVehicle:
            log.debug("snapshot %d attempt %d: no eligible CV, resampling", index, attempt)
    else:
        raise RuntimeError(f"snapshot {index}: no eligible CV after {MAX_RESAMPLES} draws")

    rx = antenna_position(cv)
    gps = np.random.default_rng(gps_seed)
    reported = rx[:2] + gps.normal(0.0, cfg.gps_sigma, 2)
    cell, clamped = locate_cell(reported, db.grid)
    tx = np.asarray(scene.infrastructure_position, dtype=float)
    paths = trace_paths(scene, tx, rx, 1, cfg.propagation)

    rows = {}
    for n in cfg.array_sizes:
        link = cfg.link(n)
        tx_cb = build_dft_codebook(link.tx_geometry)
        rx_cb = build_dft_codebook(link.rx_geometry)
        H = assemble_channel(paths, link.tx_geometry, link.rx_geometry,
                             link.tx_orientation, link.rx_orientation)
        meter = PowerMeter(H, tx_cb, rx_cb, cfg.noise_std, np.random.default_rng(noise_seed))
        tx_roi, rx_roi = db.rois[n]
        exhaustive = exhaustive_search(meter, tx_roi, rx_roi)
        candidates = db.pairs_for(n, cell)
        if len(candidates):
            restricted = restricted_search(meter, candidates)
        else:
            restricted = AlignmentResult(-1, -1, 0, 0.0, "restricted")
        rows[n] = {
            "snapshot": index,
            "resamples": attempt,
            "cv_x": float(rx[0]),
            "reported_x": float(reported[0]),
            "cell": cell,
            "clamped": int(clamped),
            "n_paths": len(paths),
            "los": int(any(p.kind == "LOS" for p in paths)),
            "trained_pairs_exhaustive": exhaustive.trained_pairs,
            "trained_pairs_restricted": restricted.trained_pairs,
            "exhaustive_tx": exhaustive.tx_beam,
            "exhaustive_rx": exhaustive.rx_beam,
            "restricted_tx": restricted.tx_beam,
            "restricted_rx": restricted.rx_beam,
            "exhaustive_power_db": _db(exhaustive.best_power),
            "restricted_power_db": _db(restricted.best_power),
            "loss_db": power_loss_db(exhaustive, restricted),
            "status": loss_status(exhaustive, restricted),
        }
    return rows


def _simulate_chunk(args) -> list[dict[int, dict]]:
    cfg, db, indices = args
    return [simulate_snapshot(cfg, db, i) for i in indices]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    tables: dict[int, list[dict]]
    rois: dict[int, tuple[tuple[int, ...], tuple[int, ...]]]

    def column(self, n: int, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.tables[n]])

    def summary(self) -> dict[int, dict]:
        return {n: summarize(rows) for n, rows in self.tables.items()}


def run_experiment(cfg: ExperimentConfig, db: PriorDatabase | None = None,
                   workers: int | None = None) -> ExperimentResult:
    """Run every snapshot; rows come back sorted by snapshot id."""
    if db is None:
        db = build_prior_database(cfg)
    missing = [n for n in cfg.array_sizes if n not in db.candidates]
    if missing:
        raise ConfigError(f"prior database lacks array sizes {missing}")
    workers = workers or cfg.workers
    indices = list(range(cfg.snapshots))
    if workers == 1:
        per_snapshot = [simulate_snapshot(cfg, db, i) for i in indices]
    else:
        chunks = [indices[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_snapshot = [r for part in pool.map(_simulate_chunk, [(cfg, db, c) for c in chunks]) for r in part]
        per_snapshot.sort(key=lambda rows: next(iter(rows.values()))["snapshot"])
    tables = {n: [rows[n] for rows in per_snapshot] for n in cfg.array_sizes}
    return ExperimentResult(cfg, tables, {n: db.rois[n] for n in cfg.array_sizes})


# -- metrics ----------------------------------------------------------------

def compute_cdf(values: Sequence[float]) -> list[tuple[float, float]]:
    """Empirical CDF as ``(value, P[X <= value])`` steps, one per distinct value."""
    data = np.sort(np.asarray(values, dtype=float))
    if data.size == 0:
        raise ValueError("cannot build a CDF from no values")
    distinct, counts = np.unique(data, return_counts=True)
    return [(float(v), float(c) / data.size) for v, c in zip(distinct, np.cumsum(counts))]


def summarize(rows: Sequence[dict]) -> dict:
    exhaustive = np.array([r["trained_pairs_exhaustive"] for r in rows], dtype=float)
    restricted = np.array([r["trained_pairs_restricted"] for r in rows], dtype=float)
    loss = np.array([r["loss_db"] for r in rows], dtype=float)
    finite = loss[np.isfinite(loss)]
    status = [r["status"] for r in rows]
    linked = loss[[s != "no_link" for s in status]]
    return {
        "rows": len(rows),
        "resamples": int(sum(r["resamples"] for r in rows)),
        "mean_trained_exhaustive": float(exhaustive.mean()),
        "mean_trained_restricted": float(restricted.mean()),
        "median_trained_restricted": float(np.median(restricted)),
        "overhead_ratio": float(restricted.mean() / exhaustive.mean()),
        "mean_loss_db": float(finite.mean()) if finite.size else math.nan,
        "median_loss_db": float(np.median(loss)),
        "fraction_negligible_loss": float(np.mean(loss <= NEGLIGIBLE_LOSS_DB)),
        # Same fraction over snapshots where exhaustive search found any power.
        "fraction_negligible_loss_linked": float(np.mean(linked <= NEGLIGIBLE_LOSS_DB)) if linked.size else math.nan,
        "los_fraction": float(np.mean([r["los"] for r in rows])),
        "no_link": status.count("no_link"),
        "blockage_miss": status.count("blockage_miss"),
    }


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.4f}"
    return str(value)


def metrics_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={METRICS_SCHEMA}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in METRIC_COLUMNS])
    return buf.getvalue()


def cdf_csv(values: Sequence[float], name: str) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={CDF_SCHEMA}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([name, "cdf"])
    for v, p in compute_cdf(values):
        writer.writerow([_fmt(v), f"{p:.6f}"])
    return buf.getvalue()


def read_metrics(path: str | os.PathLike) -> list[dict]:
    """Parse a ``metrics.csv`` back into rows with numeric fields."""
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    rows = []
    for raw in csv.DictReader(lines):
        row: dict[str, Any] = {}
        for key, value in raw.items():
            if key == "status":
                row[key] = value
            elif key in ("cv_x", "reported_x", "exhaustive_power_db", "restricted_power_db", "loss_db"):
                row[key] = float(value)
            else:
                row[key] = int(value)
        rows.append(row)
    return rows


def summary_text(result: ExperimentResult) -> str:
    cfg = result.config
    lines = [
        f"snapshots: {cfg.snapshots}",
        f"seed: {cfg.seed}",
        f"tx_sector: az [{cfg.tx_sector.azimuth_min}, {cfg.tx_sector.azimuth_max}]"
        f" el [{cfg.tx_sector.elevation_min}, {cfg.tx_sector.elevation_max}] deg",
        f"rx_sector: az [{cfg.rx_sector.azimuth_min}, {cfg.rx_sector.azimuth_max}]"
        f" el [{cfg.rx_sector.elevation_min}, {cfg.rx_sector.elevation_max}] deg",
    ]
    for n, stats in result.summary().items():
        tx_roi, rx_roi = result.rois[n]
        lines.append("")
        lines.append(f"[{n}x{n}]")
        lines.append(f"roi_beams: {len(tx_roi)} x {len(rx_roi)} = {len(tx_roi) * len(rx_roi)}")
        lines.extend(f"{k}: {_fmt(v)}" for k, v in stats.items())
    lines.append("")
    lines.append("reference_mean_loss_db_16x16: 8.0 (calibration reference, not gated)")
    return "\n".join(lines) + "\n"


def write_outputs(result: ExperimentResult, out_dir: str | os.PathLike) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    for n, rows in result.tables.items():
        sub = out / f"n{n}"
        sub.mkdir(exist_ok=True)
        (sub / "metrics.csv").write_text(metrics_csv(rows))
        counts = [r["trained_pairs_restricted"] for r in rows]
        (sub / "cdf_training_count.csv").write_text(cdf_csv(counts, "trained_pairs"))
        (sub / "cdf_loss_db.csv").write_text(cdf_csv([r["loss_db"] for r in rows], "loss_db"))
    (out / "summary.txt").write_text(summary_text(result))
    return out

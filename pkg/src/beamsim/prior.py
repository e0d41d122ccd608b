"""Long-term angular prior kept by the roadside unit.

The road next to the unit is cut into fixed-length cells. For each cell the
empty street is traced from the unit to a reference car parked at a few probe
points spread along the cell, and the strongest departure and arrival angles
are kept. Those angles are turned into a short list of beam pairs to train
whenever a vehicle reports a position inside the cell.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import ArrayOrientation, PropagationConfig, direction_vector, trace_paths
from .codebook import ArrayGeometry, Codebook, nearest_beam
from .scene import CAR_DIMENSIONS, Box, Scene, Vehicle, antenna_position

log = logging.getLogger(__name__)

PRIOR_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GridSpec:
    cell_length: float = 5.0
    extent: float = 100.0  # meters on either side of the origin
    origin: float = 0.0  # x of the roadside unit
    lane: int | None = None  # None means the scene's CV lane
    probe_count: int = 5  # probes spread evenly from cell start to end; 1 = center only

    def __post_init__(self):
        if not self.cell_length > 0:
            raise ValueError("cell_length must be positive")
        if not self.extent > 0:
            raise ValueError("extent must be positive")
        if self.probe_count < 1:
            raise ValueError("probe_count must be at least 1")

    @property
    def start(self) -> float:
        return self.origin - self.extent

    @property
    def n_cells(self) -> int:
        return int(math.ceil(2 * self.extent / self.cell_length - 1e-9))

    def cell_center(self, cell: int) -> float:
        return self.start + (cell + 0.5) * self.cell_length

    def probe_offsets(self) -> np.ndarray:
        if self.probe_count == 1:
            return np.zeros(1)
        half = self.cell_length / 2
        return np.linspace(-half, half, self.probe_count)


@dataclass(frozen=True)
class LinkSetup:
    """Arrays and their world-frame pointing at both link ends."""

    tx_geometry: ArrayGeometry
    rx_geometry: ArrayGeometry
    tx_orientation: ArrayOrientation = ArrayOrientation()
    rx_orientation: ArrayOrientation = ArrayOrientation()


@dataclass(frozen=True)
class CellPrior:
    cell_id: int
    center: float
    aod_list: tuple[tuple[float, float], ...] = ()
    aod_gains: tuple[float, ...] = ()
    aoa_list: tuple[tuple[float, float], ...] = ()
    aoa_gains: tuple[float, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.aod_list or not self.aoa_list


@dataclass(frozen=True)
class CandidatePairs:
    cell_id: int
    pairs: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.pairs)


def _distinct(angles, gains, k: int, min_sep: float):
    kept, kept_gain, dirs = [], [], []
    cos_sep = math.cos(math.radians(min_sep))
    for ang, g in zip(angles, gains):
        d = direction_vector(*ang)
        if any(float(np.dot(d, other)) > cos_sep for other in dirs):
            continue
        kept.append(ang)
        kept_gain.append(g)
        dirs.append(d)
        if len(kept) == k:
            break
    return tuple(kept), tuple(kept_gain)


def probe_vehicle(scene: Scene, x: float) -> Vehicle:
    lane = scene.lanes[scene.cv_lane]
    return Vehicle(Box.on_ground(x, lane.y, CAR_DIMENSIONS, lane.heading), "car", scene.cv_lane)


def build_prior(
    empty_scene: Scene,
    grid: GridSpec,
    K: int = 25,
    propagation: PropagationConfig | None = None,
    min_separation: float = 0.5,
    probe_body: bool = True,
) -> list[CellPrior]:
    """Strongest ``K`` departure/arrival angles per cell of the empty street."""
    if empty_scene.vehicles:
        raise ValueError("the prior is built from a scene without traffic")
    if K < 1:
        raise ValueError("K must be at least 1")
    if grid.lane is not None and grid.lane != empty_scene.cv_lane:
        empty_scene = _with_cv_lane(empty_scene, grid.lane)
    tx = np.asarray(empty_scene.infrastructure_position, dtype=float)
    cells = []
    for cell in range(grid.n_cells):
        x = grid.cell_center(cell)
        paths = []
        for offset in grid.probe_offsets():
            probe = probe_vehicle(empty_scene, x + offset)
            probed = Scene(empty_scene.lanes, empty_scene.buildings,
                           empty_scene.infrastructure_position, empty_scene.road_extent,
                           empty_scene.cv_lane, (probe,) if probe_body else ())
            paths.extend(trace_paths(probed, tx, antenna_position(probe), 1, propagation))
        # Stable sort: equal gains keep probe order.
        paths.sort(key=lambda p: -abs(p.gain))
        if not paths:
            log.warning("cell %d (x=%.1f m) has no path in the empty scene", cell, x)
            cells.append(CellPrior(cell, x))
            continue
        gains = [abs(p.gain) for p in paths]
        aod, aod_g = _distinct([p.aod for p in paths], gains, K, min_separation)
        aoa, aoa_g = _distinct([p.aoa for p in paths], gains, K, min_separation)
        cells.append(CellPrior(cell, x, aod, aod_g, aoa, aoa_g))
    return cells


def _with_cv_lane(scene: Scene, lane: int) -> Scene:
    return Scene(scene.lanes, scene.buildings, scene.infrastructure_position,
                 scene.road_extent, lane, scene.vehicles)


def _first_per_beam(beams: list[int], gains: Sequence[float]) -> list[tuple[int, float]]:
    strongest: dict[int, float] = {}
    for b, g in zip(beams, gains):
        strongest.setdefault(b, g)
    return list(strongest.items())


def candidate_pairs_for_cell(
    prior: CellPrior,
    tx_codebook: Codebook,
    rx_codebook: Codebook,
    link: LinkSetup,
    tx_allowed: Sequence[int] | None = None,
    rx_allowed: Sequence[int] | None = None,
    top: int = 5,
) -> CandidatePairs:
    """Beam pairs to train for one cell.

    Each prior angle is mapped to the strongest beam toward it (within the
    allowed subsets). The pairs are the rank-matched zip of the two mapped
    lists plus every combination of the ``top`` strongest distinct beams on
    each side. Duplicates are dropped and the order follows the product of
    the two prior path gains, strongest first.
    """
    if prior.empty:
        raise ValueError(f"cell {prior.cell_id} has an empty prior")
    tx_beams = [
        nearest_beam(tx_codebook, *link.tx_orientation.to_local(*a), allowed=tx_allowed)
        for a in prior.aod_list
    ]
    rx_beams = [
        nearest_beam(rx_codebook, *link.rx_orientation.to_local(*a), allowed=rx_allowed)
        for a in prior.aoa_list
    ]
    scored = [
        (prior.aod_gains[k] * prior.aoa_gains[k], (tx_beams[k], rx_beams[k]))
        for k in range(min(len(tx_beams), len(rx_beams)))
    ]
    for bt, gt in _first_per_beam(tx_beams, prior.aod_gains)[:top]:
        for br, gr in _first_per_beam(rx_beams, prior.aoa_gains)[:top]:
            scored.append((gt * gr, (bt, br)))
    # Stable sort keeps generation order among equal scores.
    scored.sort(key=lambda item: -item[0])
    pairs = tuple(dict.fromkeys(pair for _, pair in scored))
    return CandidatePairs(prior.cell_id, pairs)


def locate_cell(reported_position, grid: GridSpec) -> tuple[int, bool]:
    """Cell holding the longitudinal coordinate of a reported position.

    Points on a cell edge belong to the lower cell. Positions past either end
    of the grid are clamped to the end cell and flagged with ``True``.
    """
    x = float(np.atleast_1d(reported_position)[0])
    offset = (x - grid.start) / grid.cell_length
    cell = int(math.ceil(offset)) - 1
    clamped = x < grid.start or x > grid.origin + grid.extent
    return min(max(cell, 0), grid.n_cells - 1), clamped


@dataclass
class PriorDatabase:
    """Cell priors plus the derived candidate pairs for each array size."""

    grid: GridSpec
    K: int
    cells: list[CellPrior]
    candidates: dict[int, list[CandidatePairs]] = field(default_factory=dict)
    rois: dict[int, tuple[tuple[int, ...], tuple[int, ...]]] = field(default_factory=dict)

    def pairs_for(self, array_size: int, cell: int) -> CandidatePairs:
        return self.candidates[array_size][cell]

    def to_dict(self) -> dict:
        return {
            "schema_version": PRIOR_SCHEMA_VERSION,
            "grid": {"cell_length": self.grid.cell_length, "extent": self.grid.extent,
                     "origin": self.grid.origin, "lane": self.grid.lane,
                     "probe_count": self.grid.probe_count},
            "K": self.K,
            "cells": [
                {"cell_id": c.cell_id, "center": c.center,
                 "aod": [list(a) for a in c.aod_list], "aod_gains": list(c.aod_gains),
                 "aoa": [list(a) for a in c.aoa_list], "aoa_gains": list(c.aoa_gains)}
                for c in self.cells
            ],
            "candidates": {
                str(n): [[list(p) for p in cp.pairs] for cp in cands]
                for n, cands in sorted(self.candidates.items())
            },
            "rois": {str(n): {"tx": list(t), "rx": list(r)} for n, (t, r) in sorted(self.rois.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PriorDatabase":
        version = data.get("schema_version")
        if version != PRIOR_SCHEMA_VERSION:
            raise ValueError(f"unsupported prior schema_version {version!r}")
        grid = GridSpec(**data["grid"])
        cells = [
            CellPrior(c["cell_id"], c["center"],
                      tuple(tuple(a) for a in c["aod"]), tuple(c["aod_gains"]),
                      tuple(tuple(a) for a in c["aoa"]), tuple(c["aoa_gains"]))
            for c in data["cells"]
        ]
        candidates = {
            int(n): [CandidatePairs(i, tuple(tuple(p) for p in pairs)) for i, pairs in enumerate(cands)]
            for n, cands in data.get("candidates", {}).items()
        }
        rois = {int(n): (tuple(r["tx"]), tuple(r["rx"])) for n, r in data.get("rois", {}).items()}
        return cls(grid, int(data["K"]), cells, candidates, rois)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=1) + "\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "PriorDatabase":
        return cls.from_dict(json.loads(Path(path).read_text()))

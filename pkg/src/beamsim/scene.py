"""Road geometry and seeded traffic snapshots.

World frame: ``x`` runs along the road, ``y`` across it, ``z`` up, meters.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

CAR_DIMENSIONS = (5.0, 1.8, 1.5)
TRUCK_DIMENSIONS = (12.0, 2.5, 3.8)
VEHICLE_DIMENSIONS = {"car": CAR_DIMENSIONS, "truck": TRUCK_DIMENSIONS}

VehicleKind = Literal["car", "truck"]


class NoEligibleVehicle(LookupError):
    """The snapshot holds no car that may act as the communicating vehicle."""


@dataclass(frozen=True)
class Box:
    """Oriented box. ``center`` is the geometric center; ``yaw`` rotates about z."""

    center: tuple[float, float, float]
    dimensions: tuple[float, float, float]  # length, width, height
    yaw: float = 0.0

    def __post_init__(self):
        if len(self.dimensions) != 3 or min(self.dimensions) <= 0:
            raise ValueError(f"box dimensions must be positive, got {self.dimensions}")

    @classmethod
    def on_ground(cls, x: float, y: float, dimensions, yaw: float = 0.0) -> "Box":
        dimensions = tuple(float(v) for v in dimensions)
        return cls((float(x), float(y), dimensions[2] / 2), dimensions, float(yaw))

    @property
    def length(self) -> float:
        return self.dimensions[0]

    @property
    def height(self) -> float:
        return self.dimensions[2]

    @property
    def top(self) -> float:
        return self.center[2] + self.dimensions[2] / 2


@dataclass(frozen=True)
class Lane:
    y: float
    direction: int = 1  # +1 travels toward +x
    width: float = 3.5

    @property
    def heading(self) -> float:
        return 0.0 if self.direction > 0 else 180.0


@dataclass(frozen=True)
class Vehicle:
    box: Box
    kind: VehicleKind
    lane: int

    @property
    def x(self) -> float:
        return self.box.center[0]


@dataclass(frozen=True)
class Scene:
    lanes: tuple[Lane, ...]
    buildings: tuple[Box, ...]
    infrastructure_position: tuple[float, float, float]
    road_extent: float = 400.0
    cv_lane: int = 1
    vehicles: tuple[Vehicle, ...] = field(default=())

    def __post_init__(self):
        if not 0 <= self.cv_lane < len(self.lanes):
            raise ValueError(f"cv_lane {self.cv_lane} outside the {len(self.lanes)} lanes")
        if self.vehicles:
            tallest = max(v.box.top for v in self.vehicles)
            if self.infrastructure_position[2] <= tallest:
                raise ValueError("infrastructure must sit above every vehicle")

    def empty(self) -> "Scene":
        return replace(self, vehicles=())

    def boxes(self) -> list[Box]:
        return list(self.buildings) + [v.box for v in self.vehicles]

    def to_dict(self) -> dict:
        return {
            "lanes": [{"y": l.y, "direction": l.direction, "width": l.width} for l in self.lanes],
            "buildings": [_box_dict(b) for b in self.buildings],
            "infrastructure_position": list(self.infrastructure_position),
            "road_extent": self.road_extent,
            "cv_lane": self.cv_lane,
            "vehicles": [
                {"kind": v.kind, "lane": v.lane, **_box_dict(v.box)} for v in self.vehicles
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scene":
        data = dict(data)
        lanes = tuple(Lane(**l) for l in data.pop("lanes"))
        buildings = tuple(_box_from(b) for b in data.pop("buildings", ()))
        vehicles = tuple(
            Vehicle(_box_from(v), v["kind"], int(v["lane"])) for v in data.pop("vehicles", ())
        )
        infra = tuple(float(c) for c in data.pop("infrastructure_position"))
        return cls(lanes, buildings, infra, vehicles=vehicles, **data)


def _box_dict(box: Box) -> dict:
    return {"center": list(box.center), "dimensions": list(box.dimensions), "yaw": box.yaw}


def _box_from(d: dict) -> Box:
    return Box(tuple(float(c) for c in d["center"]), tuple(float(c) for c in d["dimensions"]), float(d.get("yaw", 0.0)))


def default_scene_template(
    lane_width: float = 3.5,
    lanes_per_direction: int = 2,
    road_extent: float = 400.0,
    facade_offset: float = 15.0,
    building_height: float = 10.0,
    building_depth: float = 10.0,
    infrastructure_height: float = 5.0,
    infrastructure_setback: float = 2.0,
) -> Scene:
    """Straight street canyon with the roadside unit on the -y side.

    Lanes on the -y half travel toward +x (right-hand traffic), so the lane
    next to the median at ``y = -lane_width / 2`` is their left lane and is the
    one communicating vehicles are drawn from.
    """
    lanes = []
    for k in range(lanes_per_direction - 1, -1, -1):
        lanes.append(Lane(-(k + 0.5) * lane_width, +1, lane_width))
    for k in range(lanes_per_direction):
        lanes.append(Lane((k + 0.5) * lane_width, -1, lane_width))
    half_road = lanes_per_direction * lane_width
    length = road_extent + 2 * building_depth
    buildings = tuple(
        Box((0.0, side * (facade_offset + building_depth / 2), building_height / 2),
            (length, building_depth, building_height))
        for side in (-1, 1)
    )
    infra = (0.0, -(half_road + infrastructure_setback), infrastructure_height)
    return Scene(tuple(lanes), buildings, infra, road_extent, cv_lane=lanes_per_direction - 1)


@dataclass(frozen=True)
class TrafficConfig:
    erlang_shape: int = 3
    mean_gap: float = 20.0
    truck_fraction: float = 0.4

    def __post_init__(self):
        if int(self.erlang_shape) != self.erlang_shape or self.erlang_shape < 1:
            raise ValueError("erlang_shape must be a positive integer")
        if not self.mean_gap > 0:
            raise ValueError("mean_gap must be positive")
        if not 0.0 <= self.truck_fraction <= 1.0:
            raise ValueError("truck_fraction must lie in [0, 1]")

    @property
    def scale(self) -> float:
        return self.mean_gap / self.erlang_shape


def erlang_gaps(rng: np.random.Generator, config: TrafficConfig, size: int) -> np.ndarray:
    """Bumper-to-bumper gaps, i.i.d. Erlang(shape, mean_gap / shape)."""
    return rng.gamma(config.erlang_shape, config.scale, size)


def sample_snapshot(template: Scene, config: TrafficConfig, seed) -> Scene:
    """Fill every lane of ``template`` with a random vehicle stream.

    Vehicles are laid out from the upstream end of the road; each gap is an
    Erlang draw and each vehicle is a truck with probability
    ``truck_fraction``. The result depends only on the arguments.
    """
    longest = max(dims[0] for dims in VEHICLE_DIMENSIONS.values())
    if config.mean_gap < longest:
        raise ValueError(
            f"mean_gap {config.mean_gap} m is shorter than the longest vehicle ({longest} m)"
        )
    rng = np.random.default_rng(seed)
    half = template.road_extent / 2
    vehicles = []
    for lane_id, lane in enumerate(template.lanes):
        placed = []
        rear = -half
        while True:
            gaps = erlang_gaps(rng, config, 32)
            trucks = rng.random(32) < config.truck_fraction
            done = False
            for gap, is_truck in zip(gaps, trucks):
                dims = TRUCK_DIMENSIONS if is_truck else CAR_DIMENSIONS
                start = rear + gap
                if start + dims[0] > half:
                    done = True
                    break
                placed.append((start + dims[0] / 2, dims, "truck" if is_truck else "car"))
                rear = start + dims[0]
            if done:
                break
        for s, dims, kind in placed:
            # Layout runs upstream to downstream along the lane direction.
            x = s * lane.direction
            vehicles.append(Vehicle(Box.on_ground(x, lane.y, dims, lane.heading), kind, lane_id))
    return replace(template, vehicles=tuple(vehicles))


def eligible_vehicles(scene: Scene, window: float = 100.0) -> list[Vehicle]:
    x0 = scene.infrastructure_position[0]
    return [
        v for v in scene.vehicles
        if v.kind == "car" and v.lane == scene.cv_lane and abs(v.x - x0) <= window
    ]


def select_communicating_vehicle(scene: Scene, seed, window: float = 100.0) -> Vehicle:
    """Uniformly pick a car on the designated lane within ``window`` m of the roadside unit."""
    pool = eligible_vehicles(scene, window)
    if not pool:
        raise NoEligibleVehicle("no eligible CV in snapshot")
    rng = np.random.default_rng(seed)
    return pool[int(rng.integers(len(pool)))]


def antenna_position(vehicle: Box | Vehicle) -> np.ndarray:
    """Rooftop center of a vehicle."""
    box = vehicle.box if isinstance(vehicle, Vehicle) else vehicle
    cx, cy, _ = box.center
    return np.array([cx, cy, box.top])

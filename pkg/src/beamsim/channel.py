"""Deterministic geometric channel between two points of a scene.

Paths are the line of sight plus first-order specular reflections off the
ground plane and the vertical faces of building boxes, found with the image
method. Any box crossing a path segment removes the path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Literal, Sequence

import numpy as np

from .codebook import SPEED_OF_LIGHT, ArrayGeometry, steering_vector
from .scene import Box, Scene

PathKind = Literal["LOS", "ground", "facade"]

_SURFACE_TOL = 1e-7  # meters


@dataclass(frozen=True)
class PropagationConfig:
    carrier_frequency: float = 60e9
    facade_loss_db: float = 6.0
    ground_loss_db: float = 3.0
    vehicles_reflect: bool = False

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency


@dataclass(frozen=True)
class Path:
    aod: tuple[float, float]  # (az, el) at the transmitter, world frame, degrees
    aoa: tuple[float, float]  # (az, el) at the receiver, world frame, degrees
    gain: complex
    delay: float
    kind: PathKind
    length: float
    bounce: tuple[float, float, float] | None = None

    @property
    def gain_db(self) -> float:
        return 20 * np.log10(abs(self.gain))


@dataclass(frozen=True)
class PathSet:
    paths: tuple[Path, ...] = field(default=())

    def __post_init__(self):
        ordered = tuple(sorted(self.paths, key=lambda p: -abs(p.gain)))
        object.__setattr__(self, "paths", ordered)

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self) -> Iterator[Path]:
        return iter(self.paths)

    def __getitem__(self, i) -> Path:
        return self.paths[i]

    def dump(self) -> str:
        """One line per path: kind, angles, gain in dB and delay in ns."""
        lines = ["kind     aod_az   aod_el   aoa_az   aoa_el   gain_db   delay_ns"]
        for p in self.paths:
            lines.append(
                f"{p.kind:<7} {p.aod[0]:8.3f} {p.aod[1]:8.3f} {p.aoa[0]:8.3f} {p.aoa[1]:8.3f}"
                f" {p.gain_db:9.4f} {p.delay * 1e9:10.4f}"
            )
        return "\n".join(lines)


@dataclass(frozen=True)
class ArrayOrientation:
    """Broadside pointing of a planar array in the world frame.

    ``yaw`` is the broadside azimuth measured from +x toward +y and ``tilt``
    its elevation, both in degrees.
    """

    yaw: float = 0.0
    tilt: float = 0.0

    def axes(self) -> np.ndarray:
        y, t = np.radians(self.yaw), np.radians(self.tilt)
        broadside = [np.cos(t) * np.cos(y), np.cos(t) * np.sin(y), np.sin(t)]
        horizontal = [-np.sin(y), np.cos(y), 0.0]
        up = [-np.sin(t) * np.cos(y), -np.sin(t) * np.sin(y), np.cos(t)]
        return np.array([broadside, horizontal, up])

    def to_local(self, azimuth: float, elevation: float) -> tuple[float, float]:
        x, y, z = self.axes() @ direction_vector(azimuth, elevation)
        return float(np.degrees(np.arctan2(y, x))), float(np.degrees(np.arcsin(np.clip(z, -1, 1))))


def direction_vector(azimuth: float, elevation: float) -> np.ndarray:
    az, el = np.radians(azimuth), np.radians(elevation)
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


def direction_angles(vector: np.ndarray) -> tuple[float, float]:
    vector = np.asarray(vector, dtype=float)
    r = np.linalg.norm(vector)
    az = np.degrees(np.arctan2(vector[1], vector[0]))
    el = np.degrees(np.arcsin(np.clip(vector[2] / r, -1.0, 1.0)))
    return float(az), float(el)


class _BoxArrays:
    """Boxes packed for vectorised slab tests."""

    def __init__(self, boxes: Sequence[Box]):
        self.n = len(boxes)
        self.center = np.array([b.center for b in boxes], dtype=float).reshape(-1, 3)
        self.half = np.array([b.dimensions for b in boxes], dtype=float).reshape(-1, 3) / 2
        yaw = np.radians([b.yaw for b in boxes])
        self.cos = np.cos(yaw)
        self.sin = np.sin(yaw)

    def _local(self, p: np.ndarray) -> np.ndarray:
        d = p[None, :] - self.center
        x = self.cos * d[:, 0] + self.sin * d[:, 1]
        y = -self.sin * d[:, 0] + self.cos * d[:, 1]
        return np.stack([x, y, d[:, 2]], axis=1)

    def blocks(self, p0: np.ndarray, p1: np.ndarray) -> bool:
        """True when the open segment ``p0 -> p1`` passes through any box interior."""
        if self.n == 0:
            return False
        a = self._local(p0)
        direction = self._local(p1) - a
        seg_len = float(np.linalg.norm(p1 - p0))
        t_lo = np.zeros(self.n)
        t_hi = np.ones(self.n)
        for k in range(3):
            dk = direction[:, k]
            ak = a[:, k]
            hk = self.half[:, k]
            flat = np.abs(dk) < 1e-15
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (-hk - ak) / dk
                t2 = (hk - ak) / dk
            enter = np.where(flat, -np.inf, np.minimum(t1, t2))
            leave = np.where(flat, np.inf, np.maximum(t1, t2))
            # A segment parallel to a slab only counts if strictly inside it.
            outside = flat & (np.abs(ak) >= hk - _SURFACE_TOL)
            enter = np.where(outside, np.inf, enter)
            t_lo = np.maximum(t_lo, enter)
            t_hi = np.minimum(t_hi, leave)
        return bool(np.any((t_hi - t_lo) * seg_len > _SURFACE_TOL))


def _box_faces(box: Box):
    """Vertical faces as ``(point_on_face, outward_normal, tangent, half_width)``."""
    c = np.asarray(box.center, dtype=float)
    yaw = np.radians(box.yaw)
    ex = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    ey = np.array([-np.sin(yaw), np.cos(yaw), 0.0])
    hl, hw, _ = (v / 2 for v in box.dimensions)
    return [
        (c + hl * ex, ex, ey, hw),
        (c - hl * ex, -ex, ey, hw),
        (c + hw * ey, ey, ex, hl),
        (c - hw * ey, -ey, ex, hl),
    ]


def _make_path(kind, tx, rx, length, bounce, loss_db, cfg: PropagationConfig) -> Path:
    lam = cfg.wavelength
    first = (bounce if bounce is not None else rx) - tx
    last = (bounce if bounce is not None else tx) - rx
    amplitude = lam / (4 * np.pi * length) * 10 ** (-loss_db / 20)
    gain = amplitude * np.exp(-2j * np.pi * length / lam)
    return Path(
        aod=direction_angles(first),
        aoa=direction_angles(last),
        gain=complex(gain),
        delay=length / SPEED_OF_LIGHT,
        kind=kind,
        length=float(length),
        bounce=None if bounce is None else tuple(float(c) for c in bounce),
    )


def reflect_point(point: np.ndarray, plane_point: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Mirror image of ``point`` across a plane."""
    return point - 2 * np.dot(point - plane_point, normal) * normal


def trace_paths(
    scene: Scene,
    tx,
    rx,
    max_order: int = 1,
    config: PropagationConfig | None = None,
) -> PathSet:
    """All unoccluded LOS and single-bounce paths from ``tx`` to ``rx``."""
    if max_order not in (0, 1):
        raise ValueError("max_order must be 0 or 1")
    cfg = config or PropagationConfig()
    tx = np.asarray(tx, dtype=float)
    rx = np.asarray(rx, dtype=float)
    if np.allclose(tx, rx):
        raise ValueError("tx and rx coincide")
    blockers = _BoxArrays(scene.boxes())
    paths = []

    if not blockers.blocks(tx, rx):
        paths.append(_make_path("LOS", tx, rx, np.linalg.norm(rx - tx), None, 0.0, cfg))
    if max_order == 0:
        return PathSet(tuple(paths))

    # (plane point, outward normal, in-face test, kind, loss)
    reflectors = []
    if tx[2] > 0 and rx[2] > 0:
        reflectors.append((np.zeros(3), np.array([0.0, 0.0, 1.0]), None, "ground", cfg.ground_loss_db))
    surfaces = list(scene.buildings)
    if cfg.vehicles_reflect:
        surfaces += [v.box for v in scene.vehicles]
    for box in surfaces:
        bottom = box.center[2] - box.height / 2
        for point, normal, tangent, half_width in _box_faces(box):
            extent = (point, tangent, half_width, bottom, box.top)
            reflectors.append((point, normal, extent, "facade", cfg.facade_loss_db))

    for point, normal, extent, kind, loss in reflectors:
        if np.dot(tx - point, normal) <= _SURFACE_TOL or np.dot(rx - point, normal) <= _SURFACE_TOL:
            continue
        image = reflect_point(tx, point, normal)
        span = rx - image
        t = np.dot(point - image, normal) / np.dot(span, normal)
        hit = image + t * span
        if extent is not None:
            center, tangent, half_width, bottom, top = extent
            if abs(np.dot(hit - center, tangent)) > half_width or not bottom <= hit[2] <= top:
                continue
        if blockers.blocks(tx, hit) or blockers.blocks(hit, rx):
            continue
        paths.append(_make_path(kind, tx, rx, np.linalg.norm(span), hit, loss, cfg))
    return PathSet(tuple(paths))


def assemble_channel(
    paths: PathSet | Sequence[Path],
    tx_geom: ArrayGeometry,
    rx_geom: ArrayGeometry,
    tx_orientation: ArrayOrientation = ArrayOrientation(),
    rx_orientation: ArrayOrientation = ArrayOrientation(),
) -> np.ndarray:
    """Narrowband MIMO channel ``sum_k g_k a_rx(aoa_k) a_tx(aod_k)^H``.

    Rows index receive elements, columns transmit elements.
    """
    H = np.zeros((rx_geom.n_elements, tx_geom.n_elements), dtype=complex)
    for p in paths:
        a_tx = steering_vector(tx_geom, *tx_orientation.to_local(*p.aod))
        a_rx = steering_vector(rx_geom, *rx_orientation.to_local(*p.aoa))
        H += p.gain * np.outer(a_rx, a_tx.conj())
    return H


def receive_power(H: np.ndarray, tx_beam: np.ndarray, rx_beam: np.ndarray) -> float:
    """Beamformed power ``|w^H H f|^2`` scaled by both element counts."""
    H = np.asarray(H)
    tx_beam = np.asarray(tx_beam)
    rx_beam = np.asarray(rx_beam)
    if tx_beam.shape != (H.shape[1],) or rx_beam.shape != (H.shape[0],):
        raise ValueError(
            f"beam sizes {tx_beam.shape}, {rx_beam.shape} do not fit channel {H.shape}"
        )
    y = np.sum(rx_beam.conj() * np.sum(H * tx_beam[None, :], axis=1))
    return float(abs(y) ** 2 * H.shape[0] * H.shape[1])

"""Uniform planar array responses and Kronecker DFT training codebooks.

Angles follow one convention everywhere: azimuth is measured in the array's
horizontal plane from broadside, elevation from that plane, both in degrees.
Broadside is ``(0, 0)``. Element ``(m, n)`` (``m`` vertical, ``n`` horizontal)
is stored at flat index ``m * n_horizontal + n``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class EmptyCoverageError(ValueError):
    """Raised when no codebook beam points into a requested sector."""


@dataclass(frozen=True)
class ArrayGeometry:
    n_horizontal: int = 8
    n_vertical: int = 8
    element_spacing: float = 0.5  # wavelengths
    carrier_frequency: float = 60e9

    def __post_init__(self):
        if int(self.n_horizontal) != self.n_horizontal or self.n_horizontal < 1:
            raise ValueError(f"n_horizontal must be a positive integer, got {self.n_horizontal}")
        if int(self.n_vertical) != self.n_vertical or self.n_vertical < 1:
            raise ValueError(f"n_vertical must be a positive integer, got {self.n_vertical}")
        if not self.element_spacing > 0:
            raise ValueError("element_spacing must be positive")
        if not self.carrier_frequency > 0:
            raise ValueError("carrier_frequency must be positive")

    @classmethod
    def square(cls, n: int, **kwargs) -> "ArrayGeometry":
        return cls(n_horizontal=n, n_vertical=n, **kwargs)

    @property
    def n_elements(self) -> int:
        return self.n_horizontal * self.n_vertical

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency


@dataclass(frozen=True)
class AngularSector:
    azimuth_min: float
    azimuth_max: float
    elevation_min: float
    elevation_max: float

    def __post_init__(self):
        if not (-180.0 <= self.azimuth_min < self.azimuth_max <= 180.0):
            raise ValueError(f"invalid azimuth range [{self.azimuth_min}, {self.azimuth_max}]")
        if not (-90.0 <= self.elevation_min < self.elevation_max <= 90.0):
            raise ValueError(f"invalid elevation range [{self.elevation_min}, {self.elevation_max}]")

    @classmethod
    def hemisphere(cls) -> "AngularSector":
        return cls(-90.0, 90.0, -90.0, 90.0)

    def expanded(self, margin: float) -> "AngularSector":
        return AngularSector(
            max(self.azimuth_min - margin, -180.0),
            min(self.azimuth_max + margin, 180.0),
            max(self.elevation_min - margin, -90.0),
            min(self.elevation_max + margin, 90.0),
        )

    def contains(self, azimuth, elevation):
        azimuth = np.asarray(azimuth)
        elevation = np.asarray(elevation)
        return (
            (azimuth >= self.azimuth_min)
            & (azimuth <= self.azimuth_max)
            & (elevation >= self.elevation_min)
            & (elevation <= self.elevation_max)
        )


@dataclass(frozen=True, eq=False)
class Codebook:
    """Orthonormal set of planar beams.

    ``beams`` has shape ``(n_beams, n_elements)``; row ``i`` is beam ``i``.
    ``index_map[i]`` gives the ``(p, q)`` horizontal/vertical DFT indices.
    """

    geometry: ArrayGeometry
    beams: np.ndarray = field(repr=False)
    index_map: tuple[tuple[int, int], ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.beams)

    def beam_index(self, p: int, q: int) -> int:
        return q * self.geometry.n_horizontal + p


def _check_angles(*angles):
    for a in angles:
        if not np.all(np.isfinite(a)):
            raise ValueError("angles must be finite")


def spatial_frequencies(azimuth, elevation):
    """Direction cosines ``(u, v)`` seen by the horizontal and vertical axes."""
    az = np.radians(azimuth)
    el = np.radians(elevation)
    return np.cos(el) * np.sin(az), np.sin(el)


def steering_vector(geometry: ArrayGeometry, azimuth: float, elevation: float) -> np.ndarray:
    """Unit-norm array response toward ``(azimuth, elevation)`` in degrees.

    Element ``(m, n)`` carries phase ``2*pi*d*(m*sin(el) + n*cos(el)*sin(az))``.
    """
    _check_angles(azimuth, elevation)
    u, v = spatial_frequencies(float(azimuth), float(elevation))
    return steering_from_frequencies(geometry, u, v)


def steering_from_frequencies(geometry: ArrayGeometry, u: float, v: float) -> np.ndarray:
    d = geometry.element_spacing
    n = np.arange(geometry.n_horizontal)
    m = np.arange(geometry.n_vertical)
    horizontal = np.exp(2j * np.pi * d * n * u)
    vertical = np.exp(2j * np.pi * d * m * v)
    return np.kron(vertical, horizontal) / np.sqrt(geometry.n_elements)


def dft_vector(n_points: int, index: int) -> np.ndarray:
    k = np.arange(n_points)
    return np.exp(2j * np.pi * index * k / n_points) / np.sqrt(n_points)


@lru_cache(maxsize=None)
def build_dft_codebook(geometry: ArrayGeometry) -> Codebook:
    """Kronecker products of vertical and horizontal DFT columns.

    Beam ``q * n_horizontal + p`` is ``kron(dft_v[q], dft_h[p])``.
    """
    nh, nv = geometry.n_horizontal, geometry.n_vertical
    beams = np.empty((nh * nv, nh * nv), dtype=complex)
    index_map = []
    for q in range(nv):
        for p in range(nh):
            beams[q * nh + p] = np.kron(dft_vector(nv, q), dft_vector(nh, p))
            index_map.append((p, q))
    beams.setflags(write=False)
    return Codebook(geometry, beams, tuple(index_map))


def grid_frequency(index: int, n_points: int, spacing: float) -> float:
    """Direction cosine matched by DFT column ``index``, wrapped to [-1/(2d), 1/(2d))."""
    period = 1.0 / spacing
    u = index / (n_points * spacing)
    return (u + period / 2) % period - period / 2


def beam_grid_angle(codebook: Codebook, beam: int) -> tuple[float, float] | None:
    """Exact ``(az, el)`` matched by a DFT beam, or None when it is not visible."""
    g = codebook.geometry
    p, q = codebook.index_map[beam]
    u = grid_frequency(p, g.n_horizontal, g.element_spacing)
    v = grid_frequency(q, g.n_vertical, g.element_spacing)
    if u * u + v * v > 1.0:
        return None
    el = np.degrees(np.arcsin(v))
    cos_el = np.sqrt(1.0 - v * v)
    az = 0.0 if cos_el == 0 else np.degrees(np.arcsin(np.clip(u / cos_el, -1.0, 1.0)))
    return float(az), float(el)


def _check_beam(beam: np.ndarray, geometry: ArrayGeometry) -> np.ndarray:
    beam = np.asarray(beam)
    if beam.shape[-1] != geometry.n_elements:
        raise ValueError(
            f"beam has {beam.shape[-1]} entries, geometry has {geometry.n_elements} elements"
        )
    return beam


def beam_gain(beam: np.ndarray, geometry: ArrayGeometry, azimuth: float, elevation: float) -> float:
    """Linear power gain ``N_elements * |<a(az, el), beam>|**2``."""
    beam = _check_beam(beam, geometry)
    a = steering_vector(geometry, azimuth, elevation)
    return float(geometry.n_elements * abs(np.vdot(a, beam)) ** 2)


def _dirichlet_power(x: np.ndarray, n: int) -> np.ndarray:
    """``|sum_k exp(j*k*x)|**2 / n**2`` evaluated stably."""
    half = 0.5 * np.asarray(x, dtype=float)
    num = np.sin(n * half)
    den = n * np.sin(half)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (num / den) ** 2
    # sin(x/2) == 0 at multiples of 2*pi where the kernel peaks at 1.
    return np.where(np.abs(den) < 1e-12, 1.0, out)


def dft_beam_gain(codebook: Codebook, beam, azimuth, elevation) -> np.ndarray:
    """Closed-form gain of DFT beam(s) via separable Dirichlet kernels.

    Broadcasts over ``beam``, ``azimuth`` and ``elevation``.
    """
    g = codebook.geometry
    idx = np.asarray(codebook.index_map)[np.asarray(beam)]
    p, q = idx[..., 0], idx[..., 1]
    u, v = spatial_frequencies(azimuth, elevation)
    d = g.element_spacing
    xh = 2 * np.pi * (d * u - p / g.n_horizontal)
    xv = 2 * np.pi * (d * v - q / g.n_vertical)
    return g.n_elements * _dirichlet_power(xh, g.n_horizontal) * _dirichlet_power(xv, g.n_vertical)


@lru_cache(maxsize=None)
def main_lobe_directions(geometry: ArrayGeometry) -> np.ndarray:
    """Peak-gain ``(az, el)`` of every DFT beam over the front hemisphere.

    A 1 degree grid search followed by a 0.05 degree refinement around the
    coarse peak. Returns an array of shape ``(n_beams, 2)``.
    """
    cb = build_dft_codebook(geometry)
    beams = np.arange(len(cb))
    coarse = np.arange(-90.0, 90.0 + 0.5, 1.0)
    az, el = np.meshgrid(coarse, coarse, indexing="ij")
    az, el = az.ravel(), el.ravel()
    gains = dft_beam_gain(cb, beams[:, None], az[None, :], el[None, :])
    best = np.argmax(gains, axis=1)
    az0, el0 = az[best], el[best]

    fine = np.arange(-1.0, 1.0 + 0.025, 0.05)
    daz, del_ = np.meshgrid(fine, fine, indexing="ij")
    daz, del_ = daz.ravel(), del_.ravel()
    az1 = np.clip(az0[:, None] + daz[None, :], -90.0, 90.0)
    el1 = np.clip(el0[:, None] + del_[None, :], -90.0, 90.0)
    gains = dft_beam_gain(cb, beams[:, None], az1, el1)
    best = np.argmax(gains, axis=1)
    out = np.stack([az1[beams, best], el1[beams, best]], axis=1)
    out.setflags(write=False)
    return out


def half_beam_spacing(geometry: ArrayGeometry) -> float:
    """Half the broadside angular spacing between neighbouring DFT beams, degrees."""
    n = max(geometry.n_horizontal, geometry.n_vertical)
    ratio = min(1.0 / (n * geometry.element_spacing), 1.0)
    return 0.5 * float(np.degrees(np.arcsin(ratio)))


def beams_covering_sector(
    codebook: Codebook, geometry: ArrayGeometry, sector: AngularSector
) -> np.ndarray:
    """Indices of beams whose main lobe falls in ``sector`` (expanded by half a beam spacing)."""
    if codebook.geometry != geometry:
        raise ValueError("codebook was built for a different geometry")
    lobes = main_lobe_directions(geometry)
    grown = sector.expanded(half_beam_spacing(geometry))
    hit = np.flatnonzero(grown.contains(lobes[:, 0], lobes[:, 1]))
    if hit.size == 0:
        raise EmptyCoverageError(f"no beam of the {geometry.n_horizontal}x{geometry.n_vertical} codebook covers {sector}")
    return hit


def nearest_beam(
    codebook: Codebook, azimuth: float, elevation: float, allowed: Sequence[int] | None = None
) -> int:
    """Beam with the largest gain toward a direction; lowest index on ties."""
    a = steering_vector(codebook.geometry, azimuth, elevation)
    candidates = np.arange(len(codebook)) if allowed is None else np.asarray(allowed)
    power = np.abs(codebook.beams[candidates].conj() @ a) ** 2
    return int(candidates[np.argmax(power)])


def export_patterns_csv(
    codebook: Codebook,
    path: str | Path,
    beams: Iterable[int] | None = None,
    step: float = 2.0,
) -> Path:
    """Write ``beam, azimuth_deg, elevation_deg, gain_db`` samples for plotting."""
    path = Path(path)
    grid = np.arange(-90.0, 90.0 + step / 2, step)
    az, el = np.meshgrid(grid, grid, indexing="ij")
    az, el = az.ravel(), el.ravel()
    selected = range(len(codebook)) if beams is None else beams
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beam", "azimuth_deg", "elevation_deg", "gain_db"])
        for b in selected:
            gain = dft_beam_gain(codebook, b, az, el)
            gain_db = 10 * np.log10(np.maximum(gain, 1e-30))
            for row in zip(az, el, gain_db):
                writer.writerow([b, f"{row[0]:.2f}", f"{row[1]:.2f}", f"{row[2]:.4f}"])
    return path

import logging

import numpy as np
import pytest
from scipy.stats import norm

from beamsim.channel import ArrayOrientation, direction_angles, direction_vector
from beamsim.codebook import ArrayGeometry, build_dft_codebook
from beamsim.experiment import ExperimentConfig, build_prior_database, region_of_interest
from beamsim.prior import (
    CellPrior,
    GridSpec,
    LinkSetup,
    PriorDatabase,
    build_prior,
    candidate_pairs_for_cell,
    locate_cell,
)
from beamsim.scene import Box, Scene, TrafficConfig, default_scene_template, sample_snapshot

TX = np.array([0.0, -9.0, 5.0])


def angle_gap(a, b):
    u, v = direction_vector(*a), direction_vector(*b)
    return np.degrees(np.arctan2(np.linalg.norm(np.cross(u, v)), np.dot(u, v)))


def contains_angle(angles, target, tol=1e-6):
    return any(angle_gap(a, target) < tol for a in angles)


def wrong_cell_probability(cell_length, sigma):
    """Chance that x-only Gaussian noise moves a uniformly placed point out of its cell."""
    a = cell_length / sigma
    return 2 * sigma / cell_length * (a * norm.cdf(-a) - norm.pdf(a) + norm.pdf(0))


@pytest.fixture(scope="module")
def empty_scene():
    return default_scene_template().empty()


@pytest.fixture(scope="module")
def default_db():
    return build_prior_database(ExperimentConfig())


def test_abeam_cell_points_at_probe(empty_scene):
    grid = GridSpec(extent=102.5, probe_count=1)
    cells = build_prior(empty_scene, grid, K=25)
    abeam = cells[20]
    assert abeam.center == 0.0
    probe = np.array([0.0, -1.75, 1.5])
    assert angle_gap(abeam.aod_list[0], direction_angles(probe - TX)) < 1e-6


def test_k_one_truncates(empty_scene):
    for c in build_prior(empty_scene, GridSpec(), K=1):
        assert len(c.aod_list) == 1 and len(c.aoa_list) == 1


def test_single_facade_cells_hold_los_and_image_angles():
    t = default_scene_template()
    facade = Box.on_ground(0.0, 20.0, (420.0, 10.0, 10.0))
    scene = Scene(t.lanes, (facade,), t.infrastructure_position, cv_lane=t.cv_lane)
    grid = GridSpec(probe_count=1)
    for c in build_prior(scene, grid, K=25):
        rx = np.array([c.center, -1.75, 1.5])
        image = np.array([TX[0], 2 * 15.0 - TX[1], TX[2]])
        s = (15.0 - rx[1]) / (image[1] - rx[1])
        hit = rx + s * (image - rx)
        assert contains_angle(c.aod_list, direction_angles(rx - TX))
        assert contains_angle(c.aoa_list, direction_angles(TX - rx))
        assert contains_angle(c.aod_list, direction_angles(hit - TX))
        assert contains_angle(c.aoa_list, direction_angles(hit - rx))


def test_list_invariants(default_db):
    for c in default_db.cells:
        assert not c.empty
        assert len(c.aod_list) <= 25
        assert list(c.aod_gains) == sorted(c.aod_gains, reverse=True)
        assert list(c.aoa_gains) == sorted(c.aoa_gains, reverse=True)
        for angles in (c.aod_list, c.aoa_list):
            for i in range(len(angles)):
                for j in range(i):
                    assert angle_gap(angles[i], angles[j]) >= 0.5


def test_build_prior_is_pure(empty_scene):
    assert build_prior(empty_scene, GridSpec(), 25) == build_prior(empty_scene, GridSpec(), 25)


def test_traffic_rejected():
    busy = sample_snapshot(default_scene_template(), TrafficConfig(), 0)
    with pytest.raises(ValueError):
        build_prior(busy, GridSpec())


def test_cells_without_paths_warn(caplog):
    t = default_scene_template()
    wall = Box.on_ground(0.0, -7.0, (1000.0, 1.0, 50.0))
    scene = Scene(t.lanes, t.buildings + (wall,), (0.0, -9.0, 60.0), cv_lane=t.cv_lane)
    with caplog.at_level(logging.WARNING, logger="beamsim.prior"):
        cells = build_prior(scene, GridSpec(extent=10.0))
    assert all(c.empty for c in cells)
    assert "no path" in caplog.text


def test_grid_spec_checks():
    assert GridSpec().n_cells == 40
    with pytest.raises(ValueError):
        GridSpec(cell_length=0)
    np.testing.assert_allclose(GridSpec().probe_offsets(), [-2.5, -1.25, 0, 1.25, 2.5])


LINK8 = LinkSetup(ArrayGeometry.square(8), ArrayGeometry.square(8),
                  ArrayOrientation(yaw=90.0), ArrayOrientation(yaw=-90.0))
CB8 = build_dft_codebook(ArrayGeometry.square(8))


def test_single_angle_prior_gives_one_pair():
    prior = CellPrior(0, 0.0, ((80.0, -20.0),), (1e-4,), ((-70.0, 20.0),), (1e-4,))
    cp = candidate_pairs_for_cell(prior, CB8, CB8, LINK8)
    assert len(cp) == 1


def test_duplicate_beams_are_collapsed():
    aod = ((80.0, -20.0), (80.3, -20.2), (80.1, -19.9))
    aoa = ((-70.0, 20.0), (-70.2, 20.1), (-69.9, 19.8))
    prior = CellPrior(0, 0.0, aod, (3e-4, 2e-4, 1e-4), aoa, (3e-4, 2e-4, 1e-4))
    cp = candidate_pairs_for_cell(prior, CB8, CB8, LINK8)
    assert len(cp.pairs) == len(set(cp.pairs)) == 1


def test_empty_prior_rejected():
    with pytest.raises(ValueError):
        candidate_pairs_for_cell(CellPrior(4, 0.0), CB8, CB8, LINK8)


def test_pairs_inside_roi_and_non_empty(default_db):
    cfg = ExperimentConfig()
    for n in cfg.array_sizes:
        tx_roi, rx_roi = (set(map(int, r)) for r in region_of_interest(cfg, n))
        for cp in default_db.candidates[n]:
            assert len(cp) > 0
            assert all(t in tx_roi and r in rx_roi for t, r in cp.pairs)


def test_shrinking_k_never_adds_pairs(empty_scene):
    cfg = ExperimentConfig()
    tx_roi, rx_roi = region_of_interest(cfg, 8)
    link = cfg.link(8)
    previous = None
    for K in (25, 10, 5, 3, 1):
        cells = build_prior(empty_scene, GridSpec(), K)
        pairs = [set(candidate_pairs_for_cell(c, CB8, CB8, link, tx_roi, rx_roi).pairs) for c in cells]
        if previous is not None:
            assert all(p <= q for p, q in zip(pairs, previous))
        previous = pairs


def test_locate_cell_examples():
    grid = GridSpec()
    assert locate_cell((grid.cell_center(7), -1.75, 1.5), grid) == (7, False)
    assert locate_cell((grid.cell_center(7) + 2.4, 0.0), grid) == (7, False)
    assert locate_cell((grid.cell_center(7) - 2.4, 0.0), grid) == (7, False)
    # x = -95 is the edge between cells 0 and 1.
    assert locate_cell((-95.0, 0.0), grid) == (0, False)
    assert locate_cell((-100.0, 0.0), grid) == (0, False)
    assert locate_cell((100.0, 0.0), grid) == (39, False)
    assert locate_cell((-130.0, 0.0), grid) == (0, True)
    assert locate_cell((100.01, 0.0), grid) == (39, True)


def test_gaussian_wrong_cell_rate():
    grid, sigma = GridSpec(), 2.5
    rng = np.random.default_rng(11)
    cells = rng.integers(4, grid.n_cells - 4, 10_000)
    x = grid.start + (cells + rng.uniform(0, 1, cells.size)) * grid.cell_length
    noisy = x + rng.normal(0, sigma, x.size)
    wrong = np.mean([locate_cell((v, 0.0), grid)[0] != c for v, c in zip(noisy, cells)])
    assert abs(wrong - wrong_cell_probability(grid.cell_length, sigma)) <= 0.02


def test_database_round_trip(tmp_path, default_db):
    path = default_db.save(tmp_path / "prior.json")
    loaded = PriorDatabase.load(path)
    assert loaded.grid == default_db.grid and loaded.cells == default_db.cells
    assert loaded.candidates == default_db.candidates and loaded.rois == default_db.rois


def test_database_schema_checked(default_db):
    data = default_db.to_dict()
    data["schema_version"] = 99
    with pytest.raises(ValueError):
        PriorDatabase.from_dict(data)

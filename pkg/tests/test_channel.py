import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamsim.channel import (
    ArrayOrientation,
    Path,
    PathSet,
    PropagationConfig,
    assemble_channel,
    direction_angles,
    direction_vector,
    receive_power,
    trace_paths,
)
from beamsim.codebook import SPEED_OF_LIGHT, ArrayGeometry, beam_grid_angle, build_dft_codebook, steering_vector
from beamsim.scene import CAR_DIMENSIONS, Box, Lane, Scene, Vehicle, default_scene_template

LAMBDA = SPEED_OF_LIGHT / 60e9


def open_field(buildings=(), vehicles=(), infra=(0.0, 0.0, 50.0)):
    return Scene((Lane(0.0),), tuple(buildings), infra, cv_lane=0, vehicles=tuple(vehicles))


def angle_between(u, v):
    return np.degrees(np.arctan2(np.linalg.norm(np.cross(u, v)), np.dot(u, v)))


def random_facade_case(rng):
    """A long building at a random yaw with tx/rx placed in front of one long face."""
    yaw = rng.uniform(-180, 180)
    center = np.array([rng.uniform(-50, 50), rng.uniform(-50, 50), 15.0])
    box = Box(tuple(center), (400.0, 10.0, 30.0), yaw)
    c, s = np.cos(np.radians(yaw)), np.sin(np.radians(yaw))
    ex, ey = np.array([c, s, 0.0]), np.array([-s, c, 0.0])
    face_point = center + 5.0 * ey
    ends = []
    for _ in range(2):
        along, off, z = rng.uniform(-60, 60), rng.uniform(1, 40), rng.uniform(0.5, 25)
        p = face_point + along * ex + off * ey
        p[2] = z
        ends.append(p)
    return box, face_point, ey, ends[0], ends[1]


def test_free_space_two_paths():
    tx, rx = np.array([0.0, 0.0, 5.0]), np.array([50.0, 0.0, 1.5])
    paths = trace_paths(open_field(), tx, rx)
    assert len(paths) == 2
    los = next(p for p in paths if p.kind == "LOS")
    ground = next(p for p in paths if p.kind == "ground")
    d = np.linalg.norm(rx - tx)
    assert abs(los.gain) == pytest.approx(LAMBDA / (4 * np.pi * d), rel=1e-12)
    image = np.array([0.0, 0.0, -5.0])
    d_g = np.linalg.norm(rx - image)
    assert ground.length == pytest.approx(d_g, rel=1e-12)
    assert abs(ground.gain) == pytest.approx(LAMBDA / (4 * np.pi * d_g) * 10 ** (-3 / 20), rel=1e-12)
    # Bounce point where the image line crosses z = 0: x = 50 * 5 / 6.5.
    np.testing.assert_allclose(ground.bounce, [50 * 5 / 6.5, 0.0, 0.0], atol=1e-9)
    assert paths[0].kind == "LOS"


def test_path_invariants():
    t = default_scene_template()
    paths = trace_paths(t, t.infrastructure_position, (20.0, -1.75, 1.5))
    assert len(paths) >= 2
    gains = [abs(p.gain) for p in paths]
    assert gains == sorted(gains, reverse=True)
    for p in paths:
        assert abs(p.gain) > 0
        assert p.delay == pytest.approx(p.length / SPEED_OF_LIGHT, rel=1e-12)
    assert paths.dump().splitlines()[0].startswith("kind")


def test_aod_and_aoa_point_along_los():
    tx, rx = np.array([0.0, -9.0, 5.0]), np.array([30.0, -1.75, 1.5])
    los = trace_paths(open_field(), tx, rx, max_order=0)[0]
    np.testing.assert_allclose(direction_vector(*los.aod), (rx - tx) / np.linalg.norm(rx - tx), atol=1e-12)
    np.testing.assert_allclose(direction_vector(*los.aoa), (tx - rx) / np.linalg.norm(rx - tx), atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_single_facade_image_method(seed):
    box, face_point, normal, tx, rx = random_facade_case(np.random.default_rng(seed))
    paths = [p for p in trace_paths(open_field([box]), tx, rx) if p.kind == "facade"]
    assert len(paths) == 1
    p = paths[0]
    hit = np.array(p.bounce)
    assert abs(np.dot(hit - face_point, normal)) < 1e-9
    assert angle_between(tx - hit, normal) == pytest.approx(angle_between(rx - hit, normal), abs=1e-9)
    image = tx - 2 * np.dot(tx - face_point, normal) * normal
    assert p.length == pytest.approx(np.linalg.norm(rx - image), rel=1e-12)
    assert abs(p.gain) == pytest.approx(LAMBDA / (4 * np.pi * p.length) * 10 ** (-6 / 20), rel=1e-12)


def test_facade_miss_beyond_face_edge():
    # Short building; the specular point falls past its end.
    box = Box((0.0, 20.0, 5.0), (10.0, 10.0, 10.0))
    paths = trace_paths(open_field([box]), (40.0, 0.0, 2.0), (60.0, 0.0, 2.0))
    assert [p.kind for p in paths if p.kind == "facade"] == []


def test_vehicle_blocks_los():
    car = Vehicle(Box.on_ground(25.0, 0.0, CAR_DIMENSIONS), "car", 0)
    tx, rx = (0.0, 0.0, 1.0), (50.0, 0.0, 1.0)
    kinds = {p.kind for p in trace_paths(open_field(vehicles=[car]), tx, rx)}
    assert "LOS" not in kinds and "ground" not in kinds
    aside = Vehicle(Box.on_ground(25.0, 5.0, CAR_DIMENSIONS), "car", 0)
    assert "LOS" in {p.kind for p in trace_paths(open_field(vehicles=[aside]), tx, rx)}


def test_grazing_roof_does_not_block():
    car = Vehicle(Box.on_ground(25.0, 0.0, CAR_DIMENSIONS), "car", 0)
    paths = trace_paths(open_field(vehicles=[car]), (0.0, 0.0, 1.5), (50.0, 0.0, 1.5), max_order=0)
    assert len(paths) == 1


def test_full_blockage_gives_empty_set():
    wall = Box((25.0, 0.0, 50.0), (2.0, 1000.0, 100.0))
    paths = trace_paths(open_field([wall]), (0.0, 0.0, 5.0), (50.0, 0.0, 1.5))
    assert len(paths) == 0


def test_trace_argument_checks():
    with pytest.raises(ValueError):
        trace_paths(open_field(), (0, 0, 1), (5, 0, 1), max_order=2)
    with pytest.raises(ValueError):
        trace_paths(open_field(), (0, 0, 1), (0, 0, 1))


def test_vehicle_reflection_switch():
    truck = Vehicle(Box.on_ground(25.0, 6.0, (12.0, 2.5, 3.8)), "truck", 0)
    tx, rx = (0.0, 0.0, 1.5), (50.0, 0.0, 1.5)
    off = trace_paths(open_field(vehicles=[truck]), tx, rx)
    on = trace_paths(open_field(vehicles=[truck]), tx, rx, config=PropagationConfig(vehicles_reflect=True))
    assert len(on) == len(off) + 1


scene_points = st.tuples(
    st.floats(-150, 150), st.floats(-12, 12), st.floats(0.5, 8),
    st.floats(-150, 150), st.floats(-12, 12), st.floats(0.5, 8),
)
blockers = st.tuples(st.floats(-150, 150), st.floats(-12, 12), st.sampled_from(["car", "truck"]))


@given(scene_points, st.lists(blockers, max_size=4), blockers)
@settings(max_examples=80, deadline=None)
def test_adding_a_box_never_adds_paths(points, existing, extra):
    tx, rx = np.array(points[:3]), np.array(points[3:])
    if np.linalg.norm(tx - rx) < 0.1:
        return
    dims = {"car": CAR_DIMENSIONS, "truck": (12.0, 2.5, 3.8)}
    t = default_scene_template()
    base = [Vehicle(Box.on_ground(x, y, dims[k]), k, 0) for x, y, k in existing]
    more = base + [Vehicle(Box.on_ground(extra[0], extra[1], dims[extra[2]]), extra[2], 0)]
    infra = (0.0, -9.0, 50.0)
    n0 = len(trace_paths(Scene(t.lanes, t.buildings, infra, vehicles=tuple(base)), tx, rx))
    n1 = len(trace_paths(Scene(t.lanes, t.buildings, infra, vehicles=tuple(more)), tx, rx))
    assert n1 <= n0


def test_orientation_axes():
    o = ArrayOrientation(yaw=90.0, tilt=-10.0)
    R = o.axes()
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert o.to_local(90.0, -10.0) == pytest.approx((0.0, 0.0), abs=1e-9)
    assert ArrayOrientation(yaw=-90.0).to_local(0.0, 0.0) == pytest.approx((90.0, 0.0), abs=1e-9)


def test_direction_round_trip():
    for az, el in [(0, 0), (35, 10), (-120, -45), (179, 80)]:
        assert direction_angles(direction_vector(az, el)) == pytest.approx((az, el), abs=1e-9)


def fake_path(aod, aoa, gain):
    return Path(aod=aod, aoa=aoa, gain=gain, delay=1e-7, kind="LOS", length=30.0)


def test_orthogonal_paths_frobenius_norm():
    g = ArrayGeometry.square(4)
    cb = build_dft_codebook(g)
    a1, a2 = beam_grid_angle(cb, cb.beam_index(0, 0)), beam_grid_angle(cb, cb.beam_index(1, 0))
    b1, b2 = beam_grid_angle(cb, cb.beam_index(0, 1)), beam_grid_angle(cb, cb.beam_index(1, 1))
    paths = [fake_path(a1, b1, 2e-4 * np.exp(0.3j)), fake_path(a2, b2, 5e-5j)]
    H = assemble_channel(paths, g, g)
    assert np.linalg.norm(H) ** 2 == pytest.approx(abs(2e-4) ** 2 + abs(5e-5) ** 2, rel=1e-9)
    assert np.linalg.matrix_rank(H) <= 2


def test_matched_filter_power():
    gt, gr = ArrayGeometry.square(4), ArrayGeometry(2, 3)
    alpha = 3e-5 * np.exp(1.1j)
    p = fake_path((20.0, -5.0), (-35.0, 12.0), alpha)
    H = assemble_channel([p], gt, gr)
    f = steering_vector(gt, 20.0, -5.0)
    w = steering_vector(gr, -35.0, 12.0)
    assert receive_power(H, f, w) == pytest.approx(abs(alpha) ** 2 * 16 * 6, rel=1e-12)
    assert receive_power(H, f * np.exp(0.7j), w * np.exp(-2.0j)) == pytest.approx(receive_power(H, f, w), rel=1e-12)


def test_receive_power_dimension_mismatch():
    H = np.ones((4, 16), dtype=complex)
    with pytest.raises(ValueError):
        receive_power(H, np.ones(4), np.ones(4))


def test_orientation_changes_array_frame():
    g = ArrayGeometry.square(4)
    p = fake_path((90.0, 0.0), (-90.0, 0.0), 1e-4)
    H = assemble_channel([p], g, g, ArrayOrientation(yaw=90.0), ArrayOrientation(yaw=-90.0))
    broadside = steering_vector(g, 0.0, 0.0)
    assert receive_power(H, broadside, broadside) == pytest.approx(1e-8 * 256, rel=1e-12)


def power_table(H, tx_cb, rx_cb):
    return np.array([[receive_power(H, f, w) for w in rx_cb.beams] for f in tx_cb.beams])


def test_reciprocity():
    t = default_scene_template()
    tx, rx = np.array(t.infrastructure_position), np.array([35.0, -1.75, 1.5])
    fwd = trace_paths(t, tx, rx)
    rev = trace_paths(t, rx, tx)
    assert len(fwd) == len(rev)
    for a, b in zip(fwd, rev):
        assert a.kind == b.kind and a.length == pytest.approx(b.length, rel=1e-12)
        assert a.aod == pytest.approx(b.aoa, abs=1e-9) and a.aoa == pytest.approx(b.aod, abs=1e-9)
    gt, gr = ArrayGeometry.square(4), ArrayGeometry.square(2)
    ot, orx = ArrayOrientation(yaw=90.0), ArrayOrientation(yaw=-90.0)
    H = assemble_channel(fwd, gt, gr, ot, orx)
    conj_rev = [Path(p.aod, p.aoa, np.conj(p.gain), p.delay, p.kind, p.length) for p in rev]
    H_rev = assemble_channel(conj_rev, gr, gt, orx, ot)
    np.testing.assert_allclose(H_rev, H.conj().T, atol=1e-18)
    cbt, cbr = build_dft_codebook(gt), build_dft_codebook(gr)
    np.testing.assert_allclose(power_table(H_rev, cbr, cbt), power_table(H, cbt, cbr).T, rtol=1e-9, atol=1e-30)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_best_power_is_bounded_by_path_energy(seed):
    rng = np.random.default_rng(seed)
    t = default_scene_template()
    rx = (rng.uniform(-100, 100), -1.75, 1.5)
    paths = trace_paths(t, t.infrastructure_position, rx)
    g = ArrayGeometry.square(4)
    cb = build_dft_codebook(g)
    H = assemble_channel(paths, g, g, ArrayOrientation(yaw=90.0), ArrayOrientation(yaw=-90.0))
    best = power_table(H, cb, cb).max()
    bound = sum(abs(p.gain) for p in paths) ** 2 * 16 * 16
    assert best <= bound * (1 + 1e-12)


def test_pathset_sorting():
    ps = PathSet((fake_path((0, 0), (0, 0), 1e-6), fake_path((0, 0), (0, 0), 1e-4)))
    assert abs(ps[0].gain) == 1e-4 and len(ps) == 2

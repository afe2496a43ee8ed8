import json

import numpy as np
import pytest

import oracles as O
from kleinlab import fixtures
from kleinlab import geometry as geo
from kleinlab.ends import EndCollection, EndSpec, Regions, check_fixed, translate_regions
from kleinlab.errors import EndsOverlapError, KleinlabError, NotFixedError


def horoball(dim=2, D=0.4, seed=0):
    base = O.random_unit(np.random.default_rng(seed), dim)
    return EndSpec("h", "horoball", {"base": base, "diameter": D}, [])


def halfspace(dim=2, theta=0.6, seed=1):
    axis = O.random_unit(np.random.default_rng(seed), dim)
    return EndSpec("f", "halfspace", {"axis": axis, "angle": theta}, [])


@pytest.mark.parametrize("dim", [2, 3])
def test_values_match_euclidean_balls(dim, rng):
    x = O.random_ball_points(rng, dim, 5000, rmax=0.999)
    om = 1 - np.sum(x * x, axis=1)
    h, f = horoball(dim), halfspace(dim)
    vh = h.region().values(x, om)
    vf = f.region().values(x, om)
    clear = np.abs(vh) > 1e-12
    np.testing.assert_array_equal((vh > 0)[clear], O.horoball_inside(x, h.center, h.size)[clear])
    clear = np.abs(vf) > 1e-12
    np.testing.assert_array_equal((vf > 0)[clear], O.halfspace_inside(x, f.center, f.size)[clear])
    assert O.horoball_inside(x, h.center, h.size).any() and O.halfspace_inside(x, f.center, f.size).any()


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("kind", ["horoball", "halfspace"])
def test_translates_contain_mapped_points(dim, kind, rng):
    end = horoball(dim) if kind == "horoball" else halfspace(dim)
    inside, _ = end.sample(300)
    outside = O.random_ball_points(rng, dim, 3000, rmax=0.99)
    outside = outside[end.region().values(outside) < -1e-6]
    for _ in range(5):
        g, f = O.random_isometry(rng, dim, max_len=2.0)
        R = translate_regions(end.region(), g.matrix[None], dim)
        zero = np.zeros(len(inside), dtype=np.int64)
        assert np.all(R.values(f(inside), None, zero) > -1e-9)
        zero = np.zeros(len(outside), dtype=np.int64)
        assert np.all(R.values(f(outside), None, zero) < 1e-9)


def test_horoball_boundary_distance():
    end = horoball(2, 0.5, seed=4)
    x, om = end.sample(20, seed=2)
    got = end.region().boundary_distance(x, om, np.zeros(20, dtype=np.int64))
    want = np.array([O.horosphere_distance(p, end.center, end.size) for p in x])
    np.testing.assert_allclose(got, want, rtol=1e-4, atol=1e-6)


def test_halfspace_boundary_distance():
    end = halfspace(2, 0.7, seed=5)
    x, om = end.sample(20, seed=2)
    got = end.region().boundary_distance(x, om, np.zeros(20, dtype=np.int64))
    want = np.array([O.geodesic_line_distance(p, end.center, end.size) for p in x])
    np.testing.assert_allclose(got, want, rtol=1e-4, atol=1e-6)


def test_nearest_point_on_boundary():
    for end in (horoball(2), halfspace(2), horoball(3), halfspace(3)):
        p = end.nearest_point()
        assert abs(end.region().values(p[None, :])[0]) < 1e-12
        x, om = end.sample(500)
        assert np.linalg.norm(x, axis=1).min() >= np.linalg.norm(p) - 1e-12


def test_locate_boundary_and_first_wins():
    R = Regions("horoball", np.array([[1.0, 0.0], [1.0, 0.0]]), np.array([0.5, 0.3]))
    pts = np.array([[1.0, 0.0], [0.8, 0.0], [-1.0, 0.0], [0.0, 0.0]])
    om = geo.omega_of(pts)
    np.testing.assert_array_equal(R.locate(pts, om), [0, 0, -1, -1])
    C = Regions("halfspace", np.array([[0.0, 1.0]]), np.array([0.5]))
    rim = np.array([[np.sin(0.5), np.cos(0.5)], [np.sin(0.51), np.cos(0.51)]])
    np.testing.assert_array_equal(C.locate(rim, np.zeros(2)), [0, -1])


def test_cusped_ends_valid_and_disjoint(cusped, cusped_ends):
    cusped_ends.check_disjoint()
    for e in cusped_ends:
        e.validate(cusped)
    check_fixed(cusped, fixtures.cusp_point(), cusped_ends["cusp"].stabilizer_words(cusped))
    with pytest.raises(NotFixedError):
        check_fixed(cusped, fixtures.cusp_point(), [cusped.parse("h")])


def test_validate_rejects_wrong_stabilizer(cusped, cusped_ends):
    bad = EndSpec.from_json({**cusped_ends["funnel"].to_json(), "stabilizer": ["p"]})
    with pytest.raises(KleinlabError):
        bad.validate(cusped)


def test_overlap_detected():
    a = EndSpec("a", "halfspace", {"axis": [1.0, 0.0], "angle": 0.5}, [])
    b = EndSpec("b", "halfspace", {"axis": [np.cos(0.6), np.sin(0.6)], "angle": 0.5}, [])
    with pytest.raises(EndsOverlapError):
        EndCollection([a, b]).check_disjoint()
    c = EndSpec("c", "horoball", {"base": [-1.0, 0.0], "diameter": 0.5}, [])
    EndCollection([a, c]).check_disjoint()


def test_bad_parameters():
    with pytest.raises(KleinlabError):
        EndSpec("x", "horoball", {"base": [1.0, 0.0], "diameter": 1.2}, [])
    with pytest.raises(KleinlabError):
        EndSpec("x", "halfspace", {"axis": [1.0, 0.0], "angle": 2.0}, [])
    with pytest.raises(KleinlabError):
        EndSpec("x", "cone", {}, [])
    with pytest.raises(KleinlabError):
        EndSpec.from_json({"kind": "horoball", "base": [1.0, 0.0]})


def test_json_round_trip(cusped_ends):
    text = json.dumps(cusped_ends.to_json())
    back = EndCollection.from_json(text)
    assert back.names() == cusped_ends.names()
    assert back.complete == cusped_ends.complete
    for a, b in zip(back, cusped_ends):
        np.testing.assert_array_equal(a.center, b.center)
        assert a.size == b.size and a.stabilizer == b.stabilizer and a.flags == b.flags
    shipped = fixtures.load_ends("cusped_ends")
    assert shipped.names() == cusped_ends.names()
    with pytest.raises(KeyError):
        cusped_ends["nope"]
    assert cusped_ends[0].name == "cusp"

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from kleinlab import fixtures
from kleinlab import geometry as geo
from kleinlab.errors import EmptyMeasureError, KleinlabError
from kleinlab.geometry import Isometry
from kleinlab.groups import orbit
from kleinlab.measures import (
    AtomicMeasure,
    Cap,
    CapFamily,
    bl_discrepancy,
    cap_mass,
    cocycle_residual,
    conformality_residual,
    generator_residuals,
    image_atoms,
    image_measure,
    match_atoms,
    orbit_measure,
    point_mass,
    read_measure_csv,
    restrict,
    total_mass,
    weak_limit_run,
)
from kleinlab.poincare import poincare_partial
from kleinlab.words import Word

ALPHA = 0.66


@pytest.fixture(scope="module")
def table8():
    return orbit(fixtures.schottky(), None, 8)


@pytest.fixture(scope="module")
def m8(table8):
    return orbit_measure(table8, ALPHA)


def test_single_atom():
    t = orbit(fixtures.identity(), None, 3)
    m = orbit_measure(t, 0.7)
    assert len(m) == 1 and m.mass[0] == 1.0
    raw = orbit_measure(t, 0.7, normalize=False)
    assert raw.mass[0] == 1.0


def test_normalized(m8):
    assert total_mass(m8) == pytest.approx(1.0, abs=1e-12)
    assert np.all(m8.mass > 0)


def test_conformality_generators(m8, schottky):
    res = generator_residuals(m8, schottky)
    assert res["max_residual"] <= 1e-9
    assert res["testable_fraction"] >= 0.7


def test_conformality_random_words(m8, schottky, rng):
    for _ in range(20):
        w = Word(rng.integers(0, 4, size=rng.integers(1, 5)).tolist())
        rep = conformality_residual(m8, schottky.element(w))
        assert rep.max_residual <= 1e-9
        assert rep.n_tested > 0


def test_rotation_point_mass():
    m = point_mass(np.zeros(2), 1.0)
    r = Isometry.rotation(O.random_rotation(np.random.default_rng(1), 2))
    rep = conformality_residual(m, r)
    assert rep.max_residual == 0.0 and rep.n_tested == 1


def test_corrupted_mass_detected(m8, schottky):
    mass = m8.mass.copy()
    i = int(np.argmax(m8.mass * (m8.tags == 2)))
    mass[i] *= 2
    bad = AtomicMeasure(m8.alpha, m8.coords, m8.omega, mass, {}, m8.tags, m8.multiplicity)
    assert generator_residuals(bad, schottky)["max_residual"] >= 0.5


def test_comparability_with_poincare_sum(table8):
    # 1 - |x|^2 = 4 e^{-d} / (1 + e^{-d})^2 at distance d from the origin
    raw = total_mass(orbit_measure(table8, ALPHA, normalize=False))
    P = poincare_partial(table8, None, ALPHA).partial_sum
    d = table8.dist
    exact = math.fsum((4 * np.exp(-d) / (1 + np.exp(-d)) ** 2) ** ALPHA)
    assert raw == pytest.approx(exact, rel=1e-12)
    assert P <= raw <= 4**ALPHA * P


def test_image_identity(m8):
    c, o, w = image_atoms(m8, Isometry.identity(2))
    np.testing.assert_allclose(c, m8.coords, rtol=0, atol=1e-15)
    np.testing.assert_allclose(w, m8.mass, rtol=1e-12)


def test_cocycle(schottky, rng):
    m = orbit_measure(orbit(schottky, None, 5), ALPHA)
    for _ in range(30):
        w1, w2 = (Word(rng.integers(0, 4, size=rng.integers(0, 6)).tolist()) for _ in range(2))
        r = cocycle_residual(m, schottky.element(w1), schottky.element(w2))
        assert r["max_mass_rel"] <= 1e-10


def test_image_of_orbit_measure_is_itself(m8, schottky):
    g = schottky.element(schottky.parse("a b^-1"))
    c, o, w = image_atoms(m8, g)
    j = match_atoms(m8, c, o)
    ok = j >= 0
    assert ok.mean() > 0.3
    np.testing.assert_allclose(w[ok], m8.mass[j[ok]], rtol=1e-10)


def test_restrict_and_partition(m8):
    parts = [restrict(m8, lambda c, o, k=k: (np.arctan2(c[:, 1], c[:, 0]) // (np.pi / 2)) == k) for k in (-2, -1, 0, 1, 2)]
    assert math.fsum(total_mass(p) for p in parts) == pytest.approx(total_mass(m8), abs=1e-12)
    full = restrict(m8, lambda c, o: np.ones(len(o), bool))
    np.testing.assert_array_equal(full.mass, m8.mass)
    with pytest.raises(EmptyMeasureError):
        restrict(m8, lambda c, o: np.zeros(len(o), bool))


def test_cap_mass_full_sphere():
    m = AtomicMeasure.build(1.0, [[1.0, 0.0], [0.0, 0.5], [0.0, -1.0]], [0.0, 0.75, 0.0], [0.2, 0.5, 0.3])
    assert cap_mass(m, Cap(np.array([1.0, 0.0]), np.pi, cone=False)) == pytest.approx(0.5)
    assert cap_mass(m, Cap(np.array([1.0, 0.0]), np.pi, cone=True)) == pytest.approx(1.0)


def test_cap_family_matches_loop(m8, rng):
    axes = O.random_unit(rng, 2, 40)
    angles = rng.uniform(0.01, 0.4, 40)
    fam = CapFamily(axes, angles).contains(m8.coords, m8.omega)
    loop = np.zeros(len(m8), bool)
    for a, t in zip(axes, angles):
        loop |= Cap(a, t, cone=True).contains(m8.coords, m8.omega)
    np.testing.assert_array_equal(fam, loop)


def test_cap_masses_monotone(m8):
    axis = np.array([1.0, 0.0])
    masses = [cap_mass(m8, Cap(axis, a)) for a in (0.1, 0.3, 0.6, 1.2)]
    assert all(0 <= x <= 1 for x in masses)
    assert masses == sorted(masses)


def test_merge_and_validation():
    m = AtomicMeasure.build(1.0, [[0.1, 0.2], [0.1, 0.2 + 1e-12], [0.3, 0.0]], [0.95, 0.95, 0.91], [1.0, 2.0, 3.0])
    assert len(m) == 2
    assert total_mass(m) == 6.0
    with pytest.raises(KleinlabError):
        AtomicMeasure.build(1.0, [[0.1, 0.2]], [0.95], [-1.0])
    with pytest.raises(EmptyMeasureError):
        AtomicMeasure.build(1.0, np.zeros((0, 2)), [], [])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-0.7, 0.7), st.floats(-0.7, 0.7), st.floats(0.01, 5.0)), min_size=1, max_size=30))
def test_merge_preserves_mass(atoms):
    c = np.array([[x, y] for x, y, _ in atoms] * 2)
    w = np.array([p for *_, p in atoms] * 2)
    m = AtomicMeasure.build(1.0, c, geo.omega_of(c), w)
    assert total_mass(m) == pytest.approx(2 * sum(p for *_, p in atoms), rel=1e-12)
    assert len(m) <= len(atoms)


def test_csv_round_trip(m8):
    back = read_measure_csv(m8.to_csv())
    np.testing.assert_array_equal(back.coords, m8.coords)
    np.testing.assert_array_equal(back.mass, m8.mass)
    np.testing.assert_array_equal(back.omega, m8.omega)
    assert back.alpha == m8.alpha


def test_bl_discrepancy(m8, schottky):
    # identical measures only pay for the radial push to the sphere
    u = np.linalg.norm(m8.coords, axis=1)
    push = math.fsum(m8.mass * np.where(m8.omega > 0, m8.omega / (1 + u), 0.0))
    assert bl_discrepancy(m8, m8) == pytest.approx(2 * push, rel=1e-9)
    bdry = AtomicMeasure.build(1.0, O.random_unit(np.random.default_rng(3), 2, 50), np.zeros(50), np.ones(50))
    assert bl_discrepancy(bdry, bdry) <= 1e-12
    other = orbit_measure(orbit(schottky, [0.3, 0.0], 8), ALPHA)
    d = bl_discrepancy(m8, other)
    assert d == pytest.approx(bl_discrepancy(other, m8), rel=1e-9)
    # two point masses on the sphere: transport cost is the arc between them
    a = AtomicMeasure.build(1.0, [[1.0, 0.0]], [0.0], [1.0])
    b = AtomicMeasure.build(1.0, [[0.0, 1.0]], [0.0], [1.0])
    assert bl_discrepancy(a, b) == pytest.approx(np.pi / 2, rel=1e-12)


def test_bl_discrepancy_3d():
    a = AtomicMeasure.build(1.0, [[0.0, 0.0, 1.0]], [0.0], [1.0])
    b = AtomicMeasure.build(1.0, [[0.0, 0.0, -1.0]], [0.0], [1.0])
    assert np.pi * 0.9 <= bl_discrepancy(a, b) <= np.pi * 1.1


def test_weak_limit_run_single_station(schottky):
    ray = np.array([1.0, 0.0])
    run = weak_limit_run(schottky, ray, [0.5], ALPHA, 6)
    direct = orbit_measure(orbit(schottky, 0.5 * ray, 6), ALPHA)
    np.testing.assert_array_equal(run.measures[0].mass, direct.mass)
    assert total_mass(run.measures[0]) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(KleinlabError):
        weak_limit_run(schottky, ray, [0.5, 0.4], ALPHA, 4)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from kleinlab import geometry as geo
from kleinlab.errors import BoundaryProximityError, KleinlabError, PoleError
from kleinlab.geometry import Isometry

DIMS = [2, 3]


def disk_map():
    """g(z) = (z - 1/2) / (1 - z/2): the translation taking 1/2 to 0."""
    return Isometry.translation([-1.0, 0.0], np.log(3.0))


# -- points and distance -------------------------------------------------------


def test_distance_examples():
    assert geo.dist([0, 0], [0, 0]) == 0.0
    assert geo.dist([0, 0], [0.5, 0]) == pytest.approx(np.log(3.0), abs=1e-12)


@pytest.mark.parametrize("n", DIMS)
def test_distance_matches_arccosh_formula(rng, n):
    x = O.random_ball_points(rng, n, 2000)
    y = O.random_ball_points(rng, n, 2000)
    np.testing.assert_allclose(geo.hyperbolic_distance(x, y), O.ball_distance(x, y), rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("n", DIMS)
def test_triangle_inequality(rng, n):
    x, y, z = (O.random_ball_points(rng, n, 10_000, 0.99) for _ in range(3))
    d = geo.hyperbolic_distance
    assert np.all(d(x, z) <= d(x, y) + d(y, z) + 1e-10)
    np.testing.assert_allclose(d(x, y), d(y, x), rtol=0, atol=1e-12)


def test_distance_from_origin_deep():
    # omega carried separately keeps precision where 1 - |x|^2 underflows relative to 1
    t = 60.0
    x = np.array([[np.tanh(t / 2), 0.0]])
    om = np.array([1.0 / np.cosh(t / 2) ** 2])
    assert geo.distance_from_origin(x, om)[0] == pytest.approx(t, rel=1e-12)


def test_boundary_proximity_rejected():
    with pytest.raises(BoundaryProximityError):
        geo.ball_point([1.0 - 1e-16, 0.0])
    with pytest.raises(KleinlabError):
        geo.boundary_point([0.5, 0.0])


# -- action ------------------------------------------------------------------


def test_identity_action():
    e = Isometry.identity(2)
    np.testing.assert_allclose(geo.apply(e, [0.3, 0.1]), [0.3, 0.1], atol=1e-15)
    np.testing.assert_allclose(geo.apply_boundary(e, [1.0, 0.0]), [1.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("n", DIMS)
def test_action_matches_mobius_oracle(rng, n):
    for _ in range(50):
        g, oracle = O.random_isometry(rng, n)
        x = O.random_ball_points(rng, n, 200)
        y, _ = g.act(x, geo.omega_of(x))
        np.testing.assert_allclose(y, oracle(x), atol=1e-10)


@pytest.mark.parametrize("n", DIMS)
def test_distance_preserved(rng, n):
    worst = 0.0
    for _ in range(100):
        g, _ = O.random_isometry(rng, n)
        x = O.random_ball_points(rng, n, 100)
        y = O.random_ball_points(rng, n, 100)
        gx, ox = g.act(x, geo.omega_of(x))
        gy, oy = g.act(y, geo.omega_of(y))
        worst = max(worst, np.max(np.abs(geo.hyperbolic_distance(gx, gy, ox, oy) - geo.hyperbolic_distance(x, y))))
    assert worst <= 1e-10


@pytest.mark.parametrize("n", DIMS)
def test_inverse_round_trip(rng, n):
    for _ in range(20):
        g, _ = O.random_isometry(rng, n)
        y = geo.apply(g.inverse(), geo.apply(g, np.zeros(n)))
        assert np.linalg.norm(y) <= 1e-10


@pytest.mark.parametrize("n", DIMS)
def test_action_is_homomorphism(rng, n):
    for _ in range(50):
        g, _ = O.random_isometry(rng, n)
        h, _ = O.random_isometry(rng, n)
        x = O.random_ball_points(rng, n, 50)
        om = geo.omega_of(x)
        a, _ = (g @ h).act(x, om)
        b, _ = g.act(*h.act(x, om))
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_compose_invert_identity(rng):
    for n in DIMS:
        g, _ = O.random_isometry(rng, n)
        assert (g @ g.inverse()).is_close(Isometry.identity(n), 1e-12)
        assert (Isometry.identity(n) @ g).is_close(g, 1e-15)
        h, _ = O.random_isometry(rng, n)
        k, _ = O.random_isometry(rng, n)
        assert ((g @ h) @ k).is_close(g @ (h @ k), 1e-12)


def test_normalization_invariants(rng):
    for n in DIMS:
        g, _ = O.random_isometry(rng, n)
        for m in ((g @ g).matrix, g.inverse().matrix):
            assert abs(np.linalg.det(m) - 1) <= 1e-12
        if n == 2:
            assert np.max(np.abs(g.matrix.imag)) <= 1e-12


def test_json_round_trip(rng):
    g, _ = O.random_isometry(rng, 3)
    assert Isometry.from_json(g.to_json()).is_close(g, 1e-15)


@pytest.mark.parametrize("eps", [1e-3, 1e-5, 1e-7])
def test_radial_limit_of_action(rng, eps):
    for n in DIMS:
        g, _ = O.random_isometry(rng, n)
        xi = O.random_unit(rng, n)
        inner = geo.apply(g, (1 - eps) * xi)
        assert np.linalg.norm(inner - geo.apply_boundary(g, xi)) <= 20 * eps


def test_parabolic_fixes_its_point():
    p = Isometry(np.array([[1.0, 3.0], [0.0, 1.0]], dtype=complex), 2)
    v = np.array([0.0, -1.0])  # infinity of the half-plane
    np.testing.assert_allclose(geo.apply_boundary(p, v), v, atol=1e-10)
    assert p.kind() == "parabolic"


# -- conformal factors -------------------------------------------------------


def test_factor_examples():
    g = disk_map()
    np.testing.assert_allclose(geo.apply(g, [0.5, 0.0]), [0.0, 0.0], atol=1e-15)
    assert geo.conformal_factor_interior(g, [0.0, 0.0]) == pytest.approx(0.75, rel=1e-14)
    assert geo.conformal_factor_boundary(g, [1.0, 0.0]) == pytest.approx(3.0, rel=1e-14)
    e = Isometry.identity(2)
    assert geo.conformal_factor_interior(e, [0.2, 0.3]) == 1.0
    assert geo.conformal_factor_boundary(e, [1.0, 0.0]) == 1.0


@pytest.mark.parametrize("n", DIMS)
def test_interior_factor_matches_jacobian(rng, n):
    for _ in range(200):
        g, oracle = O.random_isometry(rng, n)
        x = O.random_ball_points(rng, n, 1, 0.8)[0]
        fd = O.fd_jacobian_norm(lambda p: oracle(p[None, :])[0], x)
        assert geo.conformal_factor_interior(g, x) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("n", DIMS)
def test_boundary_factor_matches_jacobian_on_sphere(rng, n):
    # the oracle map is a Mobius map of R^n, conformal at the sphere with scale |g'(xi)|
    for _ in range(200):
        g, oracle = O.random_isometry(rng, n)
        xi = O.random_unit(rng, n)
        a = geo.apply(g.inverse(), np.zeros(n))
        closed = (1 - a @ a) / np.sum((xi - a) ** 2)
        assert geo.conformal_factor_boundary(g, xi) == pytest.approx(closed, rel=1e-10)
        fd = O.fd_jacobian_norm(lambda p: oracle(p[None, :])[0], xi)
        assert geo.conformal_factor_boundary(g, xi) == pytest.approx(fd, rel=1e-6)


def test_boundary_factor_is_limit_of_interior(rng):
    for n in DIMS:
        for _ in range(50):
            # the gap is first order in eps times the factor's variation, so keep g modest
            g, _ = O.random_isometry(rng, n, max_len=1.0)
            xi = O.random_unit(rng, n)
            b = geo.conformal_factor_boundary(g, xi)
            errs = [abs(geo.conformal_factor_interior(g, (1 - e) * xi) - b) for e in (1e-2, 1e-4, 1e-6)]
            assert errs[0] >= errs[1] >= errs[2] or errs[2] <= 1e-12
            assert errs[2] <= 1e-5


def test_rotation_factors_are_one(rng):
    for n in DIMS:
        r = Isometry.rotation(O.random_rotation(rng, n))
        xi = O.random_unit(rng, n, 100)
        np.testing.assert_allclose(geo.boundary_factors(r, xi), 1.0, atol=1e-12)
        x = O.random_ball_points(rng, n, 100)
        np.testing.assert_allclose(geo.interior_factors(r, x, geo.omega_of(x))[2], 1.0, atol=1e-12)


@pytest.mark.parametrize("n", DIMS)
def test_chain_rule(rng, n):
    for _ in range(100):
        g, _ = O.random_isometry(rng, n)
        h, _ = O.random_isometry(rng, n)
        x = O.random_ball_points(rng, n, 1)[0]
        lhs = geo.conformal_factor_interior(g @ h, x)
        rhs = geo.conformal_factor_interior(g, geo.apply(h, x)) * geo.conformal_factor_interior(h, x)
        assert lhs == pytest.approx(rhs, rel=1e-10)
        xi = O.random_unit(rng, n)
        lhs = geo.conformal_factor_boundary(g @ h, xi)
        rhs = geo.conformal_factor_boundary(g, geo.apply_boundary(h, xi)) * geo.conformal_factor_boundary(h, xi)
        assert lhs == pytest.approx(rhs, rel=1e-10)


def test_pole_error():
    # a very long translation puts g^{-1}(0) numerically on the sphere
    g = Isometry.translation([1.0, 0.0], 80.0)
    with pytest.raises(PoleError):
        geo.conformal_factor_boundary(g, [-1.0, 0.0])


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.0, 6.0),
    st.floats(0.0, 2 * np.pi),
    st.floats(0.0, 0.95),
    st.floats(0.0, 2 * np.pi),
)
def test_translation_moves_origin_by_length(length, phi, r, psi):
    u = np.array([np.cos(phi), np.sin(phi)])
    g = Isometry.translation(u, length)
    assert geo.dist(np.zeros(2), geo.apply(g, np.zeros(2))) == pytest.approx(length, abs=1e-9)
    x = r * np.array([np.cos(psi), np.sin(psi)])
    y = geo.apply(g, x)
    assert geo.dist(x, np.zeros(2)) == pytest.approx(geo.dist(y, geo.apply(g, np.zeros(2))), abs=1e-9)

"""Independent reference computations used by the tests.

Nothing here calls into kleinlab's geometry: points are moved with the
ball-model Mobius addition, distances come from the arccosh formula and
derivatives from central differences.
"""

from __future__ import annotations

import itertools

import numpy as np

# ---------------------------------------------------------------------------
# ball model


def ball_distance(x, y):
    """``arccosh(1 + 2|x-y|^2 / ((1-|x|^2)(1-|y|^2)))`` (fine away from the sphere)."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    num = 2.0 * np.sum((x - y) ** 2, axis=-1)
    den = (1.0 - np.sum(x * x, axis=-1)) * (1.0 - np.sum(y * y, axis=-1))
    return np.arccosh(1.0 + num / den)


def mobius_add(b, x):
    """``b (+) x``: the hyperbolic translation along the diameter through ``b`` taking 0 to ``b``."""
    b, x = np.asarray(b, float), np.asarray(x, float)
    bx = np.sum(b * x, axis=-1, keepdims=True)
    b2 = np.sum(b * b, axis=-1, keepdims=True)
    x2 = np.sum(x * x, axis=-1, keepdims=True)
    return ((1 + 2 * bx + x2) * b + (1 - b2) * x) / (1 + 2 * bx + b2 * x2)


def random_rotation(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_unit(rng, n, k=None):
    v = rng.normal(size=(n,) if k is None else (k, n))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_ball_points(rng, n, k, rmax=0.9):
    u = random_unit(rng, n, k)
    r = rmax * rng.random(k) ** (1.0 / n)
    return u * r[:, None]


def random_isometry(rng, n, max_len=3.0):
    """``(Isometry, oracle)`` with the oracle acting as ``x -> b (+) R x``."""
    from kleinlab.geometry import Isometry

    R = random_rotation(rng, n)
    u = random_unit(rng, n)
    length = max_len * rng.random()
    g = Isometry.translation(u, length) @ Isometry.rotation(R)
    b = np.tanh(length / 2.0) * u
    return g, (lambda x: mobius_add(b, np.asarray(x) @ R.T))


def fd_jacobian_norm(f, x, h=1e-6):
    """Operator norm of the central-difference Jacobian of ``f`` at ``x``."""
    x = np.asarray(x, float)
    n = x.shape[0]
    J = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        J[:, i] = (f(x + e) - f(x - e)) / (2 * h)
    return np.linalg.svd(J, compute_uv=False)[0]


# ---------------------------------------------------------------------------
# free groups


def reduced_words_bruteforce(k, N):
    """All reduced words (tuples of letter codes, inverse = code ^ 1) of length <= N."""
    out = []
    for L in range(N + 1):
        for w in itertools.product(range(2 * k), repeat=L):
            if all(w[i + 1] != w[i] ^ 1 for i in range(L - 1)):
                out.append(w)
    return out


def free_reduce(w):
    out = []
    for c in w:
        if out and out[-1] == c ^ 1:
            out.pop()
        else:
            out.append(c)
    return tuple(out)


def inverse_word(w):
    return tuple(c ^ 1 for c in reversed(w))


def in_cyclic_subgroup(w, code):
    """Is the reduced word a power of the letter ``code``?"""
    w = free_reduce(w)
    return all(c == code for c in w) or all(c == code ^ 1 for c in w)


# ---------------------------------------------------------------------------
# shadows by tracing rays


def _ray_points(u, t):
    r = np.tanh(t / 2.0)
    return u * r[..., None]


def ray_min_distance(u, y, t_max, iters=100):
    """Minimum of ``d(tanh(t/2) u, y)`` over ``t in [0, t_max]`` by ternary search.

    ``t_max`` may be one bound per ray.

    The distance to a point is convex along a geodesic, so the search is
    exact up to its bracket.  Returns ``(min distance, argmin t)``.
    """
    u = np.atleast_2d(u)
    k = u.shape[0]
    lo, hi = np.zeros(k), np.broadcast_to(np.asarray(t_max, float), (k,)).copy()
    f = lambda t: ball_distance(_ray_points(u, t), y)
    for _ in range(iters):
        a, b = lo + (hi - lo) / 3, hi - (hi - lo) / 3
        left = f(a) < f(b)
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
    t = (lo + hi) / 2
    return f(t), t


def entry_depth_oracle(u, y, r, t_max):
    """Smallest ``t`` with ``d(tanh(t/2) u, y) <= r`` by bisection (inf on a miss)."""
    dmin, tmin = ray_min_distance(u, y, t_max)
    out = np.full(len(np.atleast_2d(u)), np.inf)
    hit = dmin <= r
    lo, hi = np.zeros(hit.sum()), tmin[hit]
    uu = np.atleast_2d(u)[hit]
    inside0 = ball_distance(np.zeros_like(uu), y) <= r
    for _ in range(80):
        mid = (lo + hi) / 2
        ins = ball_distance(_ray_points(uu, mid), y) <= r
        hi = np.where(ins, mid, hi)
        lo = np.where(ins, lo, mid)
    out[hit] = np.where(inside0, 0.0, hi)
    return out


# ---------------------------------------------------------------------------
# end regions as explicit Euclidean balls


def horoball_inside(x, base, D):
    c = (1 - D / 2) * np.asarray(base)
    return np.linalg.norm(np.asarray(x) - c, axis=-1) < D / 2


def halfspace_inside(x, axis, theta):
    """Inside the circle orthogonal to the sphere that meets it along the cap rim."""
    c = np.asarray(axis) / np.cos(theta)
    return np.linalg.norm(np.asarray(x) - c, axis=-1) < np.tan(theta)


def horosphere_distance(x, base, D, k=20000):
    """Hyperbolic distance from ``x`` to the horosphere, by sampling it densely (2D)."""
    c = (1 - D / 2) * np.asarray(base)
    a = np.linspace(0, 2 * np.pi, k, endpoint=False)
    pts = c + D / 2 * np.stack([np.cos(a), np.sin(a)], axis=1)
    pts = pts[np.linalg.norm(pts, axis=1) < 1 - 1e-9]
    return ball_distance(pts, x).min()


def geodesic_line_distance(x, axis, theta, k=20000):
    """Hyperbolic distance from ``x`` to the geodesic bounding the half-space (2D), by sampling."""
    c = np.asarray(axis) / np.cos(theta)
    e = np.asarray(axis)
    base = np.arctan2(-e[1], -e[0])
    half = np.pi / 2 - theta  # the arc inside the disk subtends this angle on each side
    a = base + np.linspace(-half, half, k)[1:-1]
    pts = c + np.tan(theta) * np.stack([np.cos(a), np.sin(a)], axis=1)
    pts = pts[np.linalg.norm(pts, axis=1) < 1 - 1e-9]
    return ball_distance(pts, x).min()

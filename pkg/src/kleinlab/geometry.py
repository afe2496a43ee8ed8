"""Isometries of the Poincare ball in dimensions 2 and 3.

Group elements are stored as normalized 2x2 complex matrices acting on the
upper half-space model (points ``z + t j`` with ``z`` complex, ``t > 0``).
A fixed inversion in the sphere of radius sqrt(2) about ``-e_n`` carries the
half-space onto the ball; it is an involution, so the same closed form is
used in both directions.  In dimension 2 the matrices are real and ``z`` is
real, which is the restriction of the 3-dimensional picture to a plane.

Interior points are handled as a pair ``(coords, omega)`` where
``omega = 1 - |x|^2``.  Deep orbit points have ``omega`` far below machine
epsilon relative to 1, so ``omega`` is carried separately (computed from the
half-space height, which keeps full relative precision) instead of being
recomputed from the coordinates.  Boundary points have ``omega == 0``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryProximityError, KleinlabError, PoleError

BOUNDARY_MARGIN = 1e-14
DET_TOL = 1e-12
_TIE = 1e-12


# ---------------------------------------------------------------------------
# points


def ball_point(coords) -> np.ndarray:
    """Validate an interior point of the ball and return it as a float array."""
    x = np.asarray(coords, dtype=float)
    if x.ndim != 1 or x.shape[0] not in (2, 3):
        raise KleinlabError(f"ball point must have 2 or 3 coordinates, got shape {x.shape}")
    r = np.linalg.norm(x)
    if r > 1.0 - BOUNDARY_MARGIN:
        raise BoundaryProximityError(f"|x| = {r!r} is within {BOUNDARY_MARGIN} of the sphere")
    return x


def boundary_point(coords) -> np.ndarray:
    """Return ``coords`` renormalized to a unit vector."""
    xi = np.asarray(coords, dtype=float)
    if xi.ndim != 1 or xi.shape[0] not in (2, 3):
        raise KleinlabError(f"boundary point must have 2 or 3 coordinates, got shape {xi.shape}")
    r = np.linalg.norm(xi)
    if not np.isfinite(r) or abs(r - 1.0) > 1e-6:
        raise KleinlabError(f"boundary point has norm {r!r}, expected 1")
    return xi / r


def omega_of(x) -> np.ndarray:
    """``1 - |x|^2`` computed from coordinates (only accurate away from the sphere)."""
    x = np.asarray(x, dtype=float)
    return 1.0 - np.sum(x * x, axis=-1)


def hyperbolic_distance(x, y, omega_x=None, omega_y=None) -> np.ndarray:
    """Vectorized distance ``2 asinh(|x - y| / sqrt(omega_x omega_y))``.

    Equivalent to ``cosh d = 1 + 2|x-y|^2 / ((1-|x|^2)(1-|y|^2))`` but stable
    for small distances.  Pass accurate ``omega`` values when available.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ox = omega_of(x) if omega_x is None else np.asarray(omega_x, dtype=float)
    oy = omega_of(y) if omega_y is None else np.asarray(omega_y, dtype=float)
    diff = np.sqrt(np.sum((x - y) ** 2, axis=-1))
    # |x - y| >= ||x| - |y|| = |omega_y - omega_x| / (|x| + |y|); the right side
    # survives when deep points share coordinates to the last bit
    rsum = np.sqrt(np.sum(x * x, axis=-1)) + np.sqrt(np.sum(y * y, axis=-1))
    # omega carries a rounding error of a few ulps of itself
    gap = np.maximum(np.abs(ox - oy) - 4.0 * np.finfo(float).eps * np.maximum(ox, oy), 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        radial = np.where(rsum > 0, gap / rsum, 0.0)
    diff = np.maximum(diff, radial)
    return 2.0 * np.arcsinh(diff / np.sqrt(ox * oy))


def distance_from_origin(x, omega=None) -> np.ndarray:
    """``d(0, x) = log((1+|x|)^2 / (1-|x|^2))`` using an accurate ``omega`` if given."""
    x = np.asarray(x, dtype=float)
    r = np.sqrt(np.sum(x * x, axis=-1))
    om = omega_of(x) if omega is None else np.asarray(omega, dtype=float)
    return 2.0 * np.log1p(r) - np.log(om)


def dist(x, y) -> float:
    """Hyperbolic distance between two interior points."""
    x = ball_point(x)
    y = ball_point(y)
    if x.shape != y.shape:
        raise KleinlabError("points have different dimensions")
    return float(hyperbolic_distance(x, y))


# ---------------------------------------------------------------------------
# model map (ball <-> upper half-space)


def _shifted_norm2(coords, omega):
    """``|x + e_n|^2`` without cancellation near ``-e_n``.

    Uses ``1 + x_n = (omega + |x'|^2) / (1 - x_n)`` on the lower hemisphere,
    which stays accurate when ``x_n`` rounds towards -1.
    """
    xn = coords[:, -1]
    xp2 = np.sum(coords[:, :-1] ** 2, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        lower = (omega + xp2) / (1.0 - xn)
    one_plus = np.where(xn < 0, lower, 1.0 + xn)
    return xp2 + one_plus * one_plus


def ball_to_half(coords, omega):
    """Interior ball points to half-space ``(z, t)``; ``coords`` has shape (k, n)."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    omega = np.asarray(omega, dtype=float)
    n = coords.shape[1]
    q = _shifted_norm2(coords, omega)
    t = omega / q
    h = 2.0 * coords[:, : n - 1] / q[:, None]
    z = h[:, 0] + 1j * h[:, 1] if n == 3 else h[:, 0] + 0j
    return z, t


def half_to_ball(z, t, n):
    """Half-space ``(z, t)`` to ball coordinates and accurate ``omega``."""
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=float)
    q = np.abs(z) ** 2 + (t + 1.0) ** 2
    out = np.empty(z.shape + (n,))
    out[..., 0] = 2.0 * z.real / q
    if n == 3:
        out[..., 1] = 2.0 * z.imag / q
    out[..., -1] = -1.0 + 2.0 * (t + 1.0) / q
    return out, 4.0 * t / q


def sphere_to_plane(xi):
    """Boundary ball points to boundary-plane values; ``-e_n`` maps to ``inf``."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    n = xi.shape[1]
    q = _shifted_norm2(xi, np.zeros(xi.shape[0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        h = 2.0 * xi[:, : n - 1] / q[:, None]
    z = h[:, 0] + 1j * h[:, 1] if n == 3 else h[:, 0] + 0j
    z = np.where(q < 1e-300, np.complex128(np.inf), z)
    return z


def plane_to_sphere(z, n):
    """Boundary-plane values (``inf`` allowed) to unit vectors."""
    z = np.asarray(z, dtype=complex)
    inf = ~np.isfinite(z)
    zz = np.where(inf, 0.0, z)
    q = np.abs(zz) ** 2 + 1.0
    out = np.empty(z.shape + (n,))
    out[..., 0] = 2.0 * zz.real / q
    if n == 3:
        out[..., 1] = 2.0 * zz.imag / q
    out[..., -1] = (1.0 - np.abs(zz) ** 2) / q
    out[inf] = 0.0
    out[inf, -1] = -1.0
    # unit length up to rounding; renormalize so invariants hold exactly-ish
    out /= np.linalg.norm(out, axis=-1, keepdims=True)
    return out


# ---------------------------------------------------------------------------
# matrix helpers


def act_half(m: np.ndarray, z, t):
    """Apply ``m`` (det 1) to half-space points.

    ``m`` may be a single matrix or a stack of shape (k, 2, 2) broadcast
    against ``z, t``.
    """
    m = np.asarray(m)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    cz_d = c * z + d
    den = np.abs(cz_d) ** 2 + (np.abs(c) ** 2) * t * t
    znew = ((a * z + b) * np.conj(cz_d) + a * np.conj(c) * t * t) / den
    return znew, t / den


def act_plane(m: np.ndarray, z):
    """Apply ``m`` (or a stack of matrices) as a Mobius map of the extended plane."""
    m = np.asarray(m)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    z = np.asarray(z, dtype=complex)
    inf = ~np.isfinite(z)
    zz = np.where(inf, 0.0, z)
    num = a * zz + b
    den = c * zz + d
    with np.errstate(divide="ignore", invalid="ignore"):
        out = num / den
        at_inf = np.where(c != 0, a / np.where(c != 0, c, 1.0), np.complex128(np.inf))
    out = np.where(den == 0.0, np.complex128(np.inf), out)
    return np.where(inf, at_inf, out)


def normalize_matrix(m, dim: int) -> np.ndarray:
    """Scale to determinant 1 and fix the sign of the projective representative."""
    m = np.array(m, dtype=complex).reshape(2, 2)
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    scale = max(1.0, float(np.max(np.abs(m))) ** 2)
    if abs(det - 1.0) <= 1e-9 * scale:
        # products of unimodular matrices: the computed det is rounding noise
        det = 1.0 + 0j
    if abs(det) < 1e-300:
        raise KleinlabError("singular matrix")
    if dim == 2:
        if np.max(np.abs(m.imag)) > DET_TOL * max(1.0, np.max(np.abs(m))):
            raise KleinlabError("dimension-2 isometries need real matrices")
        m = m.real.astype(complex)
        if det.real <= 0:
            raise KleinlabError("matrix reverses orientation of the half-plane (det <= 0)")
        m = m / np.sqrt(det.real)
    else:
        m = m / np.sqrt(det)
    tr = m[0, 0] + m[1, 1]
    if abs(tr.real) > _TIE:
        flip = tr.real < 0
    elif abs(tr.imag) > _TIE:
        flip = tr.imag < 0
    else:
        flat = m.ravel()
        first = flat[np.argmax(np.abs(flat) > _TIE)]
        flip = first.real < -_TIE or (abs(first.real) <= _TIE and first.imag < 0)
    if flip:
        m = -m
    if dim == 2:
        m = m.real.astype(complex)
    return m


def _three_point(z, w) -> np.ndarray:
    """Mobius matrix sending finite points z1, z2, z3 to w1, w2, w3."""

    def to_standard(p):
        p1, p2, p3 = p
        return np.array([[p2 - p3, -p1 * (p2 - p3)], [p2 - p1, -p3 * (p2 - p1)]], dtype=complex)

    a = to_standard(z)
    b = to_standard(w)
    binv = np.array([[b[1, 1], -b[0, 1]], [-b[1, 0], b[0, 0]]])
    return binv @ a


# ---------------------------------------------------------------------------
# isometries


@dataclass(frozen=True, eq=False)
class Isometry:
    """Orientation-preserving isometry of the ball, stored as a normalized matrix.

    Use :meth:`from_matrix` to build one from arbitrary (non-normalized) entries.
    """

    matrix: np.ndarray
    dim: int
    inverse_matrix: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise KleinlabError(f"dimension must be 2 or 3, got {self.dim}")
        m = normalize_matrix(self.matrix, self.dim)
        object.__setattr__(self, "matrix", m)
        inv = normalize_matrix(np.array([[m[1, 1], -m[0, 1]], [-m[1, 0], m[0, 0]]]), self.dim)
        object.__setattr__(self, "inverse_matrix", inv)
        m.setflags(write=False)
        inv.setflags(write=False)

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_matrix(cls, m, dim: int) -> "Isometry":
        return cls(np.array(m, dtype=complex), dim)

    @classmethod
    def identity(cls, dim: int) -> "Isometry":
        return cls(np.eye(2, dtype=complex), dim)

    @classmethod
    def translation(cls, direction, length: float, dim: int | None = None) -> "Isometry":
        """Hyperbolic translation by ``length`` along the diameter through ``direction``.

        The origin moves towards ``direction`` (the attracting fixed point).
        """
        u = boundary_point(direction)
        dim = dim or u.shape[0]
        s = np.exp(length / 2.0)
        along_en = cls(np.array([[1.0 / s, 0.0], [0.0, s]], dtype=complex), dim)
        en = np.zeros(dim)
        en[-1] = 1.0
        rot = cls.rotation(_rotation_taking(en, u))
        return rot @ along_en @ rot.inverse()

    @classmethod
    def rotation(cls, R) -> "Isometry":
        """Isometry fixing the origin that acts on the ball as the orthogonal matrix ``R``."""
        R = np.asarray(R, dtype=float)
        n = R.shape[0]
        if R.shape != (n, n) or n not in (2, 3):
            raise KleinlabError("rotation matrix must be 2x2 or 3x3")
        if not np.allclose(R @ R.T, np.eye(n), atol=1e-10) or np.linalg.det(R) < 0:
            raise KleinlabError("rotation must be a proper orthogonal matrix")
        if n == 2:
            angles = np.array([0.3, 1.9, 3.7, 5.1, 0.9])
            cand = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        else:
            cand = np.array(
                [[0.48, 0.6, 0.64], [-0.6, 0.64, 0.48], [0.64, -0.48, 0.6], [0.0, 0.6, -0.8], [0.8, 0.0, -0.6]]
            )
        src = sphere_to_plane(cand)
        dst = sphere_to_plane(cand @ R.T)
        ok = np.isfinite(src) & np.isfinite(dst) & (np.abs(src) < 1e6) & (np.abs(dst) < 1e6)
        idx = np.flatnonzero(ok)[:3]
        m = _three_point(src[idx], dst[idx])
        if n == 2:
            m = m.real.astype(complex) if np.max(np.abs(m.imag)) < 1e-9 * np.max(np.abs(m)) else m
            # three real points give a real matrix up to a common complex scale
            k = np.flatnonzero(np.abs(m.ravel()) > 0)[0]
            phase = m.ravel()[k] / abs(m.ravel()[k])
            m = (m / phase).real.astype(complex)
        return cls(m, n)

    @classmethod
    def from_json(cls, obj) -> "Isometry":
        if isinstance(obj, str):
            obj = json.loads(obj)
        m = np.array([[complex(*e) for e in row] for row in obj["matrix"]])
        return cls(m, int(obj["dim"]))

    # -- group structure --------------------------------------------------
    def compose(self, other: "Isometry") -> "Isometry":
        """``self o other`` (apply ``other`` first)."""
        if self.dim != other.dim:
            raise KleinlabError("cannot compose isometries of different dimensions")
        return Isometry(self.matrix @ other.matrix, self.dim)

    __matmul__ = compose

    def inverse(self) -> "Isometry":
        return Isometry(self.inverse_matrix.copy(), self.dim)

    def is_close(self, other: "Isometry", tol: float = 1e-9) -> bool:
        d = np.max(np.abs(self.matrix - other.matrix))
        d2 = np.max(np.abs(self.matrix + other.matrix))
        return min(d, d2) <= tol

    @property
    def trace(self) -> complex:
        return complex(self.matrix[0, 0] + self.matrix[1, 1])

    def kind(self, tol: float = 1e-9) -> str:
        """'identity', 'elliptic', 'parabolic' or 'loxodromic'."""
        tr = self.trace
        if np.max(np.abs(self.matrix - np.eye(2))) < tol:
            return "identity"
        if abs(tr.imag) < tol and abs(abs(tr.real) - 2.0) < tol:
            return "parabolic"
        if abs(tr.imag) < tol and abs(tr.real) < 2.0:
            return "elliptic"
        return "loxodromic"

    # -- action -------------------------------------------------------------
    def act(self, coords, omega):
        """Vectorized interior action on ``(coords, omega)`` arrays; returns the same pair."""
        z, t = ball_to_half(coords, omega)
        z, t = act_half(self.matrix, z, t)
        return half_to_ball(z, t, self.dim)

    def act_boundary(self, xi) -> np.ndarray:
        """Vectorized action on unit vectors (shape (k, n))."""
        z = sphere_to_plane(xi)
        return plane_to_sphere(act_plane(self.matrix, z), self.dim)

    def pole(self):
        """``g^{-1}(0)`` as ``(coords, omega)``."""
        z, t = act_half(self.inverse_matrix, np.array([0j]), np.array([1.0]))
        x, om = half_to_ball(z, t, self.dim)
        return x[0], float(om[0])

    def to_json(self) -> dict:
        return {
            "matrix": [[[float(e.real), float(e.imag)] for e in row] for row in self.matrix],
            "dim": self.dim,
        }

    def __repr__(self):
        entries = ", ".join(f"{e:.6g}" for e in self.matrix.ravel())
        return f"Isometry(dim={self.dim}, [{entries}])"


def _rotation_taking(u, v) -> np.ndarray:
    """A proper rotation R with ``R u = v`` for unit vectors ``u, v``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    n = u.shape[0]
    if n == 2:
        ang = np.arctan2(v[1], v[0]) - np.arctan2(u[1], u[0])
        c, s = np.cos(ang), np.sin(ang)
        return np.array([[c, -s], [s, c]])
    w = np.cross(u, v)
    s = np.linalg.norm(w)
    c = float(np.dot(u, v))
    if s < 1e-15:
        if c > 0:
            return np.eye(3)
        # half turn about any axis orthogonal to u
        axis = np.cross(u, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-8:
            axis = np.cross(u, [0.0, 1.0, 0.0])
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    k = w / s
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + s * K + (1 - c) * (K @ K)


def compose(g: Isometry, h: Isometry) -> Isometry:
    return g.compose(h)


def invert(g: Isometry) -> Isometry:
    return g.inverse()


# ---------------------------------------------------------------------------
# public point operations


def apply(g: Isometry, x) -> np.ndarray:
    """Image of the interior point ``x`` under ``g``."""
    x = ball_point(x)
    if x.shape[0] != g.dim:
        raise KleinlabError("point and isometry dimensions differ")
    y, om = g.act(x[None, :], [omega_of(x)])
    if 1.0 - np.linalg.norm(y[0]) < BOUNDARY_MARGIN:
        raise BoundaryProximityError("image lies within the boundary margin")
    return y[0]


def apply_boundary(g: Isometry, xi) -> np.ndarray:
    """Image of the boundary point ``xi`` under the boundary extension of ``g``."""
    xi = boundary_point(xi)
    return g.act_boundary(xi[None, :])[0]


def conformal_factor_interior(g: Isometry, x) -> float:
    """``|g'(x)| = (1 - |gx|^2) / (1 - |x|^2)`` at an interior point."""
    x = ball_point(x)
    om = omega_of(x)
    _, om_new = g.act(x[None, :], [om])
    return float(om_new[0] / om)


def plane_factors(m, z) -> np.ndarray:
    """Sphere derivative ``|g'|`` at boundary points given by plane values ``z``.

    ``m`` is a det-1 matrix or a stack of them.  In plane terms
    ``|g'(xi)| = (1 + |z|^2) / (|az + b|^2 + |cz + d|^2)``, with the limit
    ``1 / (|a|^2 + |c|^2)`` at ``z = inf``; both are sums of squares, so no
    cancellation occurs near the point at infinity.
    """
    m = np.asarray(m)
    a, b, c, d = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
    z = np.asarray(z, dtype=complex)
    inf = ~np.isfinite(z)
    zz = np.where(inf, 0.0, z)
    fin = (1.0 + np.abs(zz) ** 2) / (np.abs(a * zz + b) ** 2 + np.abs(c * zz + d) ** 2)
    at_inf = 1.0 / (np.abs(a) ** 2 + np.abs(c) ** 2)
    return np.where(inf, at_inf, fin)


def boundary_factors(g: Isometry, xi) -> np.ndarray:
    """Vectorized ``|g'(xi)|``, equal to ``(1 - |a|^2) / |xi - a|^2`` with ``a = g^{-1}(0)``."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    a, om_a = g.pole()
    sep2 = np.sum((xi - a) ** 2, axis=1)
    if np.any(sep2 < 1e-24):
        raise PoleError("boundary point coincides with the pole of the isometry")
    return plane_factors(g.matrix, sphere_to_plane(xi))


def conformal_factor_boundary(g: Isometry, xi) -> float:
    xi = boundary_point(xi)
    return float(boundary_factors(g, xi[None, :])[0])


def interior_factors(g: Isometry, coords, omega):
    """Images and conformal factors for a batch of interior points."""
    y, om_new = g.act(coords, omega)
    return y, om_new, om_new / np.asarray(omega, dtype=float)

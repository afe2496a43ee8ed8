"""Atomic conformal measures on orbits, their images and weak-limit diagnostics.

An atom is a location in the closed ball plus a mass.  Interior atoms carry
``omega = 1 - |x|^2`` (accurate even when ``|x|`` rounds to 1); boundary atoms
have ``omega = 0``.  Orbit measures weight ``w(y)`` by ``omega^alpha``, which
makes the conformality rule hold exactly, since at an interior point
``|g'(x)| = omega(gx) / omega(x)``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from . import geometry as geo
from .errors import BoundaryProximityError, EmptyMeasureError, KleinlabError
from .geometry import Isometry
from .groups import GroupSpec, OrbitTable, orbit

MERGE_TOL = 1e-10
# interior atoms closer than MERGE_TOL in the Euclidean metric are only merged
# when they are also hyperbolically close: deep orbit points can share
# coordinates to double precision and still be different points
MERGE_HYP = 1e-3
STATION_LIMIT = 1.0 - 1e-9


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    alpha: float
    coords: np.ndarray
    omega: np.ndarray
    mass: np.ndarray
    provenance: dict = field(default_factory=dict)
    tags: np.ndarray = None
    multiplicity: np.ndarray = None

    @classmethod
    def build(cls, alpha, coords, omega, mass, provenance=None, tags=None, merge=True):
        """Validate, merge coincident atoms and sort atoms canonically."""
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        omega = np.asarray(omega, dtype=float).reshape(-1)
        mass = np.asarray(mass, dtype=float).reshape(-1)
        k = coords.shape[0]
        if omega.shape[0] != k or mass.shape[0] != k:
            raise KleinlabError("coords, omega and mass must have the same length")
        if k == 0:
            raise EmptyMeasureError("a measure needs at least one atom")
        if coords.shape[1] not in (2, 3):
            raise KleinlabError("atoms must have 2 or 3 coordinates")
        if np.any(~np.isfinite(mass)) or np.any(mass <= 0):
            raise KleinlabError("atom masses must be positive and finite")
        if np.any(omega < 0) or np.any(omega > 1):
            raise KleinlabError("omega must lie in [0, 1]")
        tags = np.full(k, -1, dtype=np.int64) if tags is None else np.asarray(tags, dtype=np.int64)
        mult = np.ones(k, dtype=np.int64)
        if merge and k > 1:
            coords, omega, mass, tags, mult = _merge(coords, omega, mass, tags)
        order = np.lexsort([omega] + [coords[:, j] for j in range(coords.shape[1] - 1, -1, -1)])
        return cls(
            float(alpha),
            coords[order],
            omega[order],
            mass[order],
            dict(provenance or {}),
            tags[order],
            mult[order],
        )

    def __len__(self):
        return self.mass.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    @property
    def boundary(self) -> np.ndarray:
        return self.omega == 0.0

    def normalized(self) -> "AtomicMeasure":
        tot = total_mass(self)
        return AtomicMeasure(
            self.alpha,
            self.coords,
            self.omega,
            self.mass / tot,
            dict(self.provenance, normalized=True),
            self.tags,
            self.multiplicity,
        )

    def subset(self, keep) -> "AtomicMeasure":
        keep = np.asarray(keep)
        return AtomicMeasure(
            self.alpha,
            self.coords[keep],
            self.omega[keep],
            self.mass[keep],
            dict(self.provenance),
            self.tags[keep],
            self.multiplicity[keep],
        )

    def to_csv(self) -> str:
        """CSV with a ``#``-prefixed JSON header line."""
        buf = io.StringIO()
        header = {"alpha": self.alpha, "atoms": len(self), "provenance": self.provenance}
        buf.write("# " + json.dumps(header, sort_keys=True, default=_jsonable) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind"] + [f"x{i + 1}" for i in range(self.dim)] + ["mass", "omega"])
        kinds = np.where(self.boundary, "boundary", "interior")
        for i in range(len(self)):
            w.writerow(
                [kinds[i]]
                + [repr(float(v)) for v in self.coords[i]]
                + [repr(float(self.mass[i])), repr(float(self.omega[i]))]
            )
        return buf.getvalue()


def read_measure_csv(text: str) -> AtomicMeasure:
    """Inverse of :meth:`AtomicMeasure.to_csv` (atoms are merged and sorted again)."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise KleinlabError("measure CSV must start with a '#' JSON header")
    header = json.loads(lines[0][1:])
    rows = list(csv.reader(lines[1:]))
    cols = rows[0]
    n = sum(1 for c in cols if c.startswith("x"))
    data = np.array([[float(v) for v in r[1:]] for r in rows[1:] if r], dtype=float).reshape(-1, n + 2)
    omega = np.where(np.array([r[0] for r in rows[1:] if r]) == "boundary", 0.0, data[:, n + 1])
    return AtomicMeasure.build(header["alpha"], data[:, :n], omega, data[:, n], header.get("provenance", {}))


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return str(obj)


def _hyp_close(coords, omega, i, j):
    if i.size == 0:
        return np.zeros(0, dtype=bool)
    return geo.hyperbolic_distance(coords[i], coords[j], omega[i], omega[j]) <= MERGE_HYP


def _boundary_links(coords, idx):
    """Links between boundary atoms closer than MERGE_TOL."""
    # atoms sharing a grid cell of side MERGE_TOL / 4 are within MERGE_TOL of
    # each other; collapsing them first keeps dense clusters of deep images
    # from producing a quadratic number of pairs
    key = np.floor(coords[idx] / (MERGE_TOL / 4.0)).astype(np.int64)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    cell = idx[first[inv.reshape(-1)]]
    reps = idx[first]
    pairs = cKDTree(coords[reps]).query_pairs(MERGE_TOL, output_type="ndarray")
    return np.concatenate([idx, reps[pairs[:, 0]]]), np.concatenate([cell, reps[pairs[:, 1]]])


def _interior_links(coords, omega, idx):
    """Links between interior atoms within MERGE_TOL and MERGE_HYP of each other."""
    c, om = coords[idx], omega[idx]
    # identical coordinates: sort each group by omega and test neighbours
    _, first, inv = np.unique(c, axis=0, return_index=True, return_inverse=True)
    inv = inv.reshape(-1)
    o = np.lexsort([om, inv])
    same = inv[o[1:]] == inv[o[:-1]]
    a, b = o[:-1][same], o[1:][same]
    ok = _hyp_close(c, om, a, b)
    li, lj = [a[ok]], [b[ok]]
    # distinct coordinates: hyperbolically close points are within
    # sinh(d/2) e^{d/2} omega in the Euclidean metric
    rad = np.minimum(MERGE_TOL, 2.0 * np.sinh(MERGE_HYP / 2) * np.exp(MERGE_HYP / 2) * om[first])
    tree = cKDTree(c[first])
    hits = tree.query_ball_point(c[first], rad)
    cnt = np.fromiter((len(h) for h in hits), dtype=np.int64, count=len(hits))
    if cnt.sum() > len(hits):
        src = np.repeat(np.arange(len(hits)), cnt)
        dst = np.fromiter((q for h in hits for q in h), dtype=np.int64, count=int(cnt.sum()))
        keep = dst > src
        a, b = first[src[keep]], first[dst[keep]]
        ok = _hyp_close(c, om, a, b)
        li.append(a[ok])
        lj.append(b[ok])
    return idx[np.concatenate(li)], idx[np.concatenate(lj)]


def _merge(coords, omega, mass, tags):
    k = coords.shape[0]
    bnd = np.flatnonzero(omega == 0)
    inn = np.flatnonzero(omega > 0)
    li, lj = [np.zeros(0, dtype=np.int64)], [np.zeros(0, dtype=np.int64)]
    if bnd.size:
        a, b = _boundary_links(coords, bnd)
        li.append(a)
        lj.append(b)
    if inn.size:
        a, b = _interior_links(coords, omega, inn)
        li.append(a)
        lj.append(b)
    i, j = np.concatenate(li), np.concatenate(lj)
    real = i != j
    if not real.any():
        return coords, omega, mass, tags, np.ones(k, dtype=np.int64)
    i, j = i[real], j[real]
    graph = coo_matrix((np.ones(i.size), (i, j)), shape=(k, k))
    n, label = connected_components(graph, directed=False)
    # representative: first atom of each component in input order
    first = np.full(n, k, dtype=np.int64)
    np.minimum.at(first, label, np.arange(k))
    summed = np.bincount(label, weights=mass, minlength=n)
    mult = np.bincount(label, minlength=n)
    return coords[first], omega[first], summed, tags[first], mult


# ---------------------------------------------------------------------------
# constructors


def orbit_measure(table: OrbitTable, alpha: float, normalize: bool = True) -> AtomicMeasure:
    """Atoms at the orbit points with mass ``(1 - |w y|^2)^alpha``."""
    if alpha <= 0:
        raise KleinlabError("alpha must be positive")
    mass = table.omega**alpha
    keep = mass > 0
    prov = {
        "group": table.spec_name,
        "N": int(table.N),
        "basepoint": [float(v) for v in table.basepoint],
        "construction": "orbit",
        "underflow_dropped": int(np.count_nonzero(~keep)),
    }
    m = AtomicMeasure.build(alpha, table.coords[keep], table.omega[keep], mass[keep], prov, table.lengths[keep])
    return m.normalized() if normalize else m


def point_mass(x, alpha: float, mass: float = 1.0, boundary: bool | None = None) -> AtomicMeasure:
    """A single atom; ``boundary`` defaults to ``|x| == 1`` within 1e-12."""
    x = np.asarray(x, dtype=float)
    on_sphere = abs(np.linalg.norm(x) - 1.0) <= 1e-12 if boundary is None else boundary
    if on_sphere:
        x = geo.boundary_point(x)
        om = 0.0
    else:
        x = geo.ball_point(x)
        om = float(geo.omega_of(x))
    return AtomicMeasure.build(alpha, x[None, :], [om], [mass], {"construction": "point"})


def total_mass(m: AtomicMeasure) -> float:
    return math.fsum(m.mass)


def restrict(m: AtomicMeasure, predicate) -> AtomicMeasure:
    """Keep the atoms whose location satisfies ``predicate(coords, omega)``."""
    keep = np.asarray(predicate(m.coords, m.omega), dtype=bool)
    if keep.shape != (len(m),):
        raise KleinlabError("predicate must return one boolean per atom")
    if not keep.any():
        raise EmptyMeasureError("restriction has no atoms (total mass would be 0)")
    out = m.subset(keep)
    out.provenance["restricted"] = True
    return out


# ---------------------------------------------------------------------------
# images and conformality


def image_atoms(m: AtomicMeasure, g: Isometry):
    """Images of every atom under ``g`` in input order: ``(coords, omega, mass)``.

    Interior atoms use ``omega(gx)/omega(x)``, boundary atoms the pole formula.
    """
    if g.dim != m.dim:
        raise KleinlabError("isometry and measure dimensions differ")
    coords = np.empty_like(m.coords)
    omega = np.zeros_like(m.omega)
    factor = np.empty_like(m.mass)
    b = m.boundary
    if (~b).any():
        y, om, f = geo.interior_factors(g, m.coords[~b], m.omega[~b])
        coords[~b], omega[~b], factor[~b] = y, om, f
    if b.any():
        factor[b] = geo.boundary_factors(g, m.coords[b])
        coords[b] = g.act_boundary(m.coords[b])
    return coords, omega, m.mass * factor**m.alpha


def image_measure(m: AtomicMeasure, g: Isometry) -> AtomicMeasure:
    """The image measure ``m_g``: atom ``(x, p)`` goes to ``(gx, p |g'(x)|^alpha)``."""
    coords, omega, mass = image_atoms(m, g)
    keep = mass > 0
    prov = dict(m.provenance, image_of=True)
    return AtomicMeasure.build(m.alpha, coords[keep], omega[keep], mass[keep], prov, m.tags[keep])


def cocycle_residual(m: AtomicMeasure, g1: Isometry, g2: Isometry) -> dict:
    """Atomwise comparison of ``m_{g1 g2}`` with ``(m_{g2})_{g1}``.

    Both sides keep the input atom order, so no matching is involved.
    """
    c1, o1, w1 = image_atoms(m, g1 @ g2)
    c2, o2, w2 = image_atoms(m, g2)
    inner = AtomicMeasure(m.alpha, c2, o2, w2, {}, m.tags, m.multiplicity)
    c3, o3, w3 = image_atoms(inner, g1)
    scale = np.maximum(w1, w3)
    live = scale > 0
    rel = np.abs(w1 - w3)[live] / scale[live]
    return {
        "max_mass_rel": float(rel.max()) if rel.size else 0.0,
        "max_coord_diff": float(np.max(np.linalg.norm(c1 - c3, axis=1))),
        "underflow": int(np.count_nonzero(~live)),
    }


def match_atoms(m: AtomicMeasure, coords, omega, tol: float = 1e-9, hyp_tol: float = 0.1) -> np.ndarray:
    """Index of the atom of ``m`` at each query location, or -1.

    A query matches when the nearest candidate (Euclidean within ``tol``,
    then hyperbolic for interior atoms) is unambiguous: the runner-up is at
    least ten times farther.  Merged atoms never match.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    omega = np.asarray(omega, dtype=float)
    k = min(8, len(m))
    dist, idx = cKDTree(m.coords).query(coords, k=k, distance_upper_bound=tol)
    dist, idx = dist.reshape(len(coords), k), idx.reshape(len(coords), k)
    valid = np.isfinite(dist)
    idx = np.where(valid, idx, 0)
    qb = omega == 0
    valid &= (m.omega[idx] == 0) == qb[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        dh = geo.hyperbolic_distance(m.coords[idx], coords[:, None, :], m.omega[idx], omega[:, None])
    metric = np.where(qb[:, None], dist, dh)
    metric = np.where(valid, metric, np.inf)
    o = np.argsort(metric, axis=1, kind="stable")
    best = np.take_along_axis(metric, o[:, :1], axis=1)[:, 0]
    second = np.take_along_axis(metric, o[:, 1:2], axis=1)[:, 0] if k > 1 else np.full(len(coords), np.inf)
    j = np.take_along_axis(idx, o[:, :1], axis=1)[:, 0]
    ok = best <= np.where(qb, tol, hyp_tol)
    ok &= second > 10 * best
    ok &= m.multiplicity[j] == 1
    return np.where(ok, j, -1)


@dataclass
class ResidualReport:
    max_residual: float
    n_atoms: int
    n_tested: int
    testable_fraction: float
    testable_mass_fraction: float
    worst_atom: int
    tested: np.ndarray = field(default=None, repr=False)

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d.pop("tested")
        return d


def conformality_residual(m: AtomicMeasure, g: Isometry, tol: float = 1e-9) -> ResidualReport:
    """Worst relative violation of ``m({gx}) = |g'(x)|^alpha m({x})``.

    Only atoms whose image is itself an (unmerged) atom are testable; the
    rest are counted in ``testable_fraction``.
    """
    coords, omega, pushed = image_atoms(m, g)
    j = match_atoms(m, coords, omega, tol)
    ok = (j >= 0) & (m.multiplicity == 1)
    if not ok.any():
        return ResidualReport(0.0, len(m), 0, 0.0, 0.0, -1, ok)
    target = m.mass[j[ok]]
    res = np.abs(target - pushed[ok]) / target
    w = int(np.argmax(res))
    return ResidualReport(
        float(res[w]),
        len(m),
        int(ok.sum()),
        float(ok.mean()),
        math.fsum(m.mass[ok]) / total_mass(m),
        int(np.flatnonzero(ok)[w]),
        ok,
    )


def generator_residuals(m: AtomicMeasure, spec: GroupSpec, tol: float = 1e-9) -> dict:
    """Residuals for every generator and inverse, plus the joint testable fraction.

    An atom counts as testable jointly when at least one letter maps it onto
    another atom.
    """
    per = {}
    tested = np.zeros(len(m), dtype=bool)
    worst = 0.0
    for name, g in spec.generators.items():
        for label, h in ((name, g), (name + "^-1", g.inverse())):
            rep = conformality_residual(m, h, tol)
            per[label] = rep.to_json()
            tested |= rep.tested
            worst = max(worst, rep.max_residual)
    return {
        "max_residual": worst,
        "testable_fraction": float(tested.mean()),
        "testable_mass_fraction": math.fsum(m.mass[tested]) / total_mass(m),
        "per_letter": per,
    }


def compare_atomwise(coords1, mass1, coords2, mass2, tol: float = 1e-9):
    """Max relative mass error between two atom lists given in the same order."""
    coords1, coords2 = np.asarray(coords1), np.asarray(coords2)
    loc = float(np.max(np.linalg.norm(coords1 - coords2, axis=1))) if len(coords1) else 0.0
    rel = np.abs(np.asarray(mass1) - np.asarray(mass2)) / np.maximum(np.asarray(mass2), 1e-300)
    return float(rel.max()) if rel.size else 0.0, loc


# ---------------------------------------------------------------------------
# caps


@dataclass(frozen=True)
class Cap:
    """Spherical cap ``{xi : angle(xi, axis) <= angle}``.

    With ``cone=True`` interior atoms count too, by the direction of the ray
    from the origin (the origin itself only lies in a full cone).
    """

    axis: np.ndarray
    angle: float
    cone: bool = False

    def contains(self, coords, omega) -> np.ndarray:
        return cone_mask(coords, omega, self.axis, self.angle, self.cone)


def _directions(coords):
    r = np.linalg.norm(coords, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = coords / r[:, None]
    return u, r


def angle_to(u, axis) -> np.ndarray:
    """Angle between unit vectors, accurate for small angles."""
    return 2.0 * np.arcsin(np.clip(np.linalg.norm(u - axis, axis=-1) / 2.0, 0.0, 1.0))


def cone_mask(coords, omega, axis, angle, cone=True) -> np.ndarray:
    coords = np.atleast_2d(coords)
    omega = np.asarray(omega)
    u, r = _directions(coords)
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    ins = angle_to(u, axis) <= angle
    ins = np.where(r == 0, angle >= np.pi, ins)
    if not cone:
        ins &= omega == 0
    return ins


def cap_mass(m: AtomicMeasure, cap) -> float:
    """Mass of the atoms inside ``cap`` (anything with ``contains(coords, omega)``)."""
    return math.fsum(m.mass[cap.contains(m.coords, m.omega)])


@dataclass
class CapFamily:
    """Many cone caps at once; used for union masses over large families."""

    axes: np.ndarray
    angles: np.ndarray
    cone: bool = True

    def contains(self, coords, omega) -> np.ndarray:
        """Atoms lying in at least one cap of the family (``axes`` are unit rows)."""
        coords = np.atleast_2d(coords)
        u, r = _directions(coords)
        inside = np.zeros(coords.shape[0], dtype=bool)
        full = self.angles >= np.pi
        if full.any():
            inside[:] = True
            if not self.cone:
                inside &= np.asarray(omega) == 0
            return inside
        live = np.isfinite(u[:, 0])
        if not self.cone:
            live &= np.asarray(omega) == 0
        idx = np.flatnonzero(live)
        if idx.size == 0 or len(self.angles) == 0:
            return inside
        chords = 2.0 * np.sin(np.minimum(self.angles, np.pi) / 2.0) * (1 + 1e-12) + 1e-15
        # buckets of caps within a factor 2 in size, largest first; covered atoms drop out
        scale = np.floor(np.log2(chords)).astype(np.int64)
        for b in np.unique(scale)[::-1]:
            if idx.size == 0:
                break
            caps = np.flatnonzero(scale == b)
            tree = cKDTree(self.axes[caps])
            hits = tree.query_ball_point(u[idx], chords[caps].max())
            pa = np.repeat(np.arange(idx.size), [len(h) for h in hits])
            if pa.size == 0:
                continue
            pc = caps[np.concatenate([np.asarray(h, dtype=np.int64) for h in hits if h])]
            ok = np.linalg.norm(u[idx[pa]] - self.axes[pc], axis=1) <= chords[pc]
            ok &= angle_to(u[idx[pa]], self.axes[pc]) <= self.angles[pc]
            got = np.unique(pa[ok])
            inside[idx[got]] = True
            idx = np.delete(idx, got)
        return inside


def default_caps(ray, dim: int):
    """Cone caps about the ray direction and its antipode at a few radii."""
    ray = geo.boundary_point(ray)
    caps = []
    for ang in (np.pi / 32, np.pi / 16, np.pi / 8, np.pi / 4, np.pi / 2):
        caps.append(Cap(ray, ang, cone=True))
    for ang in (np.pi / 8, np.pi / 2):
        caps.append(Cap(-ray, ang, cone=True))
    return caps


# ---------------------------------------------------------------------------
# bounded-Lipschitz discrepancy


def _project(m: AtomicMeasure):
    """Radial projection to the sphere and its transport cost."""
    u, r = _directions(m.coords)
    zero = r == 0
    if zero.any():
        e = np.zeros(m.dim)
        e[0] = 1.0
        u[zero] = e
    gap = np.where(m.boundary, 0.0, m.omega / (1.0 + np.minimum(r, 1.0)))
    return u, math.fsum(m.mass * gap)


def _circle_w1(u1, p1, u2, p2) -> float:
    th = np.concatenate([np.arctan2(u1[:, 1], u1[:, 0]), np.arctan2(u2[:, 1], u2[:, 0])])
    w = np.concatenate([p1, -p2])
    o = np.argsort(th, kind="stable")
    th, F = th[o], np.cumsum(w[o])
    gaps = np.diff(np.append(th, th[0] + 2 * np.pi))
    # min over c of sum gaps |F - c|: c is a gaps-weighted median of F
    so = np.argsort(F, kind="stable")
    cw = np.cumsum(gaps[so])
    c = F[so][min(np.searchsorted(cw, cw[-1] / 2.0), len(so) - 1)]
    return float(np.sum(gaps * np.abs(F - c)))


def _fibonacci_sphere(k: int) -> np.ndarray:
    i = np.arange(k) + 0.5
    z = 1 - 2 * i / k
    phi = np.pi * (1 + 5**0.5) * i
    s = np.sqrt(1 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def _sphere_w1(u1, p1, u2, p2, cells: int) -> float:
    centers = _fibonacci_sphere(cells)
    tree = cKDTree(centers)
    d1, c1 = tree.query(u1)
    d2, c2 = tree.query(u2)
    snap = float(np.dot(p1, d1) + np.dot(p2, d2))
    a = np.bincount(c1, weights=p1, minlength=cells)
    b = np.bincount(c2, weights=p2, minlength=cells)
    net = a - b
    src, dst = np.flatnonzero(net > 0), np.flatnonzero(net < 0)
    if src.size == 0 or dst.size == 0:
        return snap
    cost = np.arccos(np.clip(centers[src] @ centers[dst].T, -1, 1))
    ns, nd = src.size, dst.size
    A_eq = np.zeros((ns + nd, ns * nd))
    for i in range(ns):
        A_eq[i, i * nd : (i + 1) * nd] = 1
    for j in range(nd):
        A_eq[ns + j, j::nd] = 1
    b_eq = np.concatenate([net[src], -net[dst]])
    b_eq[ns:] *= b_eq[:ns].sum() / b_eq[ns:].sum()
    res = linprog(cost.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    return snap + float(res.fun)


def bl_discrepancy(m1: AtomicMeasure, m2: AtomicMeasure, cells: int = 192) -> float:
    """Upper bound on the bounded-Lipschitz distance between two measures.

    Transport bound: push both measures radially to the sphere, then move
    mass along the sphere (exact on the circle, a cell-quantized linear
    program on the 2-sphere).  Unequal total masses add their difference.
    """
    if m1.dim != m2.dim:
        raise KleinlabError("measures live in different dimensions")
    t1, t2 = total_mass(m1), total_mass(m2)
    scale = t1 / t2
    u1, c1 = _project(m1)
    u2, c2 = _project(m2)
    p1, p2 = m1.mass, m2.mass * scale
    if m1.dim == 2:
        w = _circle_w1(u1, p1, u2, p2)
    else:
        w = _sphere_w1(u1, p1, u2, p2, cells)
    return c1 + c2 * scale + w + abs(t1 - t2)


# ---------------------------------------------------------------------------
# weak-limit runs


@dataclass
class WeakLimitRun:
    stations: list
    measures: list
    caps: list
    cap_masses: np.ndarray
    bl: list

    def report(self) -> dict:
        return {
            "stations": [float(s) for s in self.stations],
            "cap_masses": self.cap_masses.tolist(),
            "caps": [_cap_json(c) for c in self.caps],
            "bl_consecutive": [float(b) for b in self.bl],
            "atoms": [len(m) for m in self.measures],
        }


def _cap_json(c) -> dict:
    if isinstance(c, CapFamily):
        return {"family": len(c.angles), "max_angle": float(np.max(c.angles, initial=0.0)), "cone": bool(c.cone)}
    return {"axis": c.axis.tolist(), "angle": float(c.angle), "cone": bool(c.cone)}


def weak_limit_run(
    spec: GroupSpec, ray, stations, alpha: float, N: int, caps=None, workers: int = 1
) -> WeakLimitRun:
    """Normalized orbit measures with basepoints ``station * ray``.

    Diagnostics: masses of a fixed cap family at every station and the
    bounded-Lipschitz bound between consecutive stations.
    """
    ray = geo.boundary_point(ray)
    stations = [float(s) for s in stations]
    if not stations:
        raise KleinlabError("at least one station is needed")
    if any(b <= a for a, b in zip(stations, stations[1:])) or stations[0] < 0:
        raise KleinlabError("stations must be nonnegative and strictly increasing")
    if stations[-1] > STATION_LIMIT:
        raise BoundaryProximityError(f"station {stations[-1]!r} exceeds 1 - 1e-9")
    caps = default_caps(ray, spec.dim) if caps is None else list(caps)
    measures, masses = [], []
    for s in stations:
        table = orbit(spec, s * ray, N, workers=workers)
        m = orbit_measure(table, alpha, normalize=True)
        m.provenance["station"] = s
        measures.append(m)
        masses.append([cap_mass(m, c) for c in caps])
    bl = [bl_discrepancy(a, b) for a, b in zip(measures, measures[1:])]
    return WeakLimitRun(stations, measures, caps, np.array(masses), bl)

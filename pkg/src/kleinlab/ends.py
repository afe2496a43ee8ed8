"""End regions (horoballs and geodesic half-spaces) and their group translates.

A horoball with base ``u`` and Euclidean diameter ``D`` is
``{x : (2 - D) x.u - |x|^2 - 1 + D > 0}``.  A half-space is the side of a
geodesic hyperplane that contains the cap ``{xi : xi.e > cos(theta)}``, i.e.
``{x : x.e - cos(theta) (1 + |x|^2) / 2 > 0}``.  Both expressions are
positive exactly inside, which makes translated copies cheap to test.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo
from .errors import EndsOverlapError, KleinlabError
from .groups import GroupSpec, word_matrices
from .words import Word

KINDS = ("horoball", "halfspace")
MIN_SIZE = 1e-13  # diameters / cap angles below this are not resolvable


@dataclass
class Regions:
    """A batch of regions of one kind: translates of an end, or the end itself.

    ``centers`` holds horoball bases or half-space cap centres; ``sizes``
    holds diameters ``D`` or cap angles ``theta``.
    """

    kind: str
    centers: np.ndarray
    sizes: np.ndarray
    skipped: int = 0

    def __len__(self):
        return self.sizes.shape[0]

    def values(self, coords, omega=None, which=None) -> np.ndarray:
        """Signed membership function (positive inside) of every point in region ``which``.

        ``which`` is an index array aligned with the points (one region per
        point); by default region 0 is used for all points.
        """
        coords = np.atleast_2d(coords)
        which = np.zeros(coords.shape[0], dtype=np.int64) if which is None else np.asarray(which)
        c, s = self.centers[which], self.sizes[which]
        om = geo.omega_of(coords) if omega is None else np.asarray(omega, dtype=float)
        if self.kind == "horoball":
            # (2 - D) x.u - |x|^2 - 1 + D rewritten with x.u - 1 = -(omega + |x - u|^2) / 2
            sep2 = np.sum((coords - c) ** 2, axis=1)
            return (s * om - (2.0 - s) * sep2) / 2.0
        # x.e - cos(theta) (2 - omega) / 2 rewritten the same way
        sep2 = np.sum((coords - c) ** 2, axis=1)
        return np.sin(s / 2.0) ** 2 * (2.0 - om) - sep2 / 2.0

    def boundary_distance(self, coords, omega, which) -> np.ndarray:
        """Hyperbolic distance from interior points to the region boundary (positive inside)."""
        coords = np.atleast_2d(coords)
        omega = np.asarray(omega, dtype=float)
        c, s = self.centers[which], self.sizes[which]
        if self.kind == "horoball":
            sep2 = np.sum((coords - c) ** 2, axis=1)
            return np.log(s * omega / ((2.0 - s) * sep2))
        f = self.values(coords, omega, which)
        return np.arcsinh(2.0 * f / (np.sin(s) * omega))

    def bounding_balls(self):
        """Euclidean balls ``(center, radius)`` containing each region's part of the closed ball.

        A horoball is its own Euclidean ball; a half-space lies inside the
        circle orthogonal to the sphere along the cap rim, centred at
        ``e / cos(theta)`` with radius ``tan(theta)``.
        """
        if self.kind == "horoball":
            return self.centers * (1.0 - self.sizes / 2.0)[:, None], self.sizes / 2.0
        th = self.sizes
        return self.centers / np.cos(th)[:, None], np.tan(th) * (1.0 + 1e-9) + 1e-15

    def locate(
        self, coords, omega, closed_tol: float = 1e-9, chunk: int = 4096, min_size: float = MIN_SIZE
    ) -> np.ndarray:
        """Index of the first region containing each point, or -1.

        Interior points must lie strictly inside.  Boundary points count when
        they lie in the region's closure at infinity: the base of a horoball
        (within ``closed_tol``) or the closed cap of a half-space.  Regions are
        scanned in order, in chunks, and located points leave the search.
        """
        coords = np.atleast_2d(coords)
        omega = np.asarray(omega, dtype=float)
        out = np.full(coords.shape[0], -1, dtype=np.int64)
        if len(self) == 0 or coords.shape[0] == 0:
            return out
        centers, radii = self.bounding_balls()
        # smaller regions cannot be told apart from their neighbours in double
        # precision; skipping them avoids scanning dense clusters of deep points
        live = self.sizes >= min_size
        self.skipped = int(np.count_nonzero(~live))
        bnd = omega == 0
        # chunks grow from a single region so that the large early regions
        # claim their points before the many small ones are searched
        lo, step = 0, 1
        while lo < len(self):
            hi = min(lo + step, len(self))
            lo_next, step = hi, min(2 * step, chunk)
            regs = np.arange(lo, hi)[live[lo:hi]]
            for mask, tol in ((~bnd, 0.0), (bnd, closed_tol)):
                idx = np.flatnonzero(mask & (out < 0))
                if idx.size == 0 or regs.size == 0:
                    continue
                rad = radii[regs]
                if tol > 0 and self.kind == "horoball":
                    rad = np.maximum(rad, tol)
                hits = cKDTree(coords[idx]).query_ball_point(centers[regs], rad)
                cnt = np.fromiter((len(h) for h in hits), dtype=np.int64, count=len(hits))
                if cnt.sum() == 0:
                    continue
                reg = np.repeat(regs, cnt)
                pts = idx[np.fromiter((q for h in hits for q in h), dtype=np.int64, count=int(cnt.sum()))]
                ok = self._member(coords[pts], omega[pts], reg, closed_tol)
                reg, pts = reg[ok], pts[ok]
                # first region in order wins
                order = np.lexsort([reg, pts])
                reg, pts = reg[order], pts[order]
                first = np.ones(pts.size, dtype=bool)
                first[1:] = pts[1:] != pts[:-1]
                out[pts[first]] = reg[first]
            lo = lo_next
        return out

    def _member(self, coords, omega, which, closed_tol):
        bnd = omega == 0
        inside = np.zeros(coords.shape[0], dtype=bool)
        if (~bnd).any():
            inside[~bnd] = self.values(coords[~bnd], omega[~bnd], which[~bnd]) > 0
        if bnd.any():
            c, s = self.centers[which[bnd]], self.sizes[which[bnd]]
            if self.kind == "horoball":
                inside[bnd] = np.linalg.norm(coords[bnd] - c, axis=1) <= closed_tol
            else:
                chord = np.linalg.norm(coords[bnd] - c, axis=1)
                inside[bnd] = chord <= 2.0 * np.sin(s / 2.0) * (1.0 + 1e-12)
        return inside


@dataclass
class EndSpec:
    """One declared end: a region of the ball plus the words generating its stabilizer.

    Horoball parameters: ``base`` (unit vector) and ``diameter``.  Half-space
    parameters: ``axis`` (unit vector, centre of the boundary cap) and
    ``angle`` (the cap's angular radius).  ``flags`` carries user assertions
    such as ``bounded`` and ``expected_type``.
    """

    name: str
    kind: str
    params: dict
    stabilizer: list
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise KleinlabError(f"end kind must be one of {KINDS}")
        p = dict(self.params)
        if self.kind == "horoball":
            p["base"] = geo.boundary_point(p["base"])
            p["diameter"] = float(p["diameter"])
            if not 0 < p["diameter"] < 1:
                raise KleinlabError("horoball diameter must be in (0, 1) so the origin stays outside")
        else:
            p["axis"] = geo.boundary_point(p["axis"])
            p["angle"] = float(p["angle"])
            if not 0 < p["angle"] < np.pi / 2:
                raise KleinlabError("half-space angle must be in (0, pi/2) so the origin stays outside")
        self.params = p
        self.stabilizer = [str(w) for w in self.stabilizer]

    @property
    def dim(self) -> int:
        return (self.params["base"] if self.kind == "horoball" else self.params["axis"]).shape[0]

    @property
    def center(self) -> np.ndarray:
        return self.params["base"] if self.kind == "horoball" else self.params["axis"]

    @property
    def size(self) -> float:
        return self.params["diameter"] if self.kind == "horoball" else self.params["angle"]

    def region(self) -> Regions:
        return Regions(self.kind, self.center[None, :], np.array([self.size]))

    def contains(self, coords, omega) -> np.ndarray:
        return self.region().locate(coords, omega) == 0

    def nearest_point(self) -> np.ndarray:
        """The point of the region's closure closest to the origin."""
        if self.kind == "horoball":
            return (1.0 - self.size) * self.center
        th = self.size
        return (1.0 - np.sin(th)) / np.cos(th) * self.center

    def stabilizer_words(self, spec: GroupSpec):
        return [spec.parse(w) for w in self.stabilizer]

    def sample(self, k: int = 256, seed: int = 0):
        """Deterministic sample of interior points of the region as ``(coords, omega)``."""
        rng = np.random.default_rng(seed)
        n = self.dim
        centers, radii = self.region().bounding_balls()
        pts = []
        while sum(len(p) for p in pts) < k:
            d = rng.normal(size=(4 * k, n))
            d /= np.linalg.norm(d, axis=1, keepdims=True)
            r = radii[0] * rng.random(4 * k) ** (1.0 / n)
            x = centers[0] + d * r[:, None]
            x = x[np.sum(x * x, axis=1) < 1.0 - 1e-6]
            om = 1.0 - np.sum(x * x, axis=1)
            x = x[self.region().values(x, om) > 0]
            pts.append(x)
        x = np.concatenate(pts)[:k]
        return x, 1.0 - np.sum(x * x, axis=1)

    def validate(self, spec: GroupSpec, tol: float = 1e-9, k: int = 256):
        """Check that every stabilizer word (and inverse) maps sample points back into the region."""
        if spec.dim != self.dim:
            raise KleinlabError("end and group dimensions differ")
        x, om = self.sample(k)
        reg = self.region()
        for w in self.stabilizer_words(spec):
            for word in (w, w.inverse()):
                g = spec.element(word)
                y, om2 = g.act(x, om)
                if np.any(reg.values(y, om2) < -tol):
                    raise KleinlabError(f"stabilizer word {spec.format(word)!r} does not preserve end {self.name!r}")

    def translates(self, spec: GroupSpec, words, lengths) -> Regions:
        """Images of the region under the words (padded rows), in the given order."""
        mats = word_matrices(spec, words, lengths)
        return translate_regions(self.region(), mats, spec.dim)

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        p = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.params.items()}
        return {"name": self.name, "kind": self.kind, **p, "stabilizer": list(self.stabilizer), "flags": dict(self.flags)}

    @classmethod
    def from_json(cls, obj) -> "EndSpec":
        obj = dict(obj)
        kind = obj.pop("kind")
        name = obj.pop("name", kind)
        stab = obj.pop("stabilizer", [])
        flags = obj.pop("flags", {})
        keys = ("base", "diameter") if kind == "horoball" else ("axis", "angle")
        missing = [k for k in keys if k not in obj]
        if missing:
            raise KleinlabError(f"{kind} end is missing {missing}")
        return cls(name, kind, {k: obj[k] for k in keys}, stab, flags)


def translate_regions(base: Regions, mats: np.ndarray, dim: int) -> Regions:
    """Images of a single region under a stack of matrices."""
    c, s = base.centers[0], float(base.sizes[0])
    if base.kind == "horoball":
        zu = geo.sphere_to_plane(c[None, :])[0]
        u = geo.plane_to_sphere(geo.act_plane(mats, zu), dim)
        f = geo.plane_factors(mats, zu)
        D = 2.0 * s * f / (s * f + 2.0 - s)
        return Regions("horoball", u, D)
    rim = _cap_rim(c, s)
    zr = geo.sphere_to_plane(rim)
    imgs = np.stack([geo.plane_to_sphere(geo.act_plane(mats, z), dim) for z in zr], axis=1)
    inner = geo.plane_to_sphere(geo.act_plane(mats, geo.sphere_to_plane(c[None, :])[0]), dim)
    if dim == 2:
        e = imgs[:, 0] + imgs[:, 1]
        norm = np.linalg.norm(e, axis=1)
        perp = np.stack([-imgs[:, 0, 1], imgs[:, 0, 0]], axis=1)
        e = np.where(norm[:, None] > 1e-12, e / np.maximum(norm, 1e-300)[:, None], perp)
    else:
        e = np.cross(imgs[:, 1] - imgs[:, 0], imgs[:, 2] - imgs[:, 0])
        e /= np.linalg.norm(e, axis=1, keepdims=True)
    # the image of the cap centre decides the side; compare chords, not dot products
    flip = np.linalg.norm(inner - e, axis=1) > np.linalg.norm(imgs[:, 0] - e, axis=1)
    e = np.where(flip[:, None], -e, e)
    theta = 2.0 * np.arcsin(np.clip(np.linalg.norm(imgs[:, 0] - e, axis=1) / 2.0, 0.0, 1.0))
    # caps too small to resolve from their rim: first-order size about the centre image
    tiny = np.linalg.norm(imgs[:, 1] - imgs[:, 0], axis=1) < 1e-7
    if tiny.any():
        f = geo.plane_factors(mats[tiny], geo.sphere_to_plane(c[None, :])[0])
        e[tiny] = inner[tiny]
        theta[tiny] = f * s
    return Regions("halfspace", e, theta)


def _cap_rim(e, theta):
    """Points on the boundary circle of the cap (2 in dimension 2, 3 in dimension 3)."""
    n = e.shape[0]
    if n == 2:
        rot = lambda a: np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
        return np.stack([rot(theta) @ e, rot(-theta) @ e])
    a = np.cross(e, [1.0, 0.0, 0.0])
    if np.linalg.norm(a) < 1e-6:
        a = np.cross(e, [0.0, 1.0, 0.0])
    a /= np.linalg.norm(a)
    b = np.cross(e, a)
    out = []
    for phi in (0.0, 2 * np.pi / 3, 4 * np.pi / 3):
        d = np.cos(phi) * a + np.sin(phi) * b
        out.append(np.cos(theta) * e + np.sin(theta) * d)
    return np.stack(out)


@dataclass
class EndCollection:
    ends: list
    complete: bool = False

    def __iter__(self):
        return iter(self.ends)

    def __len__(self):
        return len(self.ends)

    def __getitem__(self, key):
        if isinstance(key, str):
            for e in self.ends:
                if e.name == key:
                    return e
            raise KeyError(key)
        return self.ends[key]

    def names(self):
        return [e.name for e in self.ends]

    def check_disjoint(self, k: int = 2000, tol: float = 1e-9):
        """Sample each declared region and make sure no point lies inside another one."""
        for i, a in enumerate(self.ends):
            x, om = a.sample(k, seed=i)
            for j, b in enumerate(self.ends):
                if i == j:
                    continue
                v = b.region().values(x, om)
                if np.any(v > tol):
                    raise EndsOverlapError(f"ends {a.name!r} and {b.name!r} overlap")

    def to_json(self) -> dict:
        return {"ends": [e.to_json() for e in self.ends], "complete": self.complete}

    @classmethod
    def from_json(cls, obj) -> "EndCollection":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if isinstance(obj, list):
            obj = {"ends": obj}
        return cls([EndSpec.from_json(e) for e in obj["ends"]], bool(obj.get("complete", False)))

    @classmethod
    def load(cls, path) -> "EndCollection":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def check_fixed(spec: GroupSpec, v, words, tol: float = 1e-10):
    """Raise unless every word fixes the boundary point ``v``."""
    from .errors import NotFixedError

    v = geo.boundary_point(v)
    for w in words:
        g = spec.element(Word(w))
        img = g.act_boundary(v[None, :])[0]
        if np.linalg.norm(img - v) > tol:
            raise NotFixedError(f"word {spec.format(w)!r} does not fix {v.tolist()}")

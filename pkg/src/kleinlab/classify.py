"""Heuristic classification of boundary points by walking the geodesic ray from 0.

* conical-like: orbit points of the basepoint come within ``rho`` of the ray
  at least ``min_returns`` times over the second half ``[T/2, T]``;
* endpoint-like(E): checkpoints on the second half all lie in one translate
  of the end region and their distance to its boundary strictly increases;
* ordinary-like: no returns and the point is at least ``margin`` (radians)
  away from a sample of the limit set;
* undetermined otherwise.

Verdicts come from finite data and never certify anything.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo
from .ends import EndCollection
from .groups import GroupSpec, cosets, limit_set_sample, orbit

DEPTH = 25.0
RHO = 0.5
STEP = 0.5
MIN_RETURNS = 5
MIN_CHECKPOINTS = 5
MARGIN = 0.02


@dataclass
class Classification:
    point: list
    verdict: str
    end: str | None
    returns: int
    end_flags: dict
    limit_angle: float
    trace: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return dict(self.__dict__)


class BoundaryClassifier:
    """Caches the orbit table, end translates and limit-set sample for repeated queries."""

    def __init__(
        self,
        spec: GroupSpec,
        ends: EndCollection | None = None,
        T: float = DEPTH,
        rho: float = RHO,
        N: int = 10,
        step: float = STEP,
        margin: float = MARGIN,
        min_returns: int = MIN_RETURNS,
        workers: int = 1,
    ):
        if not (T > 0 and rho > 0 and step > 0):
            raise ValueError("depth, return radius and step must be positive")
        self.spec, self.T, self.rho, self.step = spec, float(T), float(rho), float(step)
        self.margin, self.min_returns = float(margin), int(min_returns)
        self.ends = ends if ends is not None else EndCollection([])
        table = orbit(spec, None, N, workers=workers)
        self.reach = float(table.dist[table.lengths == table.N].min()) if N > 0 else 0.0
        # orbit points that can be within rho of the second half of the ray
        sel = (table.dist >= T / 2 - rho) & (table.dist <= T + rho)
        c = table.coords[sel]
        self.orbit_depth = table.dist[sel]
        self.orbit_dirs = c / np.linalg.norm(c, axis=1, keepdims=True)
        self.orbit_tree = cKDTree(self.orbit_dirs) if len(c) else None
        self.regions = []
        for e in self.ends:
            ct = cosets(spec, e.stabilizer, N)
            self.regions.append(e.translates(spec, ct.words, ct.lengths))
        lim = limit_set_sample(spec, N) if N > 0 else np.zeros((0, spec.dim))
        self.limit_tree = cKDTree(lim) if len(lim) else None
        self.N = N

    def checkpoints(self):
        t = np.arange(0.0, self.T + self.step / 2, self.step)
        return t[t >= self.T / 2]

    def _returns(self, xi) -> np.ndarray:
        if self.orbit_tree is None:
            return np.zeros(0, dtype=np.int64)
        D0 = max(self.T / 2 - self.rho, 1e-9)
        max_angle = np.arcsin(min(1.0, np.sinh(self.rho) / np.sinh(D0)))
        cand = np.asarray(self.orbit_tree.query_ball_point(xi, 2 * np.sin(max_angle / 2) + 1e-15), dtype=np.int64)
        if cand.size == 0:
            return cand
        theta = 2 * np.arcsin(np.clip(np.linalg.norm(self.orbit_dirs[cand] - xi, axis=1) / 2, 0, 1))
        D = self.orbit_depth[cand]
        h = np.arcsinh(np.sinh(D) * np.sin(theta))
        foot = np.arctanh(np.clip(np.tanh(D) * np.cos(theta), -1 + 1e-16, 1 - 1e-16))
        ok = (h <= self.rho) & (foot >= self.T / 2) & (foot <= self.T) & (theta < np.pi / 2)
        return np.sort(cand[ok])

    def _end_flags(self, xi, t):
        x = np.tanh(t / 2)[:, None] * xi[None, :]
        om = 1.0 / np.cosh(t / 2) ** 2
        flags, info = {}, {}
        for e, R in zip(self.ends, self.regions):
            loc = R.locate(x, om)
            ok = bool(len(t) >= MIN_CHECKPOINTS and np.all(loc == loc[0]) and loc[0] >= 0)
            dists = []
            if ok:
                dists = R.boundary_distance(x, om, loc).tolist()
                ok = bool(np.all(np.diff(dists) > 0))
            flags[e.name] = ok
            info[e.name] = {"translate": int(loc[0]) if len(loc) else -1, "boundary_distance": dists}
        return flags, info

    def classify(self, xi) -> Classification:
        xi = geo.boundary_point(xi)
        t = self.checkpoints()
        flags, info = self._end_flags(xi, t)
        ret = self._returns(xi)
        if self.limit_tree is not None:
            chord, _ = self.limit_tree.query(xi)
            lim_angle = float(2 * np.arcsin(min(1.0, chord / 2)))
        else:
            lim_angle = float(np.pi)
        hit = [name for name, ok in flags.items() if ok]
        if hit:
            verdict, end = "endpoint-like", hit[0]
        elif len(ret) >= self.min_returns:
            verdict, end = "conical-like", None
        elif len(ret) == 0 and lim_angle > self.margin:
            verdict, end = "ordinary-like", None
        else:
            verdict, end = "undetermined", None
        trace = {
            "depth": self.T,
            "rho": self.rho,
            "checkpoints": t.tolist(),
            "orbit_reach": self.reach,
            "return_indices": ret.tolist(),
            "ends": info,
        }
        return Classification(xi.tolist(), verdict, end, int(len(ret)), flags, lim_angle, trace)


def classify_boundary_point(xi, spec: GroupSpec, ends: EndCollection | None = None, **budget) -> Classification:
    """One-off classification; build a :class:`BoundaryClassifier` for many points."""
    return BoundaryClassifier(spec, ends, **budget).classify(xi)


def endpoints_disjointness_check(ends: EndCollection, spec: GroupSpec, sample, **budget) -> dict:
    """Classify a boundary sample and report points flagged endpoint-like for two ends."""
    ends.check_disjoint()
    clf = BoundaryClassifier(spec, ends, **budget)
    doubles, counts = [], {name: 0 for name in ends.names()}
    verdicts = {}
    for xi in np.atleast_2d(sample):
        c = clf.classify(xi)
        verdicts[c.verdict] = verdicts.get(c.verdict, 0) + 1
        hit = [n for n, ok in c.end_flags.items() if ok]
        for n in hit:
            counts[n] += 1
        if len(hit) > 1:
            doubles.append(c.to_json())
    return {
        "n_points": int(len(np.atleast_2d(sample))),
        "verdicts": dict(sorted(verdicts.items())),
        "endpoint_counts": counts,
        "double_classifications": len(doubles),
        "violations": doubles,
    }

"""Shadows of hyperbolic balls seen from the origin, the shadow bound and escape sums.

A point ``w`` of the closed ball lies in the shadow ``S_r(y)`` when the
hyperbolic segment (or ray) from 0 to ``w`` meets the open ball ``D(y, r)``.
On the sphere this is the cap of angular radius ``arcsin(sinh r / sinh d)``
about the direction of ``y``, where ``d = d(0, y)``.  Interior points must in
addition be at least as deep as the point where their ray enters ``D(y, r)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo
from .errors import HypothesisError, KleinlabError
from .groups import GroupSpec, orbit, orbit_stream
from .measures import AtomicMeasure, image_atoms, total_mass
from .poincare import tail_ratio, _verdict, MARGIN


def _sin_ratio(r, D):
    """``sinh r / sinh D`` without overflow for large ``D``."""
    D = np.asarray(D, dtype=float)
    return np.sinh(r) * 2.0 * np.exp(-D) / -np.expm1(-2.0 * D)


def shadow_angle(r: float, D) -> np.ndarray:
    """Angular radius of ``S_r(y)`` on the sphere for ``d(0, y) = D``; pi when ``D <= r``."""
    D = np.asarray(D, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.arcsin(np.minimum(1.0, _sin_ratio(r, np.maximum(D, 1e-300))))
    return np.where(D <= r, np.pi, phi)


def entry_depth(r: float, D, theta) -> np.ndarray:
    """Distance from 0 at which the ray at angle ``theta`` from ``y`` enters ``D(y, r)``.

    Solves ``cosh t cosh D - sinh t sinh D cos(theta) = cosh r`` for its
    smaller root, written in ``u = e^t`` and scaled by ``2 e^{-D}`` so that it
    stays accurate for deep ``y``.  Returns 0 when the origin is inside and
    ``inf`` when the ray misses the ball.
    """
    D = np.asarray(D, dtype=float)
    theta = np.asarray(theta, dtype=float)
    e2 = np.exp(-2.0 * D)
    A = 1.0 + e2
    B = (1.0 - e2) * np.cos(theta)
    A_minus_B = 2.0 * np.sin(theta / 2.0) ** 2 + e2 * (1.0 + np.cos(theta))
    C = 2.0 * np.cosh(r) * np.exp(-D)
    disc = C * C - A_minus_B * (A + B)
    with np.errstate(invalid="ignore"):
        u = (A + B) / (C + np.sqrt(disc))
    s = np.where(disc >= 0, np.log(np.maximum(u, 1.0)), np.inf)
    return np.where(D <= r, 0.0, s)


@dataclass
class Shadow:
    """``S_r(y)``: axis (direction of ``y``), angular radius and the source ball."""

    axis: np.ndarray
    angle: float
    center: np.ndarray
    omega: float
    r: float
    depth: float

    @property
    def full(self) -> bool:
        return self.angle >= np.pi

    def contains(self, coords, omega) -> np.ndarray:
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        omega = np.asarray(omega, dtype=float)
        n = np.linalg.norm(coords, axis=1)
        if self.full:
            return np.ones(coords.shape[0], dtype=bool)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = coords / n[:, None]
        theta = 2.0 * np.arcsin(np.clip(np.linalg.norm(u - self.axis, axis=1) / 2.0, 0.0, 1.0))
        inside = theta <= self.angle
        inner = omega > 0
        if inner.any():
            d = geo.distance_from_origin(coords[inner], omega[inner])
            inside[inner] &= d >= entry_depth(self.r, self.depth, theta[inner])
        inside[n == 0] = False
        return inside

    def to_json(self) -> dict:
        return {
            "axis": self.axis.tolist(),
            "angle": float(self.angle),
            "center": self.center.tolist(),
            "r": float(self.r),
            "depth": float(self.depth),
        }


def shadow(y, r: float, omega=None) -> Shadow:
    """The shadow of ``D(y, r)`` from the origin."""
    if not r > 0:
        raise KleinlabError("shadow radius must be positive")
    y = np.asarray(y, dtype=float)
    om = float(geo.omega_of(geo.ball_point(y))) if omega is None else float(omega)
    D = float(geo.distance_from_origin(y[None, :], np.array([om]))[0])
    n = np.linalg.norm(y)
    axis = y / n if n > 0 else np.eye(y.shape[0])[0]
    return Shadow(axis, float(shadow_angle(r, D)), y.copy(), om, float(r), D)


def shadow_masses(coords, omega, mass, centers, center_omega, r: float) -> np.ndarray:
    """Mass inside ``S_r(y_j)`` for many centres ``y_j`` at once (exact ``math.fsum`` per shadow)."""
    coords = np.atleast_2d(coords)
    D = geo.distance_from_origin(centers, center_omega)
    phi = shadow_angle(r, D)
    nrm = np.linalg.norm(coords, axis=1)
    live = np.flatnonzero(nrm > 0)
    u = coords[live] / nrm[live, None]
    depth = geo.distance_from_origin(coords[live], omega[live])
    cn = np.linalg.norm(centers, axis=1)
    axes = np.where(cn[:, None] > 0, centers / np.maximum(cn, 1e-300)[:, None], np.eye(centers.shape[1])[0])
    out = np.zeros(len(centers))
    full = phi >= np.pi
    if full.any():
        out[full] = math.fsum(mass)
    part = np.flatnonzero(~full)
    if part.size == 0 or live.size == 0:
        return out
    tree = cKDTree(u)
    chords = 2.0 * np.sin(phi[part] / 2.0) * (1 + 1e-12) + 1e-15
    hits = tree.query_ball_point(axes[part], chords)
    sh, at = [], []
    for j, h in zip(part, hits):
        if h:
            sh.append(np.full(len(h), j, dtype=np.int64))
            at.append(np.asarray(h, dtype=np.int64))
    if not sh:
        return out
    sh, at = np.concatenate(sh), np.concatenate(at)
    theta = 2.0 * np.arcsin(np.clip(np.linalg.norm(u[at] - axes[sh], axis=1) / 2.0, 0.0, 1.0))
    ok = theta <= phi[sh]
    inner = omega[live][at] > 0
    need = ok & inner
    ok[need] = depth[at[need]] >= entry_depth(r, D[sh[need]], theta[need])
    sh, at = sh[ok], at[ok]
    order = np.lexsort([at, sh])
    sh, at = sh[order], at[order]
    bounds = np.searchsorted(sh, part, side="left"), np.searchsorted(sh, part, side="right")
    m = mass[live][at]
    for j, a, b in zip(part, *bounds):
        if b > a:
            out[j] = math.fsum(m[a:b])
    return out


@dataclass
class ShadowReport:
    c: float
    argmax_word: str
    r: float
    alpha: float
    N: int
    n_shadows: int
    ratio_quantiles: dict
    ratios: np.ndarray = field(default=None, repr=False)

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d.pop("ratios")
        return d


def verify_shadow_lemma(
    spec: GroupSpec,
    m: AtomicMeasure,
    z=None,
    r: float = 1.0,
    alpha: float | None = None,
    N: int = 8,
    conj=None,
    workers: int = 1,
    check_mass: bool = True,
) -> ShadowReport:
    """Measured constant ``c = max_w m(S_r(w z)) exp(alpha d(0, w z))`` over words of length <= N.

    With ``conj = g`` (an Isometry) the measure is replaced by its image
    ``m_g`` and every shadow by the shadow of ``g w z``.
    """
    alpha = m.alpha if alpha is None else float(alpha)
    if check_mass and abs(total_mass(m) - 1.0) > 1e-9:
        raise KleinlabError("the shadow bound is stated for measures of total mass 1; normalize first")
    table = orbit(spec, z, N, workers=workers)
    centers, comega = table.coords, table.omega
    coords, omega, mass = m.coords, m.omega, m.mass
    if conj is not None:
        coords, omega, mass = image_atoms(m, conj)
        centers, comega = conj.act(centers, comega)
    masses = shadow_masses(coords, omega, mass, centers, comega, r)
    d = geo.distance_from_origin(centers, comega)
    ratios = masses * np.exp(alpha * d)
    j = int(np.argmax(ratios))
    q = np.quantile(ratios, [0.5, 0.9, 0.99, 1.0])
    return ShadowReport(
        c=float(ratios[j]),
        argmax_word=table.word(j).format(spec.names),
        r=float(r),
        alpha=alpha,
        N=int(N),
        n_shadows=len(ratios),
        ratio_quantiles={k: float(v) for k, v in zip(("median", "p90", "p99", "max"), q)},
        ratios=ratios,
    )


@dataclass
class EscapeReport:
    r_grid: list
    raw: list
    c: float
    c_r: list
    z0: list
    alpha: float
    N: int
    verdict: str
    shell_sums: list

    def to_json(self) -> dict:
        return dict(self.__dict__)


def escape_mass(
    spec: GroupSpec,
    end,
    alpha: float,
    r_grid,
    N: int,
    z0=None,
    c: float = 1.0,
) -> EscapeReport:
    """``c_r = c * sum exp(-alpha d(0, g z0))`` over orbit points with ``1 - |g z0| <= r``.

    ``z0`` defaults to the point of the end's boundary nearest the origin.
    The orbit is streamed level by level, so depth is limited only by the
    word budget.  Requires a converging shell ratio at ``alpha`` or a
    ``convergence`` assertion in the group spec.
    """
    z0 = end.nearest_point() if z0 is None else np.asarray(z0, dtype=float)
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(r_grid <= 0) or np.any(r_grid > 1):
        raise KleinlabError("escape radii must lie in (0, 1]")
    parts = [[] for _ in r_grid]
    shells = []
    for L, coords, omega in orbit_stream(spec, z0, N):
        n = np.linalg.norm(coords, axis=1)
        d = geo.distance_from_origin(coords, omega)
        w = np.exp(-alpha * d)
        shells.append(math.fsum(w))
        gap = omega / (1.0 + n)  # 1 - |x| without cancellation
        for k, r in enumerate(r_grid):
            parts[k].append(math.fsum(w[gap <= r]))
    ratio, _ = tail_ratio(shells)
    verdict = _verdict(ratio, MARGIN)
    if verdict != "converges-likely" and not spec.assertions.get("convergence", False):
        raise HypothesisError(f"shell ratio {ratio:.3f} at alpha={alpha} does not indicate convergence; assert it to proceed")
    raw = [math.fsum(p) for p in parts]
    return EscapeReport(
        r_grid=[float(r) for r in r_grid],
        raw=raw,
        c=float(c),
        c_r=[float(c) * v for v in raw],
        z0=[float(v) for v in z0],
        alpha=float(alpha),
        N=int(N),
        verdict=verdict,
        shell_sums=shells,
    )

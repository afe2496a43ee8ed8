"""Measures attached to ends: coset extension, parabolic orbit sums and decomposition.

Cosets are left cosets ``g Gamma_E`` with shortlex-minimal representatives;
the extension of a measure ``m`` living on an end is ``sum_i m_{g_i}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .ends import EndCollection, EndSpec, check_fixed
from .errors import HeuristicCosetsRejected, KleinlabError, PoleError
from .groups import CosetTable, GroupSpec, cosets, word_matrices
from .words import Word, pad_words
from .measures import AtomicMeasure, point_mass, total_mass
from .poincare import tail_ratio

CHUNK = 1 << 21  # images computed per block (cosets x atoms)
EPS_DEPTH = 1e-4


def coset_images(m: AtomicMeasure, mats: np.ndarray):
    """Images of every atom of ``m`` under every matrix.

    Returns ``(coords, omega, mass)`` with shapes ``(C, k, n)``, ``(C, k)``
    and ``(C, k)``; row ``i`` is the image measure ``m_{g_i}`` in the atom
    order of ``m``.
    """
    C, k, n = len(mats), len(m), m.dim
    coords = np.empty((C, k, n))
    omega = np.zeros((C, k))
    mass = np.empty((C, k))
    b = m.boundary
    step = max(1, CHUNK // max(k, 1))
    zb = geo.sphere_to_plane(m.coords[b]) if b.any() else None
    if (~b).any():
        zi, ti = geo.ball_to_half(m.coords[~b], m.omega[~b])
    for lo in range(0, C, step):
        mm = mats[lo : lo + step, None]
        if b.any():
            f = geo.plane_factors(mm, zb[None, :])
            if not np.all(np.isfinite(f) & (f > 0)):
                raise PoleError("a boundary atom hits the pole of a coset representative")
            coords[lo : lo + step, b] = geo.plane_to_sphere(geo.act_plane(mm, zb[None, :]), n)
            mass[lo : lo + step, b] = m.mass[b] * f**m.alpha
        if (~b).any():
            z2, t2 = geo.act_half(mm, zi[None, :], ti[None, :])
            c2, om2 = geo.half_to_ball(z2, t2, n)
            coords[lo : lo + step, ~b] = c2
            omega[lo : lo + step, ~b] = om2
            mass[lo : lo + step, ~b] = m.mass[~b] * (om2 / m.omega[~b]) ** m.alpha
    return coords, omega, mass


def coset_masses(m: AtomicMeasure, mats: np.ndarray) -> np.ndarray:
    """Total mass of each image measure ``m_{g_i}`` without keeping the atoms."""
    out = np.empty(len(mats))
    step = max(1, CHUNK // max(len(m), 1))
    for lo in range(0, len(mats), step):
        _, _, mass = coset_images(m, mats[lo : lo + step])
        out[lo : lo + step] = [math.fsum(row) for row in mass]
    return out


@dataclass
class ExtensionReport:
    n_cosets: int
    N: int
    coset_masses: np.ndarray = field(repr=False)
    lengths: np.ndarray = field(repr=False)
    mass_by_length: list = field(default_factory=list)
    partial_sums: list = field(default_factory=list)
    tail_ratio: float = float("nan")
    r_squared: float = float("nan")
    total: float = 0.0
    mass_bound: float | None = None

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d.pop("coset_masses")
        d.pop("lengths")
        return d


def _check_support(m: AtomicMeasure, end: EndSpec):
    inside = end.region().locate(m.coords, m.omega) == 0
    if not inside.all():
        raise KleinlabError(f"{int((~inside).sum())} atoms lie outside end {end.name!r}")


def _report(coset_mass, lengths, N):
    by_len = [math.fsum(coset_mass[lengths == L]) for L in range(N + 1)]
    partial = list(np.cumsum(by_len))
    ratio, r2 = tail_ratio(by_len)
    return ExtensionReport(
        n_cosets=len(coset_mass),
        N=int(N),
        coset_masses=coset_mass,
        lengths=lengths,
        mass_by_length=by_len,
        partial_sums=[float(v) for v in partial],
        tail_ratio=ratio,
        r_squared=r2,
        total=math.fsum(coset_mass),
    )


def extend_measure(
    m: AtomicMeasure,
    spec: GroupSpec,
    end: EndSpec,
    table: CosetTable | None = None,
    N: int = 8,
    shadow_c: float | None = None,
    check_support: bool = True,
):
    """Extension ``m* = sum_i m_{g_i}`` over coset representatives of the end group.

    Returns ``(m*, report)``.  The identity coset contributes the atoms of
    ``m`` unchanged.  With ``shadow_c`` the report includes the bound
    ``shadow_c * sum_i exp(-alpha d(0, g_i y))`` with ``y`` the end's point
    nearest the origin.
    """
    if table is None:
        table = cosets(spec, end.stabilizer, N)
    if table.mode != "exact":
        raise HeuristicCosetsRejected("extension needs exactly decided cosets")
    if check_support:
        _check_support(m, end)
    if table.lengths[0] != 0:
        raise KleinlabError("the coset table must start with the identity coset")
    mats = word_matrices(spec, table.words, table.lengths)
    coords, omega, mass = coset_images(m, mats[1:])
    coords = np.concatenate([m.coords[None], coords])
    omega = np.concatenate([m.omega[None], omega])
    mass = np.concatenate([m.mass[None], mass])
    coset_mass = np.array([math.fsum(row) for row in mass])
    rep = _report(coset_mass, table.lengths.astype(np.int64), table.N)
    if shadow_c is not None:
        y = end.nearest_point()
        oy = geo.omega_of(y)
        z, t = geo.ball_to_half(y[None, :], [oy])
        c2, om2 = geo.half_to_ball(*geo.act_half(mats, z[0], t[0]), spec.dim)
        d = geo.distance_from_origin(c2, om2)
        rep.mass_bound = float(shadow_c) * math.fsum(np.exp(-m.alpha * d))
    tags = np.repeat(np.arange(len(mats)), len(m))
    keep = mass.reshape(-1) > 0
    prov = dict(m.provenance, construction="extension", end=end.name, cosets=len(mats), N=int(table.N))
    out = AtomicMeasure.build(
        m.alpha,
        coords.reshape(-1, spec.dim)[keep],
        omega.reshape(-1)[keep],
        mass.reshape(-1)[keep],
        prov,
        tags[keep],
    )
    return out, rep


def perturbed_representatives(table: CosetTable, stabilizer, seed: int = 0, max_power: int = 3):
    """Representatives ``g_i h_i`` with ``h_i`` a random product of stabilizer words.

    Each ``h_i`` is ``s^k`` for a random stabilizer word ``s`` and
    ``|k| <= max_power``; the identity coset keeps the empty word.
    """
    rng = np.random.default_rng(seed)
    stab = [Word(s) for s in stabilizer]
    reps = table.representatives
    out = [reps[0]]
    for w in reps[1:]:
        s = stab[rng.integers(len(stab))]
        k = int(rng.integers(-max_power, max_power + 1))
        h = Word(list(s) * k) if k >= 0 else Word(list(s.inverse()) * -k)
        out.append(w * h)
    return pad_words(out)


def choice_invariance(m: AtomicMeasure, spec: GroupSpec, end: EndSpec, table: CosetTable, seed: int = 0) -> dict:
    """Largest atomwise change of the coset images under a change of representatives.

    Coordinates are compared in Euclidean norm, masses relative to the
    larger of the two; rows are aligned coset by coset.
    """
    stab = end.stabilizer_words(spec)
    check_fixed(spec, end.center, stab) if end.kind == "horoball" else None
    mats = word_matrices(spec, table.words, table.lengths)
    alt_words, alt_lengths = perturbed_representatives(table, stab, seed)
    alt = word_matrices(spec, alt_words, alt_lengths)
    c1, o1, w1 = coset_images(m, mats)
    c2, o2, w2 = coset_images(m, alt)
    scale = np.maximum(np.abs(w1), np.abs(w2))
    rel = np.where(scale > 0, np.abs(w1 - w2) / np.where(scale > 0, scale, 1.0), 0.0)
    return {
        "n_cosets": len(mats),
        "seed": int(seed),
        "max_coord_diff": float(np.max(np.linalg.norm(c1 - c2, axis=-1))),
        "max_omega_diff": float(np.max(np.abs(o1 - o2))),
        "max_mass_rel_diff": float(rel.max()),
        "total_rel_diff": abs(math.fsum(w1.ravel()) - math.fsum(w2.ravel())) / math.fsum(w1.ravel()),
    }


def parabolic_orbit_measure(spec: GroupSpec, v, stabilizer_gens, alpha: float, N: int, normalize: bool = False):
    """Atoms ``g_i v`` with mass ``|g_i'(v)|^alpha`` over cosets of the stabilizer of ``v``.

    Returns ``(measure, report)``; the report carries per-length coset
    masses, their partial sums and the fitted tail ratio.
    """
    v = geo.boundary_point(v)
    gens = [spec.parse(g) if isinstance(g, str) else g for g in stabilizer_gens]
    check_fixed(spec, v, gens)
    table = cosets(spec, gens, N)
    if table.mode != "exact":
        raise HeuristicCosetsRejected("parabolic orbit sums need exactly decided cosets")
    cusp = EndSpec("parabolic", "horoball", {"base": v, "diameter": 0.5}, [spec.format(g) for g in gens])
    m, rep = extend_measure(point_mass(v, alpha), spec, cusp, table, check_support=False)
    m.provenance.update(construction="parabolic-orbit", N=int(N), alpha=float(alpha))
    return (m.normalized() if normalize else m), rep


@dataclass
class Decomposition:
    names: list
    parts: list
    residual: AtomicMeasure | None
    masses: list
    residual_mass: float
    total: float
    assignment: np.ndarray = field(repr=False)
    extension_agreement: dict = field(default_factory=dict)

    @property
    def additivity_error(self) -> float:
        return abs(math.fsum(self.masses + [self.residual_mass]) - self.total)

    def disjoint(self) -> bool:
        """Exact check that the part supports share no atom location."""
        seen = set()
        for p in self.parts:
            if p is None:
                continue
            keys = {tuple(r) for r in np.column_stack([p.coords, p.omega]).tolist()}
            if seen & keys:
                return False
            seen |= keys
        return True

    def report(self) -> dict:
        return {
            "ends": self.names,
            "masses": [float(v) for v in self.masses],
            "atoms": [0 if p is None else len(p) for p in self.parts],
            "residual_mass": float(self.residual_mass),
            "total": float(self.total),
            "additivity_error": float(self.additivity_error),
            "disjoint": self.disjoint(),
            "extension_agreement": self.extension_agreement,
        }


def decompose(
    mu: AtomicMeasure,
    spec: GroupSpec,
    ends: EndCollection,
    N: int = 8,
    eps: float = EPS_DEPTH,
    tables: dict | None = None,
    compare_extension: bool = False,
) -> Decomposition:
    """Split ``mu`` by the Gamma-translates of each end region.

    An atom goes to end ``i`` when it lies within Euclidean distance ``eps``
    of the sphere inside a translate ``g_j E_i`` (``g_j`` a coset
    representative of length <= N).  Everything else is the residual.  With
    ``compare_extension`` each part is compared with the extension of its
    restriction to the untranslated region.
    """
    ends.check_disjoint()
    tables = {} if tables is None else dict(tables)
    gap = np.where(mu.boundary, 0.0, mu.omega / (1.0 + np.linalg.norm(mu.coords, axis=1)))
    deep = gap < eps
    assign = np.full(len(mu), -1, dtype=np.int64)
    translate = np.full(len(mu), -1, dtype=np.int64)
    for i, end in enumerate(ends):
        table = tables.get(end.name) or cosets(spec, end.stabilizer, N)
        tables[end.name] = table
        regions = end.translates(spec, table.words, table.lengths)
        cand = np.flatnonzero(deep & (assign < 0))
        loc = regions.locate(mu.coords[cand], mu.omega[cand])
        hit = loc >= 0
        assign[cand[hit]] = i
        translate[cand[hit]] = loc[hit]
    parts, masses, agree = [], [], {}
    for i, end in enumerate(ends):
        sel = assign == i
        if not sel.any():
            parts.append(None)
            masses.append(0.0)
            continue
        part = mu.subset(sel)
        part.provenance.update(construction="end-part", end=end.name)
        parts.append(part)
        masses.append(total_mass(part))
        if compare_extension:
            base = sel & (translate == 0)
            if base.any():
                table = tables[end.name]
                ext = math.fsum(coset_masses(mu.subset(base), word_matrices(spec, table.words, table.lengths)))
                agree[end.name] = {
                    "part_mass": masses[-1],
                    "extension_mass": ext,
                    "relative_gap": abs(ext - masses[-1]) / masses[-1],
                }
            else:
                agree[end.name] = {"part_mass": masses[-1], "extension_mass": None, "relative_gap": None}
    rest = assign < 0
    residual = mu.subset(rest) if rest.any() else None
    return Decomposition(
        names=ends.names(),
        parts=parts,
        residual=residual,
        masses=masses,
        residual_mass=total_mass(residual) if residual is not None else 0.0,
        total=total_mass(mu),
        assignment=assign,
        extension_agreement=agree,
    )

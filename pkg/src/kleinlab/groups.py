"""Finitely generated Kleinian groups: orbits, cosets and limit-set samples."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import geometry as geo
from .errors import BudgetExceededError, HeuristicModeRequired, KleinlabError
from .geometry import Isometry
from .words import (
    DEFAULT_WORD_CAP,
    SubgroupGraph,
    Word,
    check_budget,
    extend_left,
    row_to_word,
    shortlex_sort,
    word_array,
)

log = logging.getLogger(__name__)

DEFAULT_TAU = 1e-9


@dataclass
class GroupSpec:
    """A Kleinian group given by named generator matrices.

    Discreteness (and any convergence hypothesis) is asserted by the user,
    never checked here.
    """

    name: str
    dim: int
    generators: dict
    presentation: str = "free"
    basepoint: np.ndarray = None
    assertions: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.presentation not in ("free", "unknown"):
            raise KleinlabError("presentation must be 'free' or 'unknown'")
        if not self.generators:
            raise KleinlabError("a group needs at least one generator")
        gens = {}
        for name, g in self.generators.items():
            if not isinstance(g, Isometry):
                g = Isometry.from_matrix(g, self.dim)
            if g.dim != self.dim:
                raise KleinlabError(f"generator {name} has dimension {g.dim}")
            gens[name] = g
        mats = list(gens.values())
        for i in range(len(mats)):
            for j in range(i):
                if mats[i].is_close(mats[j], 1e-12):
                    raise KleinlabError("generators must be pairwise distinct")
        self.generators = gens
        if self.basepoint is None:
            self.basepoint = np.zeros(self.dim)
        self.basepoint = geo.ball_point(self.basepoint)

    @property
    def names(self):
        return list(self.generators)

    @property
    def rank(self) -> int:
        return len(self.generators)

    def letter_matrices(self) -> np.ndarray:
        """Matrices indexed by letter code (generator, then inverse)."""
        out = np.empty((2 * self.rank, 2, 2), dtype=complex)
        for i, g in enumerate(self.generators.values()):
            out[2 * i] = g.matrix
            out[2 * i + 1] = g.inverse_matrix
        return out

    def word_matrix(self, word) -> np.ndarray:
        mats = self.letter_matrices()
        m = np.eye(2, dtype=complex)
        for c in Word(word):
            m = m @ mats[c]
        return m

    def element(self, word) -> Isometry:
        return Isometry(self.word_matrix(word), self.dim)

    def parse(self, text: str) -> Word:
        return Word.parse(text, self.names)

    def format(self, word) -> str:
        return Word(word).format(self.names)

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "presentation": self.presentation,
            "generators": {k: g.to_json()["matrix"] for k, g in self.generators.items()},
            "basepoint": [float(v) for v in self.basepoint],
            "assertions": dict(self.assertions),
        }

    @classmethod
    def from_json(cls, obj) -> "GroupSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        dim = int(obj["dim"])
        gens = {}
        for name, m in obj["generators"].items():
            gens[name] = Isometry(np.array([[complex(*e) for e in row] for row in m]), dim)
        return cls(
            name=obj.get("name", "group"),
            dim=dim,
            generators=gens,
            presentation=obj.get("presentation", "free"),
            basepoint=obj.get("basepoint"),
            assertions=obj.get("assertions", {}),
        )

    @classmethod
    def load(cls, path) -> "GroupSpec":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


# ---------------------------------------------------------------------------
# orbit tables


@dataclass
class OrbitTable:
    """Images ``w(y)`` of a basepoint for all words of length <= N.

    ``omega`` holds ``1 - |w(y)|^2`` with full relative precision; prefer it
    to recomputing from ``coords`` for deep entries.
    """

    spec_name: str
    names: list
    basepoint: np.ndarray
    N: int
    words: np.ndarray
    lengths: np.ndarray
    coords: np.ndarray
    omega: np.ndarray
    dist: np.ndarray
    tau: float = DEFAULT_TAU
    presentation: str = "free"
    relations: list = field(default_factory=list)

    def __len__(self):
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def word(self, i: int) -> Word:
        return row_to_word(self.words[i], int(self.lengths[i]))

    def shell_counts(self) -> np.ndarray:
        return np.bincount(self.lengths, minlength=self.N + 1)

    def to_csv(self, fh=None) -> str:
        """CSV with columns ``word, x1..xn, dist``."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["word"] + [f"x{i + 1}" for i in range(self.dim)] + ["dist"])
        for i in range(len(self)):
            w.writerow(
                [self.word(i).format(self.names)]
                + [repr(float(v)) for v in self.coords[i]]
                + [repr(float(self.dist[i]))]
            )
        return buf.getvalue() if fh is None else ""


def _orbit_chunk(mats, z0, t0, N, last):
    """Orbit points of all reduced words ending in the letter ``last``."""
    k = mats.shape[0] // 2
    level = np.array([[last]], dtype=np.int8)
    z, t = geo.act_half(mats[last], np.array([z0]), np.array([t0]))
    out_w, out_z, out_t = [level], [z], [t]
    for _ in range(2, N + 1):
        level, parent, codes = extend_left(level, k)
        zp, tp = z[parent], t[parent]
        znew = np.empty_like(zp)
        tnew = np.empty_like(tp)
        for s in range(2 * k):
            sel = codes == s
            znew[sel], tnew[sel] = geo.act_half(mats[s], zp[sel], tp[sel])
        z, t = znew, tnew
        out_w.append(level)
        out_z.append(z)
        out_t.append(t)
    return out_w, out_z, out_t


def _assemble(levels_w, zs, ts, N, dim):
    count = sum(w.shape[0] for w in levels_w)
    words = np.full((count, N), -1, dtype=np.int8)
    lengths = np.empty(count, dtype=np.int16)
    z = np.concatenate(zs)
    t = np.concatenate(ts)
    pos = 0
    for w in levels_w:
        L = w.shape[1]
        words[pos : pos + w.shape[0], :L] = w
        lengths[pos : pos + w.shape[0]] = L
        pos += w.shape[0]
    order = shortlex_sort(words, lengths)
    coords, omega = geo.half_to_ball(z[order], t[order], dim)
    return words[order], lengths[order], coords, omega


def orbit(
    spec: GroupSpec,
    y=None,
    N: int = 6,
    tau: float = DEFAULT_TAU,
    workers: int = 1,
    cap: int = DEFAULT_WORD_CAP,
) -> OrbitTable:
    """Orbit table of ``y`` (default: the spec's basepoint) up to word length ``N``.

    In ``"free"`` mode every reduced word is a distinct element.  In
    ``"unknown"`` mode elements whose matrices and images agree within
    ``tau`` are merged (shortlex-first word kept) and the relation is logged.
    """
    y = spec.basepoint if y is None else geo.ball_point(y)
    check_budget(spec.rank, N, cap)
    if spec.presentation == "unknown":
        return _orbit_unknown(spec, y, N, tau, cap)
    mats = spec.letter_matrices()
    z0, t0 = geo.ball_to_half(y[None, :], [geo.omega_of(y)])
    z0, t0 = complex(z0[0]), float(t0[0])
    levels_w = [np.zeros((1, 0), dtype=np.int8)]
    zs, ts = [np.array([z0])], [np.array([t0])]
    if N > 0:
        jobs = range(2 * spec.rank)
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                parts = list(ex.map(_orbit_chunk, *zip(*[(mats, z0, t0, N, s) for s in jobs])))
        else:
            parts = [_orbit_chunk(mats, z0, t0, N, s) for s in jobs]
        for w, z, t in parts:
            levels_w += w
            zs += z
            ts += t
    words, lengths, coords, omega = _assemble(levels_w, zs, ts, N, spec.dim)
    dist = geo.distance_from_origin(coords, omega)
    return OrbitTable(spec.name, spec.names, y, N, words, lengths, coords, omega, dist, tau, "free")


def _matrix_key(m):
    flat = m.reshape(len(m), 4)
    return np.concatenate([flat.real, flat.imag], axis=1)


def _orbit_unknown(spec, y, N, tau, cap):
    mats = spec.letter_matrices()
    k = spec.rank
    z0, t0 = geo.ball_to_half(y[None, :], [geo.omega_of(y)])
    seen_keys = [_matrix_key(np.eye(2, dtype=complex)[None])]
    seen_words = [Word()]
    level = np.zeros((1, 0), dtype=np.int8)
    level_m = np.eye(2, dtype=complex)[None]
    all_w, all_m = [level], [level_m]
    relations = []
    total = 1
    for _ in range(1, N + 1):
        if level.shape[0] == 0:
            break
        cand, parent, codes = extend_left(level, k)
        cm = np.einsum("kij,kjl->kil", mats[codes], level_m[parent])
        norm = np.array([geo.normalize_matrix(m, spec.dim) for m in cm]) if len(cm) else cm
        keys = _matrix_key(norm)
        tree = cKDTree(np.concatenate(seen_keys))
        old_words = seen_words
        keep = []
        local = {}
        for i in range(len(norm)):
            hit = tree.query_ball_point(keys[i], tau)
            if not hit:
                hit = tree.query_ball_point(-keys[i], tau)
            if hit:
                relations.append((row_to_word(cand[i]), old_words[hit[0]]))
                continue
            rk = tuple(np.round(keys[i] / max(tau, 1e-300)).astype(np.int64))
            if rk in local:
                relations.append((row_to_word(cand[i]), row_to_word(cand[local[rk]])))
                continue
            local[rk] = i
            keep.append(i)
        keep = np.array(keep, dtype=np.int64)
        level, level_m = cand[keep], norm[keep]
        total += len(keep)
        if total > cap:
            raise BudgetExceededError(f"orbit exceeds the cap {cap}")
        seen_keys.append(keys[keep])
        seen_words = seen_words + [row_to_word(r) for r in level]
        all_w.append(level)
        all_m.append(level_m)
    for a, b in relations:
        log.info("relation detected in %s: %s = %s", spec.name, spec.format(a), spec.format(b))
    zs, ts = [], []
    for m in all_m:
        z = np.empty(len(m), dtype=complex)
        t = np.empty(len(m))
        for i, mm in enumerate(m):
            zz, tt = geo.act_half(mm, z0, t0)
            z[i], t[i] = zz[0], tt[0]
        zs.append(z)
        ts.append(t)
    words, lengths, coords, omega = _assemble(all_w, zs, ts, N, spec.dim)
    dist = geo.distance_from_origin(coords, omega)
    return OrbitTable(spec.name, spec.names, y, N, words, lengths, coords, omega, dist, tau, "unknown", relations)


def orbit_count(table: OrbitTable, R: float) -> int:
    """Number of table entries with ``d(0, w y) <= R``."""
    return int(np.count_nonzero(table.dist <= R))


def word_matrices(spec: GroupSpec, words: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Matrices of padded word rows (vectorized left-to-right product)."""
    mats = spec.letter_matrices()
    out = np.broadcast_to(np.eye(2, dtype=complex), (len(words), 2, 2)).copy()
    for j in range(words.shape[1]):
        act = j < lengths
        if not act.any():
            continue
        idx = np.flatnonzero(act)
        out[idx] = np.einsum("kij,kjl->kil", out[idx], mats[words[idx, j]])
    return out


# ---------------------------------------------------------------------------
# cosets


@dataclass
class CosetTable:
    """Shortlex-minimal representatives of the left cosets ``w H`` up to length N."""

    subgroup_gens: list
    N: int
    words: np.ndarray
    lengths: np.ndarray
    mode: str = "exact"
    graph: SubgroupGraph = None
    names: list = None

    def __len__(self):
        return len(self.lengths)

    @property
    def representatives(self):
        return [row_to_word(self.words[i], int(self.lengths[i])) for i in range(len(self))]

    def contains(self, word) -> bool:
        """Subgroup membership of ``word`` (exact mode only)."""
        if self.graph is None:
            raise HeuristicModeRequired("membership test needs exact mode")
        return self.graph.contains(word)


def cosets(
    spec: GroupSpec,
    subgroup_gens,
    N: int,
    heuristic: bool = False,
    tau: float = DEFAULT_TAU,
    cap: int = DEFAULT_WORD_CAP,
) -> CosetTable:
    """Representatives of ``Gamma / H`` for ``H`` generated by ``subgroup_gens``.

    Exact mode (free presentation) decides coset identity with the folded
    subgroup graph.  Heuristic mode compares matrices against the elements of
    ``H`` enumerated up to length ``N`` and is flagged ``"heuristic"``.
    """
    gens = [Word(g) if not isinstance(g, str) else spec.parse(g) for g in subgroup_gens]
    words, lengths = word_array(spec.rank, N, cap)
    if spec.presentation == "free":
        graph = SubgroupGraph(gens, spec.rank)
        keys = graph.left_coset_keys(words, lengths)
        _, first = np.unique(keys, axis=0, return_index=True)
        first = np.sort(first)
        return CosetTable(gens, N, words[first], lengths[first], "exact", graph, spec.names)
    if not heuristic:
        raise HeuristicModeRequired("presentation is unknown; enable heuristic mode explicitly")
    return _cosets_heuristic(spec, gens, N, words, lengths, tau)


def _cosets_heuristic(spec, gens, N, words, lengths, tau):
    # elements of H: words in the subgroup generators up to N letters of H
    hmats = [np.eye(2, dtype=complex)]
    frontier = [np.eye(2, dtype=complex)]
    gm = [spec.word_matrix(g) for g in gens] + [spec.word_matrix(Word(g).inverse()) for g in gens]
    for _ in range(N):
        frontier = [f @ g for f in frontier for g in gm]
        hmats.extend(frontier)
    hkeys = _matrix_key(np.array([geo.normalize_matrix(m, spec.dim) for m in hmats]))
    tree = cKDTree(hkeys)
    wm = word_matrices(spec, words, lengths)
    reps, rep_inv = [], []
    for i in range(len(words)):
        m = wm[i]
        member = False
        for rinv in rep_inv:
            key = _matrix_key(geo.normalize_matrix(rinv @ m, spec.dim)[None])[0]
            if tree.query_ball_point(key, tau) or tree.query_ball_point(-key, tau):
                member = True
                break
        if not member:
            reps.append(i)
            rep_inv.append(np.linalg.inv(m))
    reps = np.array(reps)
    return CosetTable(gens, N, words[reps], lengths[reps], "heuristic", None, spec.names)


# ---------------------------------------------------------------------------
# limit set


def attracting_fixed_points(mats: np.ndarray, dim: int):
    """Attracting boundary fixed points of loxodromic matrices (others -> NaN)."""
    vals, vecs = np.linalg.eig(mats)
    big = np.argmax(np.abs(vals), axis=1)
    with np.errstate(over="ignore"):
        ratio = np.abs(vals).max(axis=1) / np.maximum(np.abs(vals).min(axis=1), 1e-300)
    v = vecs[np.arange(len(mats)), :, big]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = v[:, 0] / v[:, 1]
    z = np.where(np.abs(v[:, 1]) < 1e-300, np.complex128(np.inf), z)
    pts = geo.plane_to_sphere(z, dim)
    pts[ratio < 1 + 1e-8] = np.nan
    return pts


def limit_set_sample(
    spec: GroupSpec,
    N: int,
    L_min: int | None = None,
    d_min: float | None = None,
    table: OrbitTable | None = None,
    dedup: float = 1e-9,
    cap: int = DEFAULT_WORD_CAP,
) -> np.ndarray:
    """Boundary points approximating the limit set.

    Attracting fixed points of loxodromic words of length ``L_min..N``
    (default ``L_min = max(1, N - 2)``) and, if ``d_min`` is given, radial
    projections of orbit points at distance >= ``d_min``.  Order follows the
    words' shortlex order; points sharing a grid cell of side ``dedup`` are merged.
    """
    L_min = max(1, N - 2) if L_min is None else L_min
    words, lengths = word_array(spec.rank, N, cap)
    sel = lengths >= L_min
    pts = []
    if sel.any():
        mats = word_matrices(spec, words[sel], lengths[sel])
        fp = attracting_fixed_points(mats, spec.dim)
        pts.append(fp[~np.isnan(fp[:, 0])])
    if d_min is not None:
        table = table if table is not None else orbit(spec, None, N, cap=cap)
        deep = table.dist >= d_min
        c = table.coords[deep]
        pts.append(c / np.linalg.norm(c, axis=1, keepdims=True))
    if not pts:
        return np.zeros((0, spec.dim))
    pts = np.concatenate(pts)
    if len(pts) == 0:
        return pts
    # one point per grid cell of side ``dedup``, first occurrence wins
    _, first = np.unique(np.round(pts / dedup).astype(np.int64), axis=0, return_index=True)
    return pts[np.sort(first)]


def orbit_stream(spec: GroupSpec, y=None, N: int = 6, cap: int = DEFAULT_WORD_CAP):
    """Yield ``(L, coords, omega)`` for the images of ``y`` under all words of length ``L``.

    Free presentation only.  Keeps one level in memory, so it scales to the
    word cap without building the full table.  Order within a level is not
    shortlex; use :func:`orbit` when order matters.
    """
    if spec.presentation != "free":
        raise HeuristicModeRequired("streaming enumeration needs a free presentation")
    y = spec.basepoint if y is None else geo.ball_point(y)
    check_budget(spec.rank, N, cap)
    mats = spec.letter_matrices()
    z, t = geo.ball_to_half(y[None, :], [geo.omega_of(y)])
    first = np.full(1, -1, dtype=np.int64)
    coords, omega = geo.half_to_ball(z, t, spec.dim)
    yield 0, coords, omega
    for L in range(1, N + 1):
        zs, ts, fs = [], [], []
        for s in range(2 * spec.rank):
            keep = first != (s ^ 1)
            zn, tn = geo.act_half(mats[s], z[keep], t[keep])
            zs.append(zn)
            ts.append(tn)
            fs.append(np.full(zn.shape[0], s, dtype=np.int64))
        z, t, first = np.concatenate(zs), np.concatenate(ts), np.concatenate(fs)
        coords, omega = geo.half_to_ball(z, t, spec.dim)
        yield L, coords, omega

"""Partial Poincare sums, convergence verdicts and critical-exponent estimates.

All sums go through ``math.fsum`` so results do not depend on the order in
which terms are produced (serial, chunked or parallel enumeration agree to
the last bit).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import geometry as geo
from .errors import InsufficientDepthError, KleinlabError
from .groups import OrbitTable

MARGIN = 0.05
BAND = 0.05
MIN_COUNT = 100


@dataclass
class SeriesEstimate:
    """Truncated Poincare series ``P_N = sum exp(-s d(x, w y))``."""

    s: float
    N: int
    partial_sum: float
    last_increment: float
    tail_ratio: float
    verdict: str
    shells: list = field(default_factory=list)
    counts: list = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class ExponentEstimate:
    delta_hat: float
    delta_bisect: float
    window: tuple
    residual: float
    gap: float
    verdict: str
    n_points: int

    def to_json(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def _distances(table: OrbitTable, x=None) -> np.ndarray:
    if x is None:
        return table.dist
    x = geo.ball_point(x)
    if x.shape[0] != table.dim:
        raise KleinlabError("point and table dimensions differ")
    ox = geo.omega_of(x)
    return geo.hyperbolic_distance(x[None, :], table.coords, ox, table.omega)


def _shell_bounds(lengths: np.ndarray, N: int) -> np.ndarray:
    # tables are sorted by length, so each shell is a contiguous slice
    return np.searchsorted(lengths, np.arange(N + 2), side="left")


def shell_sums(table: OrbitTable, s: float, x=None) -> np.ndarray:
    """``sum exp(-s d)`` over each word length ``L = 0..N``."""
    d = _distances(table, x)
    terms = np.exp(-s * d)
    b = _shell_bounds(table.lengths, table.N)
    return np.array([math.fsum(terms[b[L] : b[L + 1]]) for L in range(table.N + 1)])


def tail_ratio(shells, L_min: int | None = None):
    """Geometric ratio fitted to the upper half of the shell sums.

    Returns ``(ratio, r_squared)``; shells that are zero are ignored.
    """
    shells = np.asarray(shells, dtype=float)
    N = len(shells) - 1
    L_min = max(1, N // 2) if L_min is None else L_min
    L = np.arange(len(shells))
    ok = (L >= L_min) & (shells > 0)
    if ok.sum() < 2:
        return float("nan"), float("nan")
    x, y = L[ok].astype(float), np.log(shells[ok])
    slope, icept = np.polyfit(x, y, 1)
    fit = slope * x + icept
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(slope)), r2


def _verdict(ratio: float, margin: float) -> str:
    if not np.isfinite(ratio):
        return "undetermined"
    if ratio < 1.0 - margin:
        return "converges-likely"
    if ratio > 1.0 + margin:
        return "diverges-likely"
    return "undetermined"


def poincare_partial(table: OrbitTable, x=None, s: float = 1.0, margin: float = MARGIN) -> SeriesEstimate:
    """Partial Poincare sum over every table entry, with shell diagnostics.

    ``x`` defaults to the origin.  The verdict here ignores the band around
    the critical exponent; see :func:`convergence_verdict`.
    """
    if s < 0:
        raise KleinlabError("exponent s must be nonnegative")
    shells = shell_sums(table, s, x)
    ratio, _ = tail_ratio(shells)
    return SeriesEstimate(
        s=float(s),
        N=int(table.N),
        partial_sum=math.fsum(shells),
        last_increment=float(shells[-1]),
        tail_ratio=ratio,
        verdict=_verdict(ratio, margin),
        shells=[float(v) for v in shells],
        counts=[int(c) for c in table.shell_counts()],
    )


def convergence_verdict(
    table: OrbitTable, s: float, margin: float = MARGIN, band: float = BAND, delta_hat: float | None = None
) -> str:
    """Heuristic verdict from the fitted shell ratio.

    Within ``band`` of ``delta_hat`` (estimated from the table when it is
    deep enough, or supplied) the answer is always "undetermined".
    """
    if delta_hat is None:
        try:
            delta_hat = critical_exponent(table).delta_hat
        except InsufficientDepthError:
            delta_hat = None
    if delta_hat is not None and abs(s - delta_hat) <= band:
        return "undetermined"
    return poincare_partial(table, None, s, margin).verdict


def default_window(table: OrbitTable):
    """Upper half of the radius up to which the table is complete.

    Every word of length ``N + 1`` lies farther out than the closest word of
    length ``N`` in practice, so ``R_max`` is the smallest distance among the
    longest words.
    """
    if table.N == 0:
        raise InsufficientDepthError("a table of depth 0 has no growth to fit")
    R_max = float(table.dist[table.lengths == table.N].min())
    return R_max / 2.0, R_max


def growth_fit(table: OrbitTable, window=None, n_grid: int = 64):
    """Least-squares slope of ``log N(R)`` over the window; returns ``(slope, rms, R_grid)``."""
    lo, hi = default_window(table) if window is None else window
    if not hi > lo:
        raise KleinlabError("fit window must have R_max > R_min")
    d = np.sort(table.dist)
    R = np.linspace(lo, hi, n_grid)
    counts = np.searchsorted(d, R, side="right")
    if counts[-1] < MIN_COUNT:
        raise InsufficientDepthError(f"N(R_max) = {counts[-1]} < {MIN_COUNT}; enumerate deeper")
    y = np.log(counts)
    slope, icept = np.polyfit(R, y, 1)
    rms = float(np.sqrt(np.mean((y - (slope * R + icept)) ** 2)))
    return float(slope), rms, R


def bisect_exponent(table: OrbitTable, s_max: float | None = None, tol: float = 1e-6) -> float:
    """The ``s`` at which the fitted shell ratio crosses 1."""
    s_max = float(table.dim) if s_max is None else s_max

    def f(s):
        return np.log(tail_ratio(shell_sums(table, s))[0])

    f0 = f(0.0)
    if not np.isfinite(f0) or f0 <= 0.0:
        return 0.0
    if f(s_max) > 0.0:
        return s_max
    return float(brentq(f, 0.0, s_max, xtol=tol))


def critical_exponent(table: OrbitTable, window=None, gap_limit: float = 0.1) -> ExponentEstimate:
    """Growth-fit and series-bisection estimates of the critical exponent."""
    lo, hi = default_window(table) if window is None else window
    slope, rms, R = growth_fit(table, (lo, hi))
    db = bisect_exponent(table)
    gap = abs(slope - db)
    return ExponentEstimate(
        delta_hat=slope,
        delta_bisect=db,
        window=(float(lo), float(hi)),
        residual=rms,
        gap=gap,
        verdict="unstable" if gap > gap_limit else "stable",
        n_points=int(np.count_nonzero(table.dist <= hi)),
    )


def shells_csv(table: OrbitTable, s: float, x=None) -> str:
    """Per-shell CSV: ``L, count, min_dist, max_dist, shell_sum``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["L", "count", "min_dist", "max_dist", "shell_sum"])
    sums = shell_sums(table, s, x)
    d = _distances(table, x)
    b = _shell_bounds(table.lengths, table.N)
    for L in range(table.N + 1):
        seg = d[b[L] : b[L + 1]]
        if seg.size == 0:
            w.writerow([L, 0, "", "", repr(0.0)])
            continue
        w.writerow([L, seg.size, repr(float(seg.min())), repr(float(seg.max())), repr(float(sums[L]))])
    return buf.getvalue()


def estimate_json(est) -> str:
    return json.dumps(est.to_json(), indent=2, sort_keys=True) + "\n"

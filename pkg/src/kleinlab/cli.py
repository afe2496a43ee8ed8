"""Command-line front end.

    kleinlab <command> --group g.json [--ends e.json] --alpha A --depth N --out DIR [--seed S] [--workers W]

``--group`` and ``--ends`` accept a file path or the name of a shipped
fixture (``cyclic``, ``schottky``, ``cusped``, ``identity``, ``cusped_ends``).
Every command writes CSV/JSON files into ``--out`` plus ``run.json`` echoing
the parameters.  Outputs depend only on the parameters and the seed, never on
``--workers``.

Exit status: 0 success, 2 budget exceeded, 3 invalid input, 4 missing
hypothesis.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import geometry as geo
from .classify import BoundaryClassifier, endpoints_disjointness_check
from .endmeasures import choice_invariance, decompose, extend_measure
from .ends import EndCollection
from .errors import KleinlabError
from .fixtures import BUILDERS, fixture_path, load_ends, load_fixture
from .groups import GroupSpec, cosets, limit_set_sample, orbit
from .measures import generator_residuals, orbit_measure, point_mass, read_measure_csv, total_mass
from .poincare import critical_exponent, poincare_partial, shells_csv
from .shadows import escape_mass, verify_shadow_lemma
from .words import DEFAULT_WORD_CAP

COMMANDS = ("orbit", "delta", "measure", "shadow-lemma", "escape", "extend", "decompose", "classify")


# ---------------------------------------------------------------------------
# helpers


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n"


def _plain(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _write(out: Path, name: str, text: str):
    (out / name).write_text(text)


def _points_csv(pts) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = pts.shape[1] if pts.ndim == 2 else 0
    w.writerow([f"x{i + 1}" for i in range(n)])
    for p in pts:
        w.writerow([repr(float(v)) for v in p])
    return buf.getvalue()


def _vector(text):
    if text is None:
        return None
    return np.array([float(v) for v in text.replace(";", ",").split(",") if v.strip()])


def load_group(ref: str) -> GroupSpec:
    if ref in BUILDERS and not Path(ref).exists():
        return load_fixture(ref)
    return GroupSpec.load(ref)


def load_end_collection(ref: str) -> EndCollection:
    if not Path(ref).exists() and fixture_path(ref).is_file():
        return load_ends(ref)
    return EndCollection.load(ref)


def _need(args, name):
    v = getattr(args, name)
    if v is None:
        raise KleinlabError(f"--{name.replace('_', '-')} is required for '{args.command}'")
    return v


def _ends(args) -> EndCollection:
    return load_end_collection(_need(args, "ends"))


def _select_end(args, ends: EndCollection):
    if args.end is not None:
        try:
            return ends[args.end]
        except KeyError:
            raise KleinlabError(f"no end named {args.end!r}") from None
    return next(iter(ends))


def _table(args, spec, basepoint=None):
    return orbit(spec, basepoint, _need(args, "depth"), workers=args.workers, cap=args.max_words)


# ---------------------------------------------------------------------------
# commands


def cmd_orbit(args, spec, out):
    table = _table(args, spec, _vector(args.basepoint))
    _write(out, "orbit.csv", table.to_csv())
    lim = limit_set_sample(spec, table.N, table=table, cap=args.max_words) if table.N > 0 else np.zeros((0, spec.dim))
    _write(out, "limit_set.csv", _points_csv(lim))
    return {"rows": len(table), "limit_points": int(len(lim))}


def cmd_delta(args, spec, out):
    table = _table(args, spec)
    est = critical_exponent(table)
    s = est.delta_hat if args.alpha is None else args.alpha
    series = poincare_partial(table, None, s)
    _write(out, "delta.json", _dump({"estimate": est.to_json(), "series": series.to_json()}))
    _write(out, "shells.csv", shells_csv(table, s))
    return {"delta_hat": est.delta_hat, "delta_bisect": est.delta_bisect, "verdict": est.verdict}


def cmd_measure(args, spec, out):
    table = _table(args, spec, _vector(args.basepoint))
    m = orbit_measure(table, _need(args, "alpha"))
    res = generator_residuals(m, spec)
    _write(out, "measure.csv", m.to_csv())
    _write(out, "conformality.json", _dump(res))
    return {"atoms": len(m), "max_residual": res["max_residual"], "testable_fraction": res["testable_fraction"]}


def cmd_shadow_lemma(args, spec, out):
    alpha = _need(args, "alpha")
    N = _need(args, "depth")
    m = orbit_measure(orbit(spec, None, N, workers=args.workers, cap=args.max_words), alpha)
    rep = verify_shadow_lemma(spec, m, r=args.radius, N=N, workers=args.workers)
    _write(out, "shadow.json", _dump(rep.to_json()))
    _write(out, "ratios.csv", "ratio\n" + "".join(repr(float(v)) + "\n" for v in rep.ratios))
    return {"c": rep.c, "argmax_word": rep.argmax_word}


def cmd_escape(args, spec, out):
    end = _select_end(args, _ends(args))
    grid = _vector(args.r_grid) if args.r_grid else 10.0 ** -np.arange(1, 7)
    rep = escape_mass(spec, end, _need(args, "alpha"), grid, _need(args, "depth"))
    _write(out, "escape.json", _dump(rep.to_json()))
    return {"c_r": rep.c_r, "verdict": rep.verdict}


def _end_measure(args, spec, end):
    if args.measure is not None:
        return read_measure_csv(Path(args.measure).read_text())
    if end.kind != "horoball":
        raise KleinlabError("without --measure, extend uses the point mass at a horoball base")
    return point_mass(end.center, _need(args, "alpha"))


def cmd_extend(args, spec, out):
    end = _select_end(args, _ends(args))
    N = _need(args, "depth")
    m = _end_measure(args, spec, end)
    table = cosets(spec, end.stabilizer, N, cap=args.max_words)
    ext, rep = extend_measure(m, spec, end, table, check_support=args.measure is not None)
    inv = choice_invariance(m, spec, end, table, seed=args.seed)
    _write(out, "extension.csv", ext.to_csv())
    _write(out, "extension.json", _dump({"report": rep.to_json(), "choice_invariance": inv}))
    return {"cosets": rep.n_cosets, "total": rep.total, "tail_ratio": rep.tail_ratio}


def cmd_decompose(args, spec, out):
    ends = _ends(args)
    N = _need(args, "depth")
    if args.measure is not None:
        mu = read_measure_csv(Path(args.measure).read_text())
    else:
        mu = orbit_measure(orbit(spec, _vector(args.basepoint), N, workers=args.workers, cap=args.max_words), _need(args, "alpha"))
    dec = decompose(mu, spec, ends, N=N, eps=args.eps, compare_extension=True)
    _write(out, "decomposition.json", _dump(dec.report()))
    for name, part in zip(dec.names, dec.parts):
        if part is not None:
            _write(out, f"part_{name}.csv", part.to_csv())
    if dec.residual is not None:
        _write(out, "residual.csv", dec.residual.to_csv())
    return {"masses": dec.masses, "residual_mass": dec.residual_mass, "total": total_mass(mu)}


def cmd_classify(args, spec, out):
    ends = load_end_collection(args.ends) if args.ends else EndCollection([])
    if args.points is not None:
        pts = np.loadtxt(args.points, delimiter=",", ndmin=2, skiprows=1)
    else:
        rng = np.random.default_rng(args.seed)
        pts = rng.normal(size=(args.sample, spec.dim))
    pts = np.array([geo.boundary_point(p / np.linalg.norm(p)) for p in pts])
    budget = {"T": args.ray_depth, "rho": args.rho, "N": _need(args, "depth"), "workers": args.workers}
    clf = BoundaryClassifier(spec, ends, **budget)
    rows = [clf.classify(p) for p in pts]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(spec.dim)] + ["verdict", "end", "returns", "limit_angle"])
    for c in rows:
        w.writerow([repr(v) for v in c.point] + [c.verdict, c.end or "", c.returns, repr(c.limit_angle)])
    _write(out, "classify.csv", buf.getvalue())
    report = {"traces": [c.to_json() for c in rows]}
    if len(ends):
        report["disjointness"] = endpoints_disjointness_check(ends, spec, pts, **budget)
    _write(out, "classify.json", _dump(report))
    counts = {}
    for c in rows:
        counts[c.verdict] = counts.get(c.verdict, 0) + 1
    return {"verdicts": dict(sorted(counts.items()))}


HANDLERS = {
    "orbit": cmd_orbit,
    "delta": cmd_delta,
    "measure": cmd_measure,
    "shadow-lemma": cmd_shadow_lemma,
    "escape": cmd_escape,
    "extend": cmd_extend,
    "decompose": cmd_decompose,
    "classify": cmd_classify,
}


# ---------------------------------------------------------------------------
# entry point


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kleinlab", description="Orbits, conformal measures and ends of Kleinian groups.")
    p.add_argument("--version", action="version", version=f"kleinlab {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--group", required=True, help="group JSON file or fixture name")
    p.add_argument("--ends", help="end collection JSON file or fixture name")
    p.add_argument("--end", help="end name (default: the first declared end)")
    p.add_argument("--alpha", type=float, help="exponent of the measure / series")
    p.add_argument("--depth", type=int, help="word length bound N")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--max-words", type=_positive_int, default=DEFAULT_WORD_CAP, help="word budget")
    p.add_argument("--basepoint", help="comma separated ball coordinates of the orbit basepoint")
    p.add_argument("--measure", help="measure CSV (as written by 'measure') for extend/decompose")
    p.add_argument("--radius", type=float, default=1.0, help="shadow radius r")
    p.add_argument("--r-grid", help="comma separated escape radii")
    p.add_argument("--eps", type=float, default=1e-4, help="depth threshold for end assignment")
    p.add_argument("--points", help="CSV of boundary points to classify (header row, x1..xn)")
    p.add_argument("--sample", type=_positive_int, default=100, help="random boundary points to classify")
    p.add_argument("--ray-depth", type=float, default=25.0, help="classifier ray depth T")
    p.add_argument("--rho", type=float, default=0.5, help="classifier return radius")
    return p


def _config(args) -> dict:
    # where the run was written and how it was parallelized do not change the results
    cfg = {k: v for k, v in vars(args).items() if k not in ("workers", "out")}
    cfg["version"] = __version__
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 3 if exc.code else 0
    try:
        if args.depth is not None and args.depth < 0:
            raise KleinlabError("--depth must be nonnegative")
        spec = load_group(args.group)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summary = HANDLERS[args.command](args, spec, out)
        _write(out, "run.json", _dump({"config": _config(args), "summary": summary}))
    except KleinlabError as exc:
        print(f"kleinlab: {exc.code}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"kleinlab: invalid input: {exc}", file=sys.stderr)
        return 3
    print(_dump(summary), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())

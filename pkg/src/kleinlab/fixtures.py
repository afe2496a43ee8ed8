"""Reference groups shipped with the package.

* ``cyclic``: one loxodromic translation of length 1 along the first axis.
* ``schottky``: two translations of length ``2 asinh 2`` along the coordinate
  axes of the disk.  Their isometric circles are the four disjoint circles of
  radius 1/2 centred at distance ``sqrt(5)/2`` on the axes (angular half-width
  ``arctan(1/2)``).
* ``cusped``: ``p = [[1, lam], [0, 1]]`` and a hyperbolic ``h`` pairing the
  circles of radius ``r`` about ``-a`` and ``a`` in the upper half-plane.  The
  quotient is a pair of pants with one cusp and two funnels.  ``lam`` is
  large so that, at word length 12, truncation hardly distorts how mass is
  shared between cosets of the cusp group (see the notes in the README).
* ``identity``: the trivial group presented by one identity generator.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .ends import EndCollection, EndSpec
from .geometry import Isometry
from .groups import GroupSpec

SCHOTTKY_LENGTH = 2.0 * np.arcsinh(2.0)
CUSP_LAMBDA = 1.0e6
CUSP_A = 0.5
CUSP_R = 0.35
CUSP_HEIGHT = 2.0  # horoball {t > 2} in the upper half-plane


def cyclic(length: float = 1.0) -> GroupSpec:
    g = Isometry.translation([1.0, 0.0], length)
    return GroupSpec("cyclic", 2, {"g": g}, "free", assertions={"discrete": True})


def schottky(length: float = SCHOTTKY_LENGTH) -> GroupSpec:
    a = Isometry.translation([1.0, 0.0], length)
    b = Isometry.translation([0.0, 1.0], length)
    return GroupSpec("schottky", 2, {"a": a, "b": b}, "free", assertions={"discrete": True})


def schottky_disks(length: float = SCHOTTKY_LENGTH):
    """Centre directions and angular half-width of the four pairing disks."""
    rho = np.tanh(length / 4.0)
    c = (1.0 + rho * rho) / (2.0 * rho)
    half = np.arctan(np.sqrt(c * c - 1.0))
    dirs = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    return dirs, half


def cusped(lam: float = CUSP_LAMBDA, a: float = CUSP_A, r: float = CUSP_R) -> GroupSpec:
    if not (0 < r < a and a + r <= lam / 2):
        raise ValueError("need 0 < r < a and a + r <= lam / 2 for disjoint pairing circles")
    p = Isometry(np.array([[1.0, lam], [0.0, 1.0]], dtype=complex), 2)
    h = Isometry(np.array([[a / r, (a * a - r * r) / r], [1.0 / r, a / r]], dtype=complex), 2)
    return GroupSpec(
        "cusped",
        2,
        {"p": p, "h": h},
        "free",
        assertions={"discrete": True, "convergence": True, "noncompact": True},
    )


def cusp_point() -> np.ndarray:
    """The parabolic fixed point of ``p`` (infinity in the half-plane)."""
    return np.array([0.0, -1.0])


def cusped_ends(a: float = CUSP_A, r: float = CUSP_R, height: float = CUSP_HEIGHT) -> EndCollection:
    """Cusp horoball end and the funnel bounded by the axis of ``h``.

    The second funnel is left undeclared: for large ``lam`` its lift is a
    half-plane of Euclidean size about ``lam`` that meets the cusp horoball.
    """
    s = np.sqrt(a * a - r * r)
    cusp = EndSpec(
        "cusp",
        "horoball",
        {"base": cusp_point(), "diameter": 2.0 / (height + 1.0)},
        ["p"],
        {"bounded": True, "expected_type": "finite"},
    )
    funnel = EndSpec(
        "funnel",
        "halfspace",
        {"axis": [0.0, 1.0], "angle": 2.0 * np.arctan(s)},
        ["h"],
        {"bounded": True, "expected_type": "infinite"},
    )
    return EndCollection([cusp, funnel], complete=False)


def identity(dim: int = 2) -> GroupSpec:
    return GroupSpec("identity", dim, {"e": Isometry.identity(dim)}, "unknown")


BUILDERS = {"cyclic": cyclic, "schottky": schottky, "cusped": cusped, "identity": identity}


def fixture_path(name: str):
    return resources.files("kleinlab") / "data" / f"{name}.json"


def load_fixture(name: str) -> GroupSpec:
    """Load a shipped group JSON file."""
    with fixture_path(name).open() as fh:
        return GroupSpec.from_json(json.load(fh))


def load_ends(name: str = "cusped_ends") -> EndCollection:
    with fixture_path(name).open() as fh:
        return EndCollection.from_json(json.load(fh))


def write_fixtures(directory) -> list:
    """Regenerate the JSON fixture files in ``directory``."""
    from pathlib import Path

    out = []
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for name, build in BUILDERS.items():
        path = d / f"{name}.json"
        path.write_text(json.dumps(build().to_json(), indent=2) + "\n")
        out.append(path)
    path = d / "cusped_ends.json"
    path.write_text(json.dumps(cusped_ends().to_json(), indent=2) + "\n")
    out.append(path)
    return out

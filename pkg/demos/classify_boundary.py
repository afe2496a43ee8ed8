"""Heuristic verdicts for a few boundary points of the Schottky and cusped fixtures."""

import numpy as np

from kleinlab import fixtures
from kleinlab.classify import BoundaryClassifier

schottky = BoundaryClassifier(fixtures.schottky(), T=30.0, N=11)
for name, xi in [("fixed point of a", [1.0, 0.0]), ("between disks", np.array([1.0, 1.0]) / np.sqrt(2)), ("inside disk of a", [np.cos(0.46), np.sin(0.46)])]:
    c = schottky.classify(xi)
    print(f"schottky {name:18s} {c.verdict:14s} returns={c.returns} limit_angle={c.limit_angle:.3f}")

cusped = BoundaryClassifier(fixtures.cusped(), fixtures.cusped_ends(), N=8)
for name, xi in [("parabolic point", fixtures.cusp_point()), ("funnel axis", [0.0, 1.0]), ("under funnel cap", [0.6, 0.8]), ("elsewhere", [0.8, -0.6])]:
    c = cusped.classify(xi)
    print(f"cusped   {name:18s} {c.verdict:14s} end={c.end} returns={c.returns}")

"""Orbit measures along a ray into the cusp of the cusped fixture concentrate on the parabolic orbit."""

import numpy as np

from kleinlab import fixtures
from kleinlab.endmeasures import decompose, parabolic_orbit_measure
from kleinlab.groups import cosets
from kleinlab.measures import CapFamily, bl_discrepancy, weak_limit_run
from kleinlab.shadows import escape_mass

spec, ends = fixtures.cusped(), fixtures.cusped_ends()
cusp = ends["cusp"]
v = fixtures.cusp_point()
alpha, N = 0.9, 10

rep = escape_mass(spec, cusp, alpha, [1e-1, 1e-3, 1e-5], N)
print("escape sums c_r:", ", ".join(f"{r:g}: {c:.2e}" for r, c in zip(rep.r_grid, rep.c_r)))

ct = cosets(spec, cusp.stabilizer, N)
R = cusp.translates(spec, ct.words, ct.lengths)
caps = CapFamily(R.centers, 0.1 * np.arcsin(R.sizes / (2.0 - R.sizes)))

heights = np.array([10.0, 1e2, 1e3, 1e4])
run = weak_limit_run(spec, v, (heights - 1) / (heights + 1), alpha, N, caps=[caps])
par, ext = parabolic_orbit_measure(spec, v, cusp.stabilizer, alpha, N, normalize=True)
for h, m, mass in zip(heights, run.measures, run.cap_masses[:, 0]):
    print(f"station height {h:8.0f}: mass near parabolic orbit {mass:.6f}, distance to limit {bl_discrepancy(m, par):.2e}")
print(f"parabolic orbit: {ext.n_cosets} cosets, geometric tail ratio {ext.tail_ratio:.3f}")

# the deepest station sits about 2/height from the sphere, so widen the assignment depth
dec = decompose(run.measures[-1], spec, ends, N=N, eps=1e-3)
print("decomposition of the deepest station:", dec.report()["masses"], f"residual {dec.residual_mass:.2e}")

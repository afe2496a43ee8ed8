"""Orbit, critical exponent, conformal measure and shadow constant of the Schottky fixture."""

import numpy as np

from kleinlab import fixtures
from kleinlab.groups import limit_set_sample, orbit
from kleinlab.measures import Cap, cap_mass, generator_residuals, orbit_measure
from kleinlab.poincare import critical_exponent, poincare_partial
from kleinlab.shadows import verify_shadow_lemma

spec = fixtures.schottky()
table = orbit(spec, None, 10)
print(f"orbit points up to length 10: {len(table)}")

est = critical_exponent(table)
print(f"delta_hat {est.delta_hat:.4f} (fit), {est.delta_bisect:.4f} (bisection), {est.verdict}")

for s in (est.delta_hat - 0.1, est.delta_hat + 0.2):
    series = poincare_partial(table, None, s)
    print(f"s={s:.3f}: partial sum {series.partial_sum:.4f}, tail ratio {series.tail_ratio:.3f}, {series.verdict}")

alpha = est.delta_hat + 0.2
m = orbit_measure(table, alpha)
res = generator_residuals(m, spec)
print(f"measure at alpha={alpha:.3f}: {len(m)} atoms, conformality residual {res['max_residual']:.1e}")

# mass near each pairing disk
dirs, half = fixtures.schottky_disks()
for d in dirs:
    print(f"  cone over disk {d.tolist()}: mass {cap_mass(m, Cap(d, half, cone=True)):.4f}")

rep = verify_shadow_lemma(spec, m, r=1.0, N=8)
print(f"shadow constant c = {rep.c:.4f} at word {rep.argmax_word!r}, median ratio {rep.ratio_quantiles['median']:.3f}")

lim = limit_set_sample(spec, 8)
ang = np.degrees(np.arctan2(lim[:, 1], lim[:, 0]))
print(f"limit set sample: {len(lim)} points, angles from {ang.min():.1f} to {ang.max():.1f} degrees")

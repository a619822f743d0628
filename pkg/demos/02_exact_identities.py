"""The exact identities behind the shearing mechanism.

Checks, at a handful of random arcs, the tangent-transport coefficients
against a finite-difference Jacobian, the closed velocity-derivative
formula against finite differences, and the coboundary arc identity whose
telescoping is what eventually makes spectral measures absolutely
continuous.
"""

import numpy as np

from horolab import FlowConfig, bolza_group, build_time_change, coboundary, \
    make_bump_observable
from horolab.bolza import BOLZA_MU0, SpectralGapParams, SurfacePoint, sample_haar
from horolab import flows

group = bolza_group()
gap = SpectralGapParams.from_mu0(BOLZA_MU0)
alpha = build_time_change(make_bump_observable(0.30 * np.exp(1.1j), 0.35, 0, group),
                          0.3, gap)
cfg = FlowConfig(quad_step=0.125, quad_tol=1e-10)
x = SurfacePoint(rep=sample_haar(5, group, seed=21)[3])

print("tangent transport vs finite-difference Jacobian (t = 5):")
for which in ("X", "V"):
    resid, coeff = flows.pushforward_residual(x, 5.0, which, alpha, cfg)
    print("  letter %s: (a, b, c) = (%+.5f, %.0f, %.5f),  oracle residual %.2e"
          % (which, coeff.a, coeff.b, coeff.c, resid))
print("  trivial clock values for comparison: X -> (-t, 0, 1), "
      "V -> (-t^2, 1, 2t)")

print("\ncoboundary arc identity over random pushed arcs:")
u = make_bump_observable(0.38 * np.exp(4.3j), 0.8, 0, group, coeff=1.5)
cob = coboundary(u, alpha)
t_vals, sigmas, lines, residuals = flows.coboundary_arc_battery(
    cob, alpha, n_arcs=14, t_min=10.0, t_max=300.0, seed=3, cfg=cfg, groups=5)
for i in range(0, 14, 3):
    print("  t = %7.1f  sigma = %.4f  line integral = %+9.5f  residual = %.2e"
          % (t_vals[i], sigmas[i], lines[i], residuals[i]))
print("  worst residual: %.2e" % np.max(np.abs(residuals)))

print("\nvelocity of a pushed arc at t = 10 (trivial value would be -10):")
prof = flows.velocity_profile(x, 10.0, 0.5, alpha, cfg,
                              grid=np.linspace(0, 0.5, 9))
for s, v, dv in zip(prof.s[::2], prof.values[::2], prof.derivative[::2]):
    print("  s = %.3f  v = %+9.5f  dv/ds = %+9.5f" % (s, v, dv))

"""Decay and growth exponents at demonstration scale.

Runs scaled-down versions of the equidistribution, mixing and twisted
scans and prints the fitted log-log slopes next to the theoretical bounds
(Bolza has spectral gap above 1/4, so nu_0 = 0 and no log corrections).
"""

import numpy as np

from horolab import bolza_group, build_time_change, coboundary, \
    make_bump_observable, project_zero_average
from horolab.bolza import BOLZA_MU0, SpectralGapParams
from horolab import stats

group = bolza_group()
gap = SpectralGapParams.from_mu0(BOLZA_MU0)
alpha = build_time_change(make_bump_observable(0.30 * np.exp(1.1j), 0.35, 0, group),
                          0.3, gap)
f = project_zero_average(
    make_bump_observable(0.35 * np.exp(0.3j), 0.9, 1, group, coeff=3.0),
    alpha, 200000, seed=2)
u = make_bump_observable(0.38 * np.exp(4.3j), 0.8, 0, group, coeff=1.5)
f_cob = coboundary(u, alpha)

print("ergodic integrals (sup over 300 orbits), bound t^(1/2):")
T_grid = np.exp(np.linspace(np.log(30), np.log(3000), 7))
rep = stats.birkhoff_scan(f, alpha, 300, T_grid, seed=11)
fit = stats.fit_loglog(rep.T, rep.sup_abs, np.zeros_like(rep.sup_abs))
print("  slope %.3f +/- %.3f   (bound 0.5, tolerance 0.55)"
      % (fit.slope, fit.confidence_halfwidth))
fit_clock = stats.fit_loglog(rep.T, rep.sup_clock_dev,
                             np.zeros_like(rep.sup_clock_dev))
print("  clock deviation slope %.3f (same bound)" % fit_clock.slope)

print("\ncorrelation decay (30k samples), bounds t^(-1/2) generic, 1/t coboundary:")
grid = np.concatenate([[0.0], 2.0 ** (0.5 * np.arange(0, 17))])
gen = stats.correlation_series(f, f, alpha, 30000, grid, seed=12)
cob = stats.correlation_series(f_cob, f_cob, alpha, 30000, grid, seed=13)
for label, series in (("generic", gen), ("coboundary", cob)):
    fit = stats.fit_loglog(series.t, series.values, series.errors)
    print("  %-10s slope %.3f +/- %.3f over window [%.0f, %.0f]"
          % (label, fit.slope, fit.confidence_halfwidth, *fit.window))

print("\ntwisted integrals at frequency 1 (256 samples), bounds T^(3/4) / T^(1/2):")
T_grid = np.exp(np.linspace(np.log(30), np.log(3000), 7))
for label, phi in (("generic", f), ("coboundary", f_cob)):
    tw = stats.twisted_scan(phi, alpha, 1.0, 256, T_grid, seed=14)
    fit = stats.fit_loglog(tw.T, tw.norms, tw.errors)
    print("  %-10s slope %.3f +/- %.3f"
          % (label, fit.slope, fit.confidence_halfwidth))

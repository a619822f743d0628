"""Tour of the surface and the exact flows.

Builds the Bolza quotient, reduces random frames to the fundamental
octagon, and runs the three homogeneous flows plus a reparametrised flow
side by side, printing the invariants that make the construction tick.
"""

import numpy as np

from horolab import (FlowConfig, SpectralGapParams, big_T, bolza_group,
                     build_time_change, flow_alpha, flow_homogeneous,
                     group_ball, make_bump_observable, reduce_point, sample_haar,
                     tau)
from horolab.bolza import BOLZA_MU0, SYSTOLE, SurfacePoint
from horolab.sl2 import GroupElement, dist_disk

group = bolza_group()
print("Bolza surface: octagon circumradius %.6f, inradius %.6f, systole %.6f"
      % (group.reduction_radius, group.inradius, SYSTOLE))

ball = group_ball(group, SYSTOLE + 0.01)
print("group ball at the systole: %d elements (identity + 8 side pairings)"
      % ball.shape[0])

# reduction: any frame lands on its fundamental-domain representative
x = reduce_point(GroupElement(sample_haar(3, group, seed=1)[2]), group)
print("basepoint distance of a reduced frame: %.4f (<= circumradius)"
      % x.origin_dist())

# a time change: alpha = c (1 + eps * bump)
gap = SpectralGapParams.from_mu0(BOLZA_MU0)
bump = make_bump_observable(0.30 * np.exp(1.1j), 0.35, 0, group)
alpha = build_time_change(bump, 0.3, gap)
print("time change: norm constant %.6f, certified minimum %.4f"
      % (alpha.norm_constant, alpha.alpha_min))

cfg = FlowConfig(quad_step=0.125, quad_tol=1e-10)
t = 12.5
print("\nclock along one orbit:")
print("  tau(x, %.1f)      = %.8f" % (t, tau(x, t, alpha, cfg)))
T = big_T(x, t, alpha, cfg)
print("  T(x, %.1f)        = %.8f" % (t, T))
print("  tau(x, T)         = %.8f  (round trip)" % tau(x, T, alpha, cfg))

y_u = flow_homogeneous(x, T, "U", group)
y_a = flow_alpha(x, t, alpha, cfg)
print("  h^U_T x vs h^alpha_t x agree to %.1e"
      % np.max(np.abs(y_u.rep - y_a.rep)))

print("\ngeodesic flow displaces the basepoint at unit speed:")
from horolab.sl2 import basepoint, exp_X

for s in (0.5, 1.0):
    moved = x.rep @ exp_X(np.asarray(s))
    d = dist_disk(complex(basepoint(x.rep)), complex(basepoint(moved)))
    print("  t = %.1f -> displacement %.6f" % (s, d))

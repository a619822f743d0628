"""Numerical laboratory for smooth time-changes of the horocycle flow on
the Bolza surface: exact flows, invariant observables, identity checks and
decay-exponent measurements."""

__version__ = "0.1.0"

from . import bolza, flows, jets, observables, orbits, sl2, stats
from .bolza import (FuchsianGroup, SpectralGapParams, SurfacePoint,
                    bolza_group, group_ball, reduce_point, sample_haar,
                    sample_vol_alpha)
from .flows import (FlowConfig, GeodesicArc, TangentCoefficients,
                    VelocityProfile, arc_integral, big_T, flow_alpha,
                    flow_homogeneous, tangent_coefficients, tau,
                    velocity_profile)
from .observables import (CoboundaryObservable, Observable, TimeChange,
                          build_time_change, coboundary, derive, graph_norm,
                          make_bump_observable, project_zero_average)
from .sl2 import DiskPoint, GroupElement, LieVector
from .stats import (BirkhoffReport, CorrelationSeries, ExponentFit,
                    SpectralEstimate, TwistReport, birkhoff_scan,
                    coboundary_correlation, correlation_series, fit_loglog,
                    local_dimension, spectral_estimate, twisted_scan)

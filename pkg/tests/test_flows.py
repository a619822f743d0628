import numpy as np
import pytest

from horolab import bolza, flows, sl2
from horolab import observables as obs
from horolab.flows import FlowConfig, GeodesicArc


@pytest.fixture(scope="module")
def group():
    return bolza.bolza_group()


@pytest.fixture(scope="module")
def gap():
    return bolza.SpectralGapParams.from_mu0(bolza.BOLZA_MU0)


@pytest.fixture(scope="module")
def alpha(group, gap):
    base = obs.make_bump_observable(0.30 * np.exp(1.1j), 0.35, 0, group)
    return obs.build_time_change(base, 0.3, gap)


@pytest.fixture(scope="module")
def alpha_trivial(group, gap):
    base = obs.make_bump_observable(0.30 * np.exp(1.1j), 0.35, 0, group)
    return obs.build_time_change(base, 0.0, gap)


@pytest.fixture(scope="module")
def x0(group):
    return bolza.reduce_point(sl2.GroupElement(bolza.sample_haar(7, group, 21)[3]),
                              group)


@pytest.fixture(scope="module")
def tight():
    return FlowConfig(quad_step=0.125, quad_tol=1e-11, newton_tol=1e-11)


def test_flow_config_validation():
    with pytest.raises(ValueError):
        FlowConfig(quad_step=0.3)
    with pytest.raises(ValueError):
        FlowConfig(quad_tol=-1.0)


def test_flow_homogeneous_properties(group, x0):
    y = flows.flow_homogeneous(x0, 0.0, "U", group)
    assert np.max(np.abs(y.rep - x0.rep)) < 1e-14
    a = flows.flow_homogeneous(flows.flow_homogeneous(x0, 3.3, "U", group),
                               4.4, "U", group)
    b = flows.flow_homogeneous(x0, 7.7, "U", group)
    assert np.max(np.abs(a.rep - b.rep)) < 1e-10
    # long split flow stays on the surface
    far = flows.flow_homogeneous(x0, 400.0, "X", group)
    assert far.origin_dist() <= group.reduction_radius + 1e-9


def test_geodesic_displacement_oracle(group, x0):
    # below the injectivity radius the basepoint moves exactly |t|
    for t in (0.3, 0.9, 1.4):
        z0 = x0.basepoint()
        lifted = sl2.basepoint(x0.rep @ sl2.exp_X(np.asarray(t)))
        assert abs(sl2.dist_disk(z0, lifted) - t) < 1e-12


def test_tau_trivial_and_monotone(x0, alpha_trivial, alpha, tight):
    assert abs(flows.tau(x0, 9.25, alpha_trivial, tight) - 9.25) < 1e-12
    taus = [flows.tau(x0, t, alpha, tight) for t in (1.0, 2.0, 4.0, 8.0)]
    assert np.all(np.diff(taus) > 0)


def test_tau_cocycle_identity(x0, alpha, tight, group):
    t1, t2 = 5.2, 8.1
    lhs = flows.tau(x0, t1 + t2, alpha, tight)
    mid = flows.flow_homogeneous(x0, t1, "U", group)
    rhs = flows.tau(x0, t1, alpha, tight) + flows.tau(mid, t2, alpha, tight)
    assert abs(lhs - rhs) < 2e-11 * (1 + t1 + t2)


def test_tau_backward(x0, alpha, tight, group):
    # tau(x, -t) = -tau(h^U_{-t} x, t)
    t = 6.0
    back = flows.flow_homogeneous(x0, -t, "U", group)
    lhs = flows.tau(x0, -t, alpha, tight)
    rhs = -flows.tau(back, t, alpha, tight)
    assert abs(lhs - rhs) < 1e-10


def test_big_t_round_trip_and_trivial(x0, alpha, alpha_trivial, tight):
    assert abs(flows.big_T(x0, 12.3, alpha_trivial, tight) - 12.3) < 1e-10
    T = flows.big_T(x0, 17.0, alpha, tight)
    assert abs(flows.tau(x0, T, alpha, tight) - 17.0) < 1e-9
    with pytest.raises(ValueError):
        flows.big_T(x0, -1.0, alpha, tight)


def test_big_t_growth_is_sublinear_deviation(alpha, group, tight):
    # |T - script T| at script T = 100 stays well below script T itself
    R = bolza.sample_haar(20, group, 31)
    devs = [abs(flows.big_T(bolza.SurfacePoint(rep=R[i]), 100.0, alpha, tight)
                - 100.0) for i in range(10)]
    assert max(devs) < 10.0


def test_flow_alpha_properties(x0, alpha, alpha_trivial, tight, group):
    y0 = flows.flow_alpha(x0, 0.0, alpha, tight)
    assert np.max(np.abs(y0.rep - x0.rep)) < 1e-14
    a = flows.flow_alpha(flows.flow_alpha(x0, 4.0, alpha, tight), 9.0, alpha, tight)
    b = flows.flow_alpha(x0, 13.0, alpha, tight)
    assert np.max(np.abs(a.rep - b.rep)) < 1e-8
    u_flow = flows.flow_homogeneous(x0, 11.0, "U", group)
    t_flow = flows.flow_alpha(x0, 11.0, alpha_trivial, tight)
    assert np.max(np.abs(u_flow.rep - t_flow.rep)) < 1e-10


def test_velocity_profile_degenerations(x0, alpha, alpha_trivial, tight):
    prof0 = flows.velocity_profile(x0, 0.0, 0.5, alpha, tight)
    assert np.max(np.abs(prof0.values)) == 0.0
    prof1 = flows.velocity_profile(x0, 7.0, 0.5, alpha_trivial, tight)
    assert np.max(np.abs(prof1.values + 7.0)) < 1e-10
    assert np.max(np.abs(prof1.derivative)) < 1e-10
    with pytest.raises(ValueError):
        flows.velocity_profile(x0, 1.0, 1.5, alpha, tight)


def test_velocity_derivative_matches_fd(group, alpha, tight):
    # probe points until the arc meets the bump, then compare the closed
    # formula with Richardson central differences in s
    X0 = bolza.sample_haar(24, group, 77)
    h = 4e-4
    s0 = 0.25
    t = 10.0
    checked = 0
    for i in range(24):
        base = bolza.SurfacePoint(rep=X0[i])
        prof = flows.velocity_profile(
            base, t, 0.5, alpha, tight,
            grid=np.array([0.0, s0 - h, s0 - 0.5 * h, s0, s0 + 0.5 * h,
                           s0 + h, 0.5]))
        fd_h = (prof.values[5] - prof.values[1]) / (2 * h)
        fd_h2 = (prof.values[4] - prof.values[2]) / h
        fd = (4.0 * fd_h2 - fd_h) / 3.0
        if abs(fd) > 0.05:
            checked += 1
            assert abs(prof.derivative[3] - fd) / max(1.0, abs(fd)) < 1e-4
        if checked >= 4:
            break
    assert checked >= 1


def test_tangent_coefficients_trivial(x0, alpha_trivial, tight):
    cx = flows.tangent_coefficients(x0, 4.0, "X", alpha_trivial, tight)
    assert abs(cx.a + 4.0) < 1e-10 and cx.b == 0.0 and cx.c == 1.0
    cv = flows.tangent_coefficients(x0, 4.0, "V", alpha_trivial, tight)
    assert abs(cv.a + 16.0) < 1e-9
    assert cv.b == 1.0
    assert abs(cv.c - 8.0) < 1e-10
    c0 = flows.tangent_coefficients(x0, 0.0, "V", alpha_trivial, tight)
    assert (c0.a, c0.b, c0.c) == (0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        flows.tangent_coefficients(x0, 1.0, "U", alpha_trivial, tight)


@pytest.mark.parametrize("which", ["X", "V"])
def test_tangent_jacobian_oracle(x0, alpha, tight, which):
    resid, coeff = flows.pushforward_residual(x0, 5.0, which, alpha, tight)
    assert resid < 1e-4
    assert coeff.which == which


def test_coboundary_arc_identity_small_battery(group, alpha, tight):
    u = obs.make_bump_observable(0.38 * np.exp(4.3j), 0.8, 0, group, coeff=1.5)
    cob = obs.coboundary(u, alpha)
    t, s, line, resid = flows.coboundary_arc_battery(
        cob, alpha, n_arcs=12, t_min=5.0, t_max=100.0, seed=64, cfg=tight,
        groups=4)
    assert np.max(np.abs(resid)) < 1e-6
    assert np.any(np.abs(line) > 1e-4)   # non-vacuous


def test_arc_by_parts_identity(x0, group, alpha, tight):
    f = obs.make_bump_observable(0.35 * np.exp(0.3j), 0.9, 1, group)
    f = obs.project_zero_average(f, alpha, 100000, seed=5)
    for t in (10.0, 40.0):
        sig = min(0.5, 6.0 / t)
        arc = GeodesicArc(base=x0, flow_time=t, sigma=sig,
                          grid=np.linspace(0, sig, flows.arc_nodes_for(sig, t)))
        resid, res = flows.arc_identity_residual(f, arc, alpha, tight)
        assert abs(resid) < 1e-6


def test_arc_length_bounds(x0, alpha, tight):
    # the geodesic-coframe length is sigma by construction; the flow-coframe
    # length grows linearly in t (slope 1 within 0.05)
    sig = 0.25
    ts = np.array([4.0, 16.0, 64.0])
    lens = []
    for t in ts:
        prof = flows.velocity_profile(x0, t, sig, alpha, tight,
                                      grid=np.linspace(0, sig, 257))
        avals = alpha.value(prof.captures)
        from scipy.integrate import cumulative_simpson
        lens.append(cumulative_simpson(np.abs(prof.values) / avals,
                                       x=prof.s)[-1])
    slope = np.polyfit(np.log(ts), np.log(lens), 1)[0]
    assert abs(slope - 1.0) < 0.05


def test_correlation_identity_check(group, alpha):
    f = obs.make_bump_observable(0.35 * np.exp(0.3j), 0.9, 1, group)
    f = obs.project_zero_average(f, alpha, 100000, seed=6)
    resid, se = flows.correlation_identity_check(f, f, 8.0, 0.5, alpha,
                                                 20000, seed=7)
    assert abs(resid) <= 4.0 * se


def test_bootstrap_certificate(alpha):
    sigma_star, t_star, table = flows.bootstrap_certificate(
        alpha, FlowConfig(quad_step=0.125, quad_tol=1e-8),
        sigmas=(0.25, 0.125), t_probe=(8.0, 32.0), n_x=4)
    assert sigma_star in (0.25, 0.125)
    assert t_star in (8.0, 32.0)
    assert all(np.isfinite(v) for v in table.values())

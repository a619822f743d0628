"""The dynamical core: homogeneous flows, the reparametrising cocycle and
its inverse, the time-changed flow, pushed geodesic arcs, their velocity
and line integrals, and the exact-identity checks built on them.

Conventions (fixed here once, verified against finite-difference oracles;
see tests/test_flows.py):

  * v_t(x, s) accumulates (X alpha / alpha - 1) along the reparametrised
    orbit started at phi^X_s(x); for the trivial time change v = -t.
  * The pushed arc gamma(s) = h^alpha_t(phi^X_s(x)) has s-velocity
    (-v) U_alpha + X, so line integrals of f against the U_alpha-coframe
    carry the weight -v.  With that orientation the coboundary arc
    identity reads, for f = (Uu)/alpha,

        int_arc f = u(gamma(S)) - u(gamma(0)) - int_0^S Xu(gamma(s)) ds,

    and the by-parts identity carries +1/t on the arc term:

        F(sigma) = (1/t) A(sigma) + (v_t(x,sigma)/t + 1) F(sigma)
                   - (1/t) int_0^sigma dv/ds(x,S) F(S) dS,

    where F(S) is the plain arc integral and A(S) the line integral.
  * dv/ds(x,s) = -v_t(x,s) (X alpha/alpha)(gamma(s))
                 + int_0^t [(X alpha/alpha - 1)(X alpha/alpha)
                            + X(X alpha/alpha)] along the orbit;
    the alpha-weighted integrand collapses to X^2 alpha - X alpha.
  * tangent_coefficients returns inverse-Jacobian coefficients: the frame
    combination at x that the flow carries onto the requested letter at
    the endpoint,  h^alpha_t(x exp(eps (a U_alpha + b V + c X)))
    = h^alpha_t(x) exp(eps W) + O(eps^2).  For the trivial time change the
    X case gives a = -t and the V case (a, b, c) = (-t^2, 1, 2t).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson

from . import sl2
from .bolza import SurfacePoint, reduce_batch, sample_haar
from .observables import ObservablePack
from .orbits import EngineConfig, OrbitEngine

__all__ = [
    "FlowConfig", "GeodesicArc", "VelocityProfile", "TangentCoefficients",
    "ArcIntegralResult", "flow_homogeneous", "tau", "big_T", "flow_alpha",
    "velocity_profile", "arc_integral", "tangent_coefficients",
    "pushforward_residual", "coboundary_arc_residual",
    "arc_identity_residual", "correlation_identity_check",
    "bootstrap_certificate",
]

_SPLIT = 50.0   # entry growth guard: exp(tX) entries grow like e^{t/2}


@dataclass(frozen=True)
class FlowConfig:
    quad_step: float = 1.0 / 64.0   # base quadrature step along flow time
    quad_tol: float = 1e-8          # absolute tolerance per unit flow time
    newton_tol: float = 1e-10       # clock inversion tolerance

    def __post_init__(self):
        if not (0.0 < self.quad_step <= 0.125):
            raise ValueError("quad_step must lie in (0, 1/8]")
        if self.quad_tol <= 0.0 or self.newton_tol <= 0.0:
            raise ValueError("tolerances must be positive")

    def engine(self, **kw):
        return EngineConfig(base_step=self.quad_step, tol=self.quad_tol,
                            newton_tol=self.newton_tol, **kw)


@dataclass(frozen=True)
class GeodesicArc:
    """A geodesic segment of length sigma at x, pushed for time t."""

    base: SurfacePoint
    flow_time: float
    sigma: float
    grid: np.ndarray = field(default=None)

    def __post_init__(self):
        g = self.grid if self.grid is not None else _arc_grid(self.sigma)
        g = np.asarray(g, dtype=float)
        if g[0] != 0.0 or abs(g[-1] - self.sigma) > 1e-12 or np.any(np.diff(g) <= 0):
            raise ValueError("arc grid must increase from 0 to sigma")
        object.__setattr__(self, "grid", g)


def _arc_grid(sigma, per_unit=128):
    n = max(16, int(round(sigma * per_unit)))
    if n % 2:
        n += 1
    return np.linspace(0.0, sigma, n + 1)


@dataclass(frozen=True)
class VelocityProfile:
    s: np.ndarray
    values: np.ndarray              # v_t(x, s)
    derivative: np.ndarray          # dv/ds
    flow_time: float
    captures: np.ndarray            # reduced arc points gamma(s)
    T: np.ndarray                   # per-node flow times T(phi^X_s x, t)


@dataclass(frozen=True)
class TangentCoefficients:
    a: float
    b: float
    c: float
    which: str
    flow_time: float


@dataclass(frozen=True)
class ArcIntegralResult:
    line_integral: float            # int_arc f against the U_alpha coframe
    plain_integral: float           # int_0^sigma f(gamma(s)) ds
    prefix_line: np.ndarray         # A(S) on the grid
    prefix_plain: np.ndarray        # F(S) on the grid
    sup_line: float
    sup_plain: float
    profile: VelocityProfile


# -- exact flows --------------------------------------------------------------

def _as_matrix(x):
    if isinstance(x, SurfacePoint):
        return x.rep
    if isinstance(x, sl2.GroupElement):
        return x.mat
    return np.asarray(x, dtype=float)


def flow_homogeneous(x, t, which, group):
    """reduce(x exp(tW)) with the product split to control entry growth."""
    if abs(t) > 1e6:
        raise ValueError("homogeneous flow capped at |t| <= 1e6")
    m = _as_matrix(x).copy()
    remaining = float(t)
    while True:
        step = np.clip(remaining, -_SPLIT, _SPLIT)
        m = reduce_batch((m @ sl2.exp_basis(np.asarray(step), which))[None], group)[0]
        remaining -= step
        if remaining == 0.0:
            break
    return SurfacePoint(rep=m)


def _clock_engine(alpha, cfg, extra=None, **kw):
    pack = [alpha.as_observable] + (extra or [])
    p = ObservablePack(pack)
    if extra:
        def comp(R, _p=p):
            out = _p.eval(R)
            out[:, 1:] *= out[:, :1]
            return out
        return OrbitEngine(alpha.group, comp, len(pack), cfg, **kw)
    def comp(R, _p=p):
        return _p.eval(R)
    return OrbitEngine(alpha.group, comp, 1, cfg, **kw)


def tau(x, t, alpha, cfg=FlowConfig()):
    """Elapsed h^alpha-time along the h^U orbit segment of length t."""
    eng = _clock_engine(alpha, cfg.engine())
    _, acc = eng.run_u_horizon(_as_matrix(x)[None], float(t))
    return float(acc[0, 0]) if t >= 0.0 else -float(acc[0, 0])


def big_T(x, script_t, alpha, cfg=FlowConfig()):
    """Inverse of tau in its second argument (script_t >= 0)."""
    if script_t < 0.0:
        raise ValueError("big_T expects a nonnegative reparametrised time")
    if script_t == 0.0:
        return 0.0
    eng = _clock_engine(alpha, cfg.engine())
    out = {}

    def cb(j, idx, Rc, Tc, acc, ph):
        out.setdefault("T", []).append(Tc)
    eng.run_to_targets(_as_matrix(x)[None], [float(script_t)], on_capture=cb)
    return float(np.concatenate(out["T"])[0])


def flow_alpha(x, script_t, alpha, cfg=FlowConfig()):
    """The time-changed flow h^alpha at a nonnegative time."""
    if script_t < 0.0:
        raise ValueError("flow_alpha expects a nonnegative time; use the "
                         "cocycle identity for backward segments")
    if script_t == 0.0:
        return x if isinstance(x, SurfacePoint) else SurfacePoint(
            rep=reduce_batch(_as_matrix(x)[None], alpha.group)[0])
    eng = _clock_engine(alpha, cfg.engine())
    box = {}

    def cb(j, idx, Rc, Tc, acc, ph):
        box["R"] = Rc[0]
    eng.run_to_targets(_as_matrix(x)[None], [float(script_t)], on_capture=cb)
    return SurfacePoint(rep=box["R"])


def flow_alpha_batch(R, script_t, alpha, cfg=FlowConfig()):
    """Vector version of flow_alpha for (n,2,2) stacks; returns matrices."""
    eng = _clock_engine(alpha, cfg.engine())
    out = np.empty_like(R)

    def cb(j, idx, Rc, Tc, acc, ph):
        out[idx] = Rc
    eng.run_to_targets(R, [float(script_t)], on_capture=cb)
    return out


# -- pushed arcs ---------------------------------------------------------------

def _velocity_components(alpha):
    def comp(R):
        a, xa, xxa = alpha.x_jets(R)
        return np.stack([a, xa - a, xxa - xa], axis=1)
    return comp


def velocity_profile(x, t, sigma, alpha, cfg=FlowConfig(), grid=None):
    """Velocity data of the pushed arc s -> h^alpha_t(phi^X_s(x)).

    One engine pass marches all arc nodes to the common time t, returning
    v, dv/ds, the arc points and the per-node flow times.
    """
    if sigma > 1.0:
        raise ValueError("arc parameter sigma is capped at 1")
    arc = GeodesicArc(base=_as_surface(x, alpha.group), flow_time=float(t),
                      sigma=float(sigma), grid=grid)
    s = arc.grid
    Y = _as_matrix(arc.base)[None] @ sl2.exp_X(s)[:, :, :]
    Y = reduce_batch(Y, alpha.group)
    if t == 0.0:
        z = np.zeros_like(s)
        return VelocityProfile(s=s, values=z, derivative=z, flow_time=0.0,
                               captures=sl2.canonical_sign(Y), T=z)
    eng = OrbitEngine(alpha.group, _velocity_components(alpha), 3,
                      cfg.engine(), col_scale=(1.0, 10.0, 1e3))
    box = {}

    def cb(j, idx, Rc, Tc, acc, ph):
        for name, val in (("R", Rc), ("T", Tc), ("acc", acc), ("idx", idx)):
            box.setdefault(name, []).append(val)
    eng.run_to_targets(Y, [float(t)], on_capture=cb)
    idx = np.concatenate(box["idx"])
    order = np.argsort(idx)
    Rc = np.concatenate(box["R"])[order]
    Tc = np.concatenate(box["T"])[order]
    acc = np.concatenate(box["acc"])[order]
    v = acc[:, 1]
    aux = acc[:, 2]
    avals, xavals, _ = alpha.x_jets(Rc)
    dvds = -v * (xavals / avals) + aux
    return VelocityProfile(s=s, values=v, derivative=dvds, flow_time=float(t),
                           captures=Rc, T=Tc)


def _as_surface(x, group):
    if isinstance(x, SurfacePoint):
        return x
    return SurfacePoint(rep=reduce_batch(_as_matrix(x)[None], group)[0])


def arc_integral(f, arc, alpha, cfg=FlowConfig(), profile=None):
    """Line integral of f along the pushed arc against the U_alpha coframe,
    plus the plain arc integral and both running prefixes."""
    if profile is None:
        profile = velocity_profile(arc.base, arc.flow_time, arc.sigma, alpha,
                                   cfg, grid=arc.grid)
    s = profile.s
    fvals = f.eval_reduced(profile.captures)
    line = fvals * (-profile.values)
    pref_line = np.concatenate([[0.0], cumulative_simpson(line, x=s)])
    pref_plain = np.concatenate([[0.0], cumulative_simpson(fvals, x=s)])
    return ArcIntegralResult(
        line_integral=float(pref_line[-1]),
        plain_integral=float(pref_plain[-1]),
        prefix_line=pref_line,
        prefix_plain=pref_plain,
        sup_line=float(np.max(np.abs(pref_line))),
        sup_plain=float(np.max(np.abs(pref_plain))),
        profile=profile,
    )


def coboundary_arc_residual(cob, arc, alpha, cfg=FlowConfig()):
    """Residual of the coboundary arc identity at full arc length.

    Left side: the line integral of f = (Uu)/alpha.  Right side:
    u(gamma(sigma)) - u(gamma(0)) - int Xu along the arc, all evaluated on
    the same captured arc points.
    """
    res = arc_integral(cob, arc, alpha, cfg)
    caps = res.profile.captures
    uvals = cob.transfer_value(caps)
    xu = cob.transfer_x(caps)
    rhs = uvals[-1] - uvals[0] - float(
        cumulative_simpson(xu, x=res.profile.s)[-1])
    return res.line_integral - rhs, res


def arc_identity_residual(f, arc, alpha, cfg=FlowConfig()):
    """Residual of the by-parts arc identity (the +1/t orientation).

    Every term is produced by its own quadrature: F by the plain prefix,
    A by the velocity-weighted prefix, dv/ds by the closed formula.
    """
    res = arc_integral(f, arc, alpha, cfg)
    t = arc.flow_time
    s = res.profile.s
    v_sigma = res.profile.values[-1]
    inner = cumulative_simpson(res.profile.derivative * res.prefix_plain, x=s)[-1]
    rhs = (res.line_integral / t + (v_sigma / t + 1.0) * res.prefix_plain[-1]
           - inner / t)
    return float(res.prefix_plain[-1] - rhs), res


# -- tangent flow ---------------------------------------------------------------

def tangent_coefficients(x, t, which, alpha, cfg=FlowConfig()):
    """Inverse-Jacobian frame coefficients for the letters V and X.

    Quadratures along the orbit give, with G = X alpha/alpha - 1:
      X case:  a = int_0^t G,              b = 0, c = 1;
      V case:  a = int_0^t [V alpha/alpha + (2/alpha) int_0^tau G],
               b = 1,  c = 2 int_0^t 1/alpha  ( = 2 T(x,t) ).
    Verified against the finite-difference Jacobian by
    pushforward_residual.
    """
    if which not in ("V", "X"):
        raise ValueError("tangent coefficients cover the letters V and X")
    if t < 0.0:
        raise ValueError("tangent coefficients expect t >= 0")
    if t == 0.0:
        return TangentCoefficients(a=0.0, b=1.0 if which == "V" else 0.0,
                                   c=0.0 if which == "V" else 1.0,
                                   which=which, flow_time=0.0)
    R0 = _as_matrix(x)[None]
    if which == "X":
        eng = OrbitEngine(alpha.group, _velocity_components(alpha), 3,
                          cfg.engine(), col_scale=(1.0, 10.0, 1e3))
        box = {}

        def cb(j, idx, Rc, Tc, acc, ph):
            box["acc"] = acc

        eng.run_to_targets(R0, [float(t)], on_capture=cb)
        return TangentCoefficients(a=float(box["acc"][0, 1]), b=0.0, c=1.0,
                                   which="X", flow_time=float(t))

    va = alpha.as_observable.derive("V", 1)

    def comp(R):
        a, xa, _ = alpha.x_jets(R)
        g = xa - a
        return np.stack([a, g, va.eval_reduced(R), g.copy()], axis=1)

    eng = OrbitEngine(alpha.group, comp, 4, cfg.engine(),
                      moment_cols=(3,), col_scale=(1.0, 10.0, 10.0, 30.0))
    box = {}

    def cb(j, idx, Rc, Tc, acc, ph):
        box["acc"], box["T"] = acc, Tc

    eng.run_to_targets(R0, [float(t)], on_capture=cb)
    acc, T = box["acc"][0], float(box["T"][0])
    a_val = acc[2] + 2.0 * (T * acc[1] - acc[3])
    return TangentCoefficients(a=float(a_val), b=1.0, c=2.0 * T,
                               which="V", flow_time=float(t))


def pushforward_residual(x, t, which, alpha, cfg=FlowConfig(), eps=1e-5):
    """Finite-difference Jacobian oracle for the tangent coefficients.

    Flows x exp(+-eps omega) with omega = a U/alpha(x) + b V + c X in the
    universal cover and compares the transported direction with the target
    letter; returns the sup-norm coefficient residual.
    """
    coeff = tangent_coefficients(x, t, which, alpha, cfg)
    R = _as_matrix(x)
    a_here = float(alpha.value(R[None])[0])
    omega = (coeff.a / a_here) * sl2.U_MAT + coeff.b * sl2.V_MAT + coeff.c * sl2.X_MAT
    T0 = big_T(x, t, alpha, cfg)
    y = R @ sl2.exp_U(np.asarray(T0))
    deltas = []
    for sgn in (+1.0, -1.0):
        xp = R @ sl2.exp_general_taylor((omega[0, 1], omega[1, 0], 2.0 * omega[0, 0]),
                                        t=sgn * eps)
        Tp = big_T(SurfacePoint(rep=reduce_batch(xp[None], alpha.group)[0]),
                   t, alpha, cfg)
        # same cover sheet: compose the unreduced perturbed point directly
        yp = xp @ sl2.exp_U(np.asarray(Tp))
        deltas.append(sl2.log_near_identity(sl2.inv(y) @ yp, terms=6))
    D = (deltas[0] - deltas[1]) / (2.0 * eps)
    u, v, w = sl2.lie_coefficients(D)
    target = {"V": (0.0, 1.0, 0.0), "X": (0.0, 0.0, 1.0)}[which]
    return float(max(abs(u - target[0]), abs(v - target[1]), abs(w - target[2]))), coeff


# -- statistical identity checks -------------------------------------------------

def correlation_identity_check(f, g, t, sigma, alpha, ensemble, seed,
                               cfg=FlowConfig(), n_s=17):
    """Monte Carlo residual of the geodesic integration-by-parts formula.

    Both sides of
        <f o h^alpha_t, g> = (1/sigma) <P_sigma, g o phi^X_sigma>
                             - (1/sigma) int_0^sigma <P_S, Xg o phi^X_S> dS,
    with P_S(x) = int_0^S f(h^alpha_t phi^X_s x) ds and plain-volume pairing,
    are estimated on the same Haar sample; the report carries the residual
    and its standard error of the per-point differences.
    """
    group = alpha.group
    R = sample_haar(ensemble, group, seed)
    s_nodes = np.linspace(0.0, sigma, n_s)
    n = R.shape[0]
    stack = (R[:, None] @ sl2.exp_X(s_nodes)[None]).reshape(n * n_s, 2, 2)
    stack = reduce_batch(stack, group)
    fvals = np.empty(n * n_s)
    eng = _clock_engine(alpha, cfg.engine())

    def cb(j, idx, Rc, Tc, acc, ph):
        fvals[idx] = f.eval_reduced(Rc)

    eng.run_to_targets(stack, [float(t)], on_capture=cb)
    fvals = fvals.reshape(n, n_s)
    P = np.concatenate([np.zeros((n, 1)),
                        cumulative_simpson(fvals, x=s_nodes, axis=1)], axis=1)
    gvals = g.eval_reduced(R)
    xg = g.derive("X", 1)
    stack_r = stack.reshape(n, n_s, 2, 2)
    g_sigma = g.eval_reduced(reduce_batch(R @ sl2.exp_X(np.asarray(sigma)), group))
    xg_nodes = xg.eval_reduced(stack.reshape(-1, 2, 2)).reshape(n, n_s)
    inner = cumulative_simpson(P * xg_nodes, x=s_nodes, axis=1)[:, -1]
    lhs_i = fvals[:, 0] * gvals
    rhs_i = (P[:, -1] * g_sigma - inner) / sigma
    diff = lhs_i - rhs_i
    resid = float(np.mean(diff))
    stderr = float(np.std(diff) / np.sqrt(n))
    return resid, stderr


def arc_nodes_for(sigma, t, per_unit=110, n_min=129):
    """Arc grid resolution: the pushed arc oscillates on the s-scale 1/t,
    so composite-Simpson node counts grow like sigma * t."""
    n = max(n_min, int(np.ceil(per_unit * sigma * max(t, 1.0))))
    if n % 2:
        n += 1
    return n + 1


def coboundary_arc_battery(cob, alpha, n_arcs=100, t_min=10.0, t_max=1000.0,
                           seed=7310, cfg=FlowConfig(), sigma_cap=0.4,
                           sigma_t_cap=6.0, groups=7):
    """Residuals of the coboundary arc identity over random pushed arcs.

    Arcs are grouped on a log-spaced set of flow times so every group is one
    wide engine march (all bases and arc nodes together); sigma shrinks like
    1/t past sigma_t_cap to keep the oscillatory s-quadratures resolved.
    Returns (t values, sigma values, line integrals, residuals).
    """
    from .bolza import rng_for
    group = alpha.group
    t_vals = np.exp(np.linspace(np.log(t_min), np.log(t_max), groups))
    per = [n_arcs // groups + (1 if i < n_arcs % groups else 0)
           for i in range(groups)]
    rng = rng_for(seed, 31)
    out_t, out_sig, out_line, out_res = [], [], [], []
    comps = _velocity_components(alpha)
    for tg, n_b in zip(t_vals, per):
        sig = min(sigma_cap, sigma_t_cap / tg) * (0.75 + 0.5 * rng.random())
        N = arc_nodes_for(sig, tg)
        s = np.linspace(0.0, sig, N)
        bases = sample_haar(n_b, group, int(rng.integers(1 << 30)))
        stack = (bases[:, None] @ sl2.exp_X(s)[None]).reshape(n_b * N, 2, 2)
        stack = reduce_batch(stack, group)
        eng = OrbitEngine(group, comps, 3, cfg.engine(),
                          col_scale=(1.0, 10.0, 1e3))
        box = {}

        def cb(j, idx, Rc, Tc, acc, ph):
            for name, val in (("R", Rc), ("acc", acc), ("idx", idx)):
                box.setdefault(name, []).append(val)

        eng.run_to_targets(stack, [float(tg)], on_capture=cb)
        idx = np.concatenate(box["idx"])
        order = np.argsort(idx)
        caps = np.concatenate(box["R"])[order].reshape(n_b, N, 2, 2)
        v = np.concatenate(box["acc"])[order][:, 1].reshape(n_b, N)
        flat = caps.reshape(-1, 2, 2)
        fv = cob.eval_reduced(flat).reshape(n_b, N)
        uv = cob.transfer_value(flat).reshape(n_b, N)
        xu = cob.transfer_x(flat).reshape(n_b, N)
        line = cumulative_simpson(fv * (-v), x=s, axis=1)[:, -1]
        rhs = uv[:, -1] - uv[:, 0] - cumulative_simpson(xu, x=s, axis=1)[:, -1]
        out_t.extend([tg] * n_b)
        out_sig.extend([sig] * n_b)
        out_line.extend(line.tolist())
        out_res.extend((line - rhs).tolist())
    return (np.array(out_t), np.array(out_sig),
            np.array(out_line), np.array(out_res))


def bootstrap_certificate(alpha, cfg=FlowConfig(), seed=2024,
                          sigmas=(0.5, 0.25, 0.125, 0.0625),
                          t_probe=(4.0, 16.0, 64.0), n_x=12):
    """Empirical smallness certificate (sigma*, t*) for the bootstrap bound.

    sigma* is the largest probed sigma with
        sup |dv/ds| / t * sigma + sup |v/t + 1| < 0.9,
    t* the smallest probed t where the velocity term alone drops below 1/2.
    """
    group = alpha.group
    X0 = sample_haar(n_x, group, seed)
    t_star = None
    table = {}
    for sig in sorted(sigmas):
        worst = 0.0
        vel_only = {}
        for t in t_probe:
            m1 = m2 = 0.0
            for i in range(n_x):
                prof = velocity_profile(SurfacePoint(rep=X0[i]), t, sig, alpha,
                                        cfg, grid=np.linspace(0.0, sig, 17))
                m1 = max(m1, float(np.max(np.abs(prof.values / t + 1.0))))
                m2 = max(m2, float(np.max(np.abs(prof.derivative))) / t)
            vel_only[t] = m1
            worst = max(worst, m2 * sig + m1)
        table[sig] = worst
        if t_star is None:
            ok = [t for t in t_probe if vel_only[t] < 0.5]
            t_star = min(ok) if ok else float(t_probe[-1])
    sigma_star = max((s for s, w in table.items() if w < 0.9), default=min(sigmas))
    return float(sigma_star), float(t_star), table

"""Ensemble estimators: ergodic integrals, correlations, twisted integrals,
spectral densities and robust log-log exponent fits.

All estimators are driven by the orbit engine with a statistics-grade
quadrature (clock accuracy ~1e-6 per unit flow time, far below Monte Carlo
error) and a seeded counter-based sample of the invariant volume, so every
series is a deterministic function of (inputs, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from . import sl2
from .bolza import reduce_batch, sample_haar
from .observables import ObservablePack
from .orbits import EngineConfig, OrbitEngine

__all__ = [
    "CorrelationSeries", "ExponentFit", "SpectralEstimate", "TwistReport",
    "BirkhoffReport", "InsufficientSignal",
    "default_t_grid", "fit_loglog", "birkhoff_scan", "correlation_series",
    "correlation_adjoint_point", "coboundary_correlation", "twisted_scan",
    "spectral_estimate", "window_mass", "atom_excess", "local_dimension",
    "local_dimension_multi",
    "arc_average_decay", "tail_square_integral", "STATS_QUAD",
]

STATS_QUAD = EngineConfig(base_step=0.25, tol=1e-6, panel=0.25)


class InsufficientSignal(RuntimeError):
    """Raised when fewer than four points survive the noise floor."""


@dataclass(frozen=True)
class CorrelationSeries:
    t: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    ensemble: int
    seed: int
    label: str = ""


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    confidence_halfwidth: float     # 95 per cent
    window: tuple
    noise_floor: float
    n_used: int


@dataclass(frozen=True)
class BirkhoffReport:
    T: np.ndarray
    sup_abs: np.ndarray             # sup over the ensemble of |int_0^T f|
    rms: np.ndarray
    rms_err: np.ndarray
    sup_clock_dev: np.ndarray       # sup |T(x, script T) - script T|
    ensemble: int
    seed: int


@dataclass(frozen=True)
class TwistReport:
    T: np.ndarray
    norms: np.ndarray               # L2(vol_alpha) norms of the twisted integral
    errors: np.ndarray
    xi: float
    ensemble: int
    seed: int
    label: str = ""


@dataclass(frozen=True)
class SpectralEstimate:
    xi: np.ndarray
    density: np.ndarray
    total_mass: float
    leakage_bound: float
    window: str
    dt: float
    t_max: float


def default_t_grid(k_max=26, k_min=0):
    """Half-octave grid 2^(k/2); the standard abscissa for exponent fits."""
    return 2.0 ** (0.5 * np.arange(k_min, k_max + 1))


# -- exponent fits -------------------------------------------------------------

def fit_loglog(t, values, errors, window=None):
    """Error-weighted least squares for log |value| against log t.

    Points below the noise floor |value| < 3 error are excluded; fewer than
    four surviving points raises InsufficientSignal.  The 95 per cent
    halfwidth comes from the t-distribution on n-2 degrees of freedom.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = (t > 0) & (np.abs(v) > 3.0 * e)
    if window is not None:
        keep &= (t >= window[0]) & (t <= window[1])
    n = int(np.sum(keep))
    if n < 4:
        raise InsufficientSignal("only %d points above the noise floor" % n)
    x = np.log(t[keep])
    y = np.log(np.abs(v[keep]))
    sig = np.where(e[keep] > 0, e[keep] / np.abs(v[keep]), 1e-6)
    wgt = 1.0 / sig ** 2
    W = np.sum(wgt)
    xbar = np.sum(wgt * x) / W
    ybar = np.sum(wgt * y) / W
    sxx = np.sum(wgt * (x - xbar) ** 2)
    slope = np.sum(wgt * (x - xbar) * (y - ybar)) / sxx
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    dof = max(n - 2, 1)
    chi2 = np.sum(wgt * resid ** 2) / dof
    var_slope = max(chi2, 1.0) / sxx
    half = sps.t.ppf(0.975, dof) * np.sqrt(var_slope)
    return ExponentFit(slope=float(slope), intercept=float(intercept),
                       confidence_halfwidth=float(half),
                       window=(float(t[keep].min()), float(t[keep].max())),
                       noise_floor=float(3.0 * np.median(e)), n_used=n)


# -- ergodic integrals -----------------------------------------------------------

def _zero_avg_guard(f, alpha, label):
    if not (getattr(f, "zero_average", False) or hasattr(f, "transfer_value")):
        raise ValueError("%s expects a zero-averaged observable "
                         "(use project_zero_average or a coboundary)" % label)


def birkhoff_scan(f, alpha, ensemble, T_grid, seed, quad=STATS_QUAD):
    """Per-target sup and rms of int_0^T f o h^alpha, plus sup |T - script T|.

    One engine march per ensemble integrates (alpha, alpha f) along exact
    horocycle orbits; snapshots at each target give the ergodic integral and
    the clock deviation simultaneously.
    """
    _zero_avg_guard(f, alpha, "birkhoff_scan")
    T_grid = np.asarray(T_grid, dtype=float)
    group = alpha.group
    R = sample_haar(ensemble, group, seed)
    pack = ObservablePack([alpha.as_observable,
                           f.u if hasattr(f, "u") else f])

    if hasattr(f, "u"):           # coboundary: f = (Uu)/alpha, alpha f = Uu
        du = f.u.derive("U", 1)

        def comp(Rm):
            out = pack.eval(Rm)
            out[:, 1] = du.eval_reduced(Rm)
            return out
    else:
        def comp(Rm):
            out = pack.eval(Rm)
            out[:, 1] *= out[:, 0]
            return out

    eng = OrbitEngine(group, comp, 2, quad)
    sup_abs = np.zeros(T_grid.size)
    rms = np.zeros(T_grid.size)
    rms_err = np.zeros(T_grid.size)
    clock = np.zeros(T_grid.size)

    def cb(j, idx, Rc, Tc, acc, ph):
        B = acc[:, 1]
        sup_abs[j] = max(sup_abs[j], float(np.max(np.abs(B))))
        rms[j] += float(np.sum(B ** 2))
        rms_err[j] += float(np.sum(B ** 4))
        clock[j] = max(clock[j], float(np.max(np.abs(Tc - T_grid[j]))))

    eng.run_to_targets(R, T_grid, on_capture=cb)
    m2 = rms / ensemble
    m4 = rms_err / ensemble
    rms_v = np.sqrt(m2)
    # delta-method error of the rms from the variance of the squared values
    err = np.sqrt(np.maximum(m4 - m2 ** 2, 0.0) / ensemble) / np.maximum(2 * rms_v, 1e-30)
    return BirkhoffReport(T=T_grid, sup_abs=sup_abs, rms=rms_v, rms_err=err,
                          sup_clock_dev=clock, ensemble=ensemble, seed=seed)


# -- correlations -----------------------------------------------------------------

def correlation_series(f, g, alpha, ensemble, t_grid, seed, quad=STATS_QUAD,
                       label="correlation"):
    """Monte Carlo <f o h^alpha_t, g> against vol_alpha on a common grid.

    Haar samples carry weights alpha(x); f is read off at engine-captured
    clock times, so one march covers the whole grid.
    """
    _zero_avg_guard(f, alpha, "correlation_series")
    t_grid = np.asarray(t_grid, dtype=float)
    group = alpha.group
    R = sample_haar(ensemble, group, seed)
    w = alpha.value(R)
    gv = g.eval_reduced(R) if hasattr(g, "eval_reduced") else g(R)
    base = w * gv
    vals = np.zeros(t_grid.size)
    errs = np.zeros(t_grid.size)
    eng = OrbitEngine(group, lambda Rm: alpha.value(Rm)[:, None], 1, quad)

    def cb(j, idx, Rc, Tc, acc, ph):
        prod = base[idx] * f.eval_reduced(Rc)
        vals[j] += float(np.sum(prod))
        errs[j] += float(np.sum(prod ** 2))

    eng.run_to_targets(R, t_grid, on_capture=cb)
    mean = vals / ensemble
    var = np.maximum(errs / ensemble - mean ** 2, 0.0)
    return CorrelationSeries(t=t_grid, values=mean,
                             errors=np.sqrt(var / ensemble),
                             ensemble=ensemble, seed=seed, label=label)


def correlation_adjoint_point(f, g, alpha, t, ensemble, seed, quad=STATS_QUAD):
    """<f o h^alpha_{-t}, g> via the adjoint identity <f, g o h^alpha_t>."""
    group = alpha.group
    R = sample_haar(ensemble, group, seed)
    w = alpha.value(R)
    fv = f.eval_reduced(R)
    gv = np.empty(ensemble)
    eng = OrbitEngine(group, lambda Rm: alpha.value(Rm)[:, None], 1, quad)

    def cb(j, idx, Rc, Tc, acc, ph):
        gv[idx] = g.eval_reduced(Rc)

    eng.run_to_targets(R, [float(t)], on_capture=cb)
    prod = w * fv * gv
    return float(np.mean(prod)), float(np.std(prod) / np.sqrt(ensemble))


def coboundary_correlation(u, g, alpha, ensemble, t_grid, seed, quad=STATS_QUAD):
    """Correlation series for the coboundary f = (Uu)/alpha, plus the tail
    square-integrability diagnostic (finite iff the fitted slope < -1/2)."""
    from .observables import coboundary as make_cob
    cob = make_cob(u, alpha)
    series = correlation_series(cob, g, alpha, ensemble, t_grid, seed, quad,
                                label="coboundary correlation")
    return series


def tail_square_integral(series, fit):
    """sum |c|^2 dt over the grid plus the fitted power-law tail beyond it.

    The tail integral converges for slope < -1/2; infinite otherwise."""
    t, v = series.t, series.values
    mask = t > 0
    body = float(np.trapezoid(v[mask] ** 2, t[mask]))
    s = fit.slope
    t_max = float(series.t[-1])
    c_end = np.exp(fit.intercept) * t_max ** s
    if 2 * s + 1 < 0:
        tail = c_end ** 2 * t_max / (-(2 * s + 1))
    else:
        tail = np.inf
    return body + tail


# -- twisted integrals ------------------------------------------------------------

def twisted_scan(f, alpha, xi, ensemble, T_grid, seed, quad=STATS_QUAD,
                 label="twisted"):
    """L2(vol_alpha) growth of int_0^T e^{i xi t} f o h^alpha_t dt."""
    _zero_avg_guard(f, alpha, "twisted_scan")
    T_grid = np.asarray(T_grid, dtype=float)
    group = alpha.group
    R = sample_haar(ensemble, group, seed)
    w = alpha.value(R)
    pack = ObservablePack([alpha.as_observable,
                           f.u if hasattr(f, "u") else f])
    if hasattr(f, "u"):
        du = f.u.derive("U", 1)

        def comp(Rm):
            out = pack.eval(Rm)
            out[:, 1] = du.eval_reduced(Rm)
            return out
    else:
        def comp(Rm):
            out = pack.eval(Rm)
            out[:, 1] *= out[:, 0]
            return out

    eng = OrbitEngine(group, comp, 2, quad, xi=(float(xi),), phase_cols=(1,))
    norms = np.zeros(T_grid.size)
    errs = np.zeros(T_grid.size)

    def cb(j, idx, Rc, Tc, acc, ph):
        mod2 = ph[:, 0, 0, 0] ** 2 + ph[:, 0, 0, 1] ** 2
        wo = w[idx] * mod2
        norms[j] += float(np.sum(wo))
        errs[j] += float(np.sum(wo ** 2))

    eng.run_to_targets(R, T_grid, on_capture=cb)
    m = norms / ensemble
    var = np.maximum(errs / ensemble - m ** 2, 0.0)
    nrm = np.sqrt(m)
    err = np.sqrt(var / ensemble) / np.maximum(2.0 * nrm, 1e-30)
    return TwistReport(T=T_grid, norms=nrm, errors=err, xi=float(xi),
                       ensemble=ensemble, seed=seed, label=label)


def local_dimension_multi(u, alpha, xis, deltas, ensemble, seed,
                          quad=STATS_QUAD):
    """Fejer-window masses of the spectral measures around frequencies.

    For each delta = 1/T the mass estimate is (1/T^2) |int_0^T e^{i xi t}
    phi o h^alpha_t dt|^2 averaged over vol_alpha, computed in one march
    for every frequency and simultaneously for phi = f = U_alpha u and for
    the centred transfer function itself.  Returns (deltas descending,
    masses_f, masses_u, errors_f, fits) with per-xi leading axes.
    """
    from .observables import project_zero_average
    xis = tuple(float(x) for x in np.atleast_1d(xis))
    deltas = np.sort(np.asarray(deltas, dtype=float))[::-1]
    T_grid = np.sort(1.0 / deltas)
    group = alpha.group
    u0 = project_zero_average(u, alpha, 200000, seed + 13)
    R = sample_haar(ensemble, group, seed)
    w = alpha.value(R)
    pack = ObservablePack([alpha.as_observable, u0])
    du = u0.derive("U", 1)

    def comp(Rm):
        out3 = np.empty((Rm.shape[0], 3))
        pe = pack.eval(Rm)
        out3[:, 0] = pe[:, 0]
        out3[:, 1] = du.eval_reduced(Rm)      # alpha * U_alpha u = Uu
        out3[:, 2] = pe[:, 1] * pe[:, 0]      # alpha * u0
        return out3

    eng = OrbitEngine(group, comp, 3, quad, xi=xis, phase_cols=(1, 2))
    nx = len(xis)
    mf = np.zeros((nx, T_grid.size))
    mu = np.zeros((nx, T_grid.size))
    ef = np.zeros((nx, T_grid.size))

    def cb(j, idx, Rc, Tc, acc, ph):
        for jx in range(nx):
            m2f = ph[:, jx, 0, 0] ** 2 + ph[:, jx, 0, 1] ** 2
            m2u = ph[:, jx, 1, 0] ** 2 + ph[:, jx, 1, 1] ** 2
            mf[jx, j] += float(np.sum(w[idx] * m2f))
            mu[jx, j] += float(np.sum(w[idx] * m2u))
            ef[jx, j] += float(np.sum((w[idx] * m2f) ** 2))

    eng.run_to_targets(R, T_grid, on_capture=cb)
    mf /= ensemble
    mu /= ensemble
    varf = np.maximum(ef / ensemble - mf ** 2, 0.0)
    masses_f = (mf / T_grid ** 2)[:, ::-1]    # ordered like deltas descending
    masses_u = (mu / T_grid ** 2)[:, ::-1]
    errs_f = (np.sqrt(varf / ensemble) / T_grid ** 2)[:, ::-1]
    deltas_desc = 1.0 / T_grid[::-1]
    fits = [fit_loglog(deltas_desc, masses_f[jx], errs_f[jx])
            for jx in range(nx)]
    return deltas_desc, masses_f, masses_u, errs_f, fits


def local_dimension(u, alpha, xi, deltas, ensemble, seed, quad=STATS_QUAD):
    """Single-frequency window masses and the log-log dimension fit."""
    d, mf, mu, ef, fits = local_dimension_multi(u, alpha, (xi,), deltas,
                                                ensemble, seed, quad)
    return d, mf[0], mu[0], ef[0], fits[0]


# -- spectral density --------------------------------------------------------------

_HANN_SIDELOBE = 2.67e-2   # first sidelobe of the Hann transform


def spectral_estimate(series, window="hann", n_xi=1024):
    """Windowed cosine-transform density of the spectral measure.

    The series must sit on a uniform grid from t = 0; real symmetric
    extension is implied.  Density, total mass over one period and a
    leakage bound (sidelobe level times total variation) are returned.
    """
    t = np.asarray(series.t, dtype=float)
    c = np.asarray(series.values, dtype=float)
    if t[0] != 0.0:
        raise ValueError("spectral_estimate needs a grid starting at 0")
    dt = t[1] - t[0]
    if np.max(np.abs(np.diff(t) - dt)) > 1e-9 * dt:
        raise ValueError("spectral_estimate needs a uniform grid")
    if window != "hann":
        raise ValueError("only the Hann window is implemented")
    t_max = t[-1]
    W = 0.5 * (1.0 + np.cos(np.pi * t / t_max))
    xi = np.linspace(0.0, np.pi / dt, n_xi)
    cw = c * W
    density = (dt / np.pi) * (0.5 * cw[0]
                              + np.cos(np.outer(xi, t[1:])) @ cw[1:])
    total = 2.0 * np.trapezoid(density, xi)
    # a window sidelobe can misplace at most this much of the total mass
    leakage = _HANN_SIDELOBE * float(abs(c[0]))
    return SpectralEstimate(xi=xi, density=density, total_mass=float(total),
                            leakage_bound=leakage, window=window,
                            dt=float(dt), t_max=float(t_max))


def window_mass(est, xi0, delta):
    """Mass of the density estimate in [xi0 - delta, xi0 + delta]."""
    sel = (est.xi >= xi0 - delta) & (est.xi <= xi0 + delta)
    if np.sum(sel) < 2:
        return 0.0
    return float(np.trapezoid(est.density[sel], est.xi[sel]))


def atom_excess(est, band):
    """Largest main-lobe window mass in a band, less the local background.

    A mass point of the spectral measure would concentrate inside one main
    lobe of the window (halfwidth 2 pi / t_max); for an absolutely
    continuous estimate the excess stays at the leakage level, so values
    well above est.leakage_bound flag an atom."""
    lobe = 2.0 * np.pi / est.t_max
    centers = est.xi[(est.xi >= band[0]) & (est.xi <= band[1])]
    worst = 0.0
    for x0 in centers[:: max(1, centers.size // 160)]:
        mass = window_mass(est, x0, lobe)
        ring = window_mass(est, x0, 3 * lobe) - mass
        background = max(ring / 4.0, 0.0)   # per-lobe continuous level
        worst = max(worst, mass - 2.0 * background)
    return worst


def arc_average_decay(u, alpha, sigma, n_x, t_grid, seed, quad=None,
                      per_unit=110):
    """Sup over sample points of the plain arc integral of the coboundary.

    The pushed arcs oscillate on the s-scale 1/t, so the arc quadrature uses
    node counts growing like sigma t; costs confine the default grid to
    moderate times.  Returns (t_grid, sup values, fit)."""
    from .observables import coboundary as make_cob
    from .flows import FlowConfig, arc_nodes_for
    cob = make_cob(u, alpha)
    group = alpha.group
    quad = quad or EngineConfig(base_step=0.125, tol=1e-9, panel=0.25)
    t_grid = np.asarray(t_grid, dtype=float)
    bases = sample_haar(n_x, group, seed)
    sups = np.zeros(t_grid.size)
    from scipy.integrate import cumulative_simpson
    for j, tg in enumerate(t_grid):
        N = arc_nodes_for(sigma, tg, per_unit=per_unit)
        s = np.linspace(0.0, sigma, N)
        stack = (bases[:, None] @ sl2.exp_X(s)[None]).reshape(n_x * N, 2, 2)
        stack = reduce_batch(stack, group)
        eng = OrbitEngine(group, lambda Rm: alpha.value(Rm)[:, None], 1, quad)
        fv = np.empty(n_x * N)

        def cb(jj, idx, Rc, Tc, acc, ph):
            fv[idx] = cob.eval_reduced(Rc)

        eng.run_to_targets(stack, [float(tg)], on_capture=cb)
        F = cumulative_simpson(fv.reshape(n_x, N), x=s, axis=1)[:, -1]
        sups[j] = float(np.max(np.abs(F)))
    fit = fit_loglog(t_grid, sups, np.zeros_like(sups))
    return t_grid, sups, fit

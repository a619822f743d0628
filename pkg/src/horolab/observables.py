"""Exactly invariant smooth observables and the time-change function.

An observable is a finite sum of translated frame bumps

    f(g) = offset + sum_bumps coeff * sum_{gamma in ball}
           phi( (cosh d(bp(gamma g), z0) - 1) / w^2 ) * cos(m * theta(gamma g)),

with phi(s) = exp(-1/(1-s)) for s < 1 and 0 otherwise.  The ball is a
finite piece of the group baked into the observable, large enough that the
sum covers every translate whose support can meet the evaluation zone
(reduced representatives plus a drift allowance); invariance is then exact,
not truncated.

Evaluation never forms a matrix product: both the Cayley entry A and the
support variable P = B - z0 conj(A) of gamma g are linear in the entries of
g, so all translates of all bumps reduce to two stacked real matmuls
against vec(g).  In those variables

    cosh d(bp, z0) - 1 = 2 |P|^2 / (1 - |z0|^2),
    cos(m theta)       = Re(A^{2m}) / |A|^{2m},

and the profile exponential is only evaluated on the small fraction of
(translate, point) pairs that lie inside a support.  Directional
derivatives along U, V, X come from jet arithmetic on the same functionals
applied to g W and g W^2 (exact chain rule; see jets.py).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import sl2
from .bolza import SYSTOLE, sample_haar
from .jets import Jet1, Jet2

__all__ = [
    "PROFILE_ID", "profile_integral", "bump_profile",
    "Observable", "DerivedObservable", "CoboundaryObservable", "ObservablePack",
    "TimeChange", "GraphNormReport",
    "make_bump_observable", "build_time_change", "project_zero_average",
    "coboundary", "graph_norm", "exact_vol_mean",
]

PROFILE_ID = "exp_inv"

# drift allowance for engine evaluations at un-reduced offsets from a
# reduced panel start (basepoints move at unit speed along orbits)
EVAL_DRIFT = 0.35

_CA = 0.5 * np.array([[1.0, 1.0j], [-1.0j, 1.0]])
_CB = 0.5 * np.array([[1.0, -1.0j], [-1.0j, -1.0]])


def profile_integral():
    """int_0^1 exp(-1/(1-s)) ds, the bump profile mass (cached)."""
    global _IPHI
    try:
        return _IPHI
    except NameError:
        _IPHI = quad(lambda s: np.exp(-1.0 / (1.0 - s)), 0.0, 1.0,
                     epsabs=1e-14, epsrel=1e-13)[0]
        return _IPHI


def bump_profile(s):
    """phi(s) = exp(-1/(1-s)) on s < 1, else 0 (C-infinity, compact support)."""
    s = np.asarray(s, dtype=float)
    inside = s < 1.0 - 1e-12
    out = np.zeros_like(s)
    sv = np.where(inside, s, 0.0)
    out[inside] = np.exp(-1.0 / (1.0 - sv))[inside]
    return out


@dataclass(frozen=True)
class BumpSpec:
    """One logical bump with its baked-in covering translates."""

    center: complex
    width: float
    harmonic: int
    coeff: float
    gammas: np.ndarray          # (T, 2, 2) covering translates

    @property
    def support_radius(self):
        return float(np.arccosh(1.0 + self.width ** 2))


class _Kernel:
    """Stacked functional form of a list of weighted bumps plus an offset.

    Rows enumerate (bump, translate) pairs; columns act on vec(g).  Output
    columns of eval are defined by segments so several observables can share
    one pass (see ObservablePack).
    """

    def __init__(self, entries, offsets, n_cols):
        # entries: list of (col, bump) with scalar weights folded into coeff
        self.n_cols = n_cols
        self.offsets = np.asarray(offsets, dtype=float)
        rows_A, rows_P, kappa, coeff, ms, cols = [], [], [], [], [], []
        for col, b, scale in entries:
            lp_mat = _CB - b.center * np.conj(_CA)
            for t in range(b.gammas.shape[0]):
                gT = b.gammas[t].T
                rows_A.append((gT @ _CA).reshape(4))
                rows_P.append((gT @ lp_mat).reshape(4))
                kappa.append(2.0 / (b.width ** 2 * (1.0 - abs(b.center) ** 2)))
                coeff.append(b.coeff * scale)
                ms.append(b.harmonic)
                cols.append(col)
        self.T = len(rows_A)
        if self.T:
            LA = np.array(rows_A)
            LP = np.array(rows_P)
            self.LA_re = np.ascontiguousarray(LA.real)
            self.LA_im = np.ascontiguousarray(LA.imag)
            self.LP_re = np.ascontiguousarray(LP.real)
            self.LP_im = np.ascontiguousarray(LP.imag)
            self.kappa = np.array(kappa)
            self.coeff = np.array(coeff)
            self.ms = np.array(ms, dtype=int)
            self.cols = np.array(cols, dtype=int)
            self.any_harmonic = bool(np.any(self.ms != 0))
            self.m_unique = [int(m) for m in np.unique(self.ms) if m != 0]
            # per-column row selector matrix for the final contraction
            self.sel = np.zeros((n_cols, self.T))
            self.sel[self.cols, np.arange(self.T)] = self.coeff

    def _chi(self, Are, Aim, rows):
        """cos(m theta) on a flat subset, grouped by harmonic order."""
        chi = np.ones_like(Are)
        m_rows = self.ms[rows]
        for m in self.m_unique:
            pick = m_rows == m
            if not np.any(pick):
                continue
            A = Are[pick] + 1j * Aim[pick]
            Apow = A ** (2 * m)
            chi[pick] = Apow.real / np.abs(Apow)
        return chi

    def eval(self, R):
        """Plain values, shape (n, n_cols)."""
        n = R.shape[0]
        out = np.broadcast_to(self.offsets, (n, self.n_cols)).copy()
        if not self.T:
            return out
        R4 = R.reshape(n, 4).T
        Pre = self.LP_re @ R4
        Pim = self.LP_im @ R4
        s = self.kappa[:, None] * (Pre * Pre + Pim * Pim)
        inside = s < 1.0 - 1e-12
        ii = np.nonzero(inside)
        if ii[0].size:
            vals = np.zeros_like(s)
            w = np.exp(-1.0 / (1.0 - s[ii]))
            if self.any_harmonic:
                Are = (self.LA_re @ R4)[ii]
                Aim = (self.LA_im @ R4)[ii]
                w = w * self._chi(Are, Aim, ii[0])
            vals[ii] = w
            out += (self.sel @ vals).T
        return out

    def eval_jet(self, comps):
        """Jet values per column; comps are the vec'd matrix jet parts.

        The support mask is found from the value component alone (two real
        matmuls); every jet operation then runs on the flat in-support
        subset, so off-support work is a scatter of zeros.
        """
        from .jets import jabs2, jpow_int, jreal
        n = comps[0].shape[0]
        order2 = len(comps) == 3
        make_out = (lambda: Jet1(*(np.zeros((n, self.n_cols)) for _ in range(3)))) \
            if order2 else \
            (lambda: Jet2(*(np.zeros((n, self.n_cols)) for _ in range(4))))
        out = make_out()
        out.a += self.offsets
        if not self.T:
            return out
        R4 = comps[0].T
        Pre = self.LP_re @ R4
        Pim = self.LP_im @ R4
        s_val = self.kappa[:, None] * (Pre * Pre + Pim * Pim)
        rows, cols = np.nonzero(s_val < 1.0 - 1e-12)
        if rows.size == 0:
            return out

        def functional(L, j):
            # row-wise complex pairing on the in-support subset only
            vals = []
            for c in comps:
                if c is None:
                    vals.append(np.zeros(rows.size, dtype=complex))
                else:
                    vals.append(np.einsum("kj,kj->k", L[rows], c[cols]))
            return Jet1(*vals) if order2 else Jet2(*vals)

        LP = self.LP_re + 1j * self.LP_im
        P = functional(LP, comps)
        s = jabs2(P) * self.kappa[rows]
        w = (-((1.0 - s).reciprocal())).exp()
        m_rows = self.ms[rows]
        if self.any_harmonic and np.any(m_rows != 0):
            LA = self.LA_re + 1j * self.LA_im
            A = functional(LA, comps)
            chi = _jconst_like(w, np.ones(rows.size))
            for m in self.m_unique:
                pick = m_rows == m
                if not np.any(pick):
                    continue
                Apow = jpow_int(_jrows(A, pick), 2 * m)
                mag = jpow_int(jabs2(_jrows(A, pick)), m)
                _jsetrows(chi, pick, jreal(Apow) / mag)
            w = w * chi
        w = w * self.coeff[rows]
        tgt = (cols, self.cols[rows])
        for name in out.__slots__:
            np.add.at(getattr(out, name), tgt, getattr(w, name))
        return out


def _jmap(j, f):
    if isinstance(j, Jet1):
        return Jet1(f(j.a), f(j.b), f(j.c))
    return Jet2(f(j.a), f(j.b), f(j.c), f(j.d))


def _jrows(j, rows):
    return _jmap(j, lambda x: x[rows])


def _jsetrows(j, rows, val):
    for name in j.__slots__:
        getattr(j, name)[rows] = getattr(val, name)


def _jconst_like(j, value):
    def z(x):
        return np.zeros_like(value)
    out = _jmap(j, z)
    out.a = out.a + value
    return out


def _vec_mul(c, W):
    """vec(M W) from vec(M) for a basis letter W, without matrix products."""
    a, b, cc, d = c[:, 0], c[:, 1], c[:, 2], c[:, 3]
    if W == "U":
        return np.stack([np.zeros_like(a), a, np.zeros_like(a), cc], axis=1)
    if W == "V":
        return np.stack([b, np.zeros_like(a), d, np.zeros_like(a)], axis=1)
    return np.stack([0.5 * a, -0.5 * b, 0.5 * cc, -0.5 * d], axis=1)


def _matrix_jet_vec(R, word):
    """vec'd Taylor components of R exp(e1 W1) [exp(e2 W2)]."""
    n = R.shape[0]
    v0 = R.reshape(n, 4)
    if not word:
        return [v0]
    if len(word) == 1:
        return [v0, _vec_mul(v0, word[0]), None]
    if word[1] is None:               # order 2 along one letter
        v1 = _vec_mul(v0, word[0])
        return [v0, v1, 0.5 * _vec_mul(v1, word[0])]
    v1 = _vec_mul(v0, word[0])
    return [v0, v1, _vec_mul(v0, word[1]), _vec_mul(v1, word[1])]


class Observable:
    """Gamma-invariant smooth function with analytic U/V/X derivatives."""

    def __init__(self, bumps, offset, group):
        self.bumps = tuple(bumps)
        self.offset = float(offset)
        self.group = group
        self.projection_stderr = 0.0   # set by project_zero_average
        self.zero_average = False      # certified by project_zero_average
        self._kernel = _Kernel([(0, b, 1.0) for b in self.bumps],
                               [self.offset], 1)

    # spec-shaped term list: (gamma, profile id, center, width, m, coeff)
    @property
    def terms(self):
        out = []
        for b in self.bumps:
            for g in b.gammas:
                out.append((g, PROFILE_ID, b.center, b.width, b.harmonic, b.coeff))
        return out

    def sup_bound(self):
        """Certified sup bound: translate supports are pairwise disjoint
        because every support radius is below the injectivity radius."""
        return abs(self.offset) + sum(abs(b.coeff) * np.exp(-1.0) for b in self.bumps)

    def eval_reduced(self, R):
        """Values at matrices within EVAL_DRIFT of reduced representatives."""
        return self._kernel.eval(np.asarray(R, dtype=float))[:, 0]

    def eval_jet1(self, R, direction, order=1):
        word = (direction,) if order == 1 else (direction, None)
        comps = _matrix_jet_vec(np.asarray(R, dtype=float), word)
        j = self._kernel.eval_jet(comps)
        return _jmap(j, lambda x: x[:, 0])

    def eval_jet2(self, R, dir1, dir2):
        comps = _matrix_jet_vec(np.asarray(R, dtype=float), (dir1, dir2))
        j = self._kernel.eval_jet(comps)
        return _jmap(j, lambda x: x[:, 0])

    def value(self, R):
        return self.eval_reduced(R)

    def __call__(self, g):
        """Evaluate at arbitrary group elements (reduces first)."""
        from .bolza import reduce_batch
        m = g.mat if isinstance(g, sl2.GroupElement) else np.asarray(g, dtype=float)
        single = m.ndim == 2
        R = reduce_batch(m[None] if single else m, self.group)
        out = self.eval_reduced(R)
        return float(out[0]) if single else out

    def derive(self, direction, order=1):
        return derive(self, direction, order)

    def with_offset(self, offset):
        clone = Observable(self.bumps, offset, self.group)
        clone.projection_stderr = self.projection_stderr
        clone.zero_average = self.zero_average
        return clone


class ObservablePack:
    """Several observables evaluated in one stacked pass (n, n_obs)."""

    def __init__(self, observables):
        self.observables = list(observables)
        entries = []
        offsets = []
        for col, f in enumerate(self.observables):
            offsets.append(f.offset)
            for b in f.bumps:
                entries.append((col, b, 1.0))
        self._kernel = _Kernel(entries, offsets, len(self.observables))

    def eval(self, R):
        return self._kernel.eval(np.asarray(R, dtype=float))


class DerivedObservable:
    """Analytic directional derivative of an observable, itself evaluable."""

    def __init__(self, base, word):
        self.base = base
        self.word = tuple(word)
        self.group = base.group
        if len(self.word) > 2:
            raise ValueError("derivatives available up to total order 2")

    def eval_reduced(self, R):
        R = np.asarray(R, dtype=float)
        if len(self.word) == 1:
            return self.base.eval_jet1(R, self.word[0], order=1).d1()
        if self.word[0] == self.word[1]:
            return self.base.eval_jet1(R, self.word[0], order=2).d2()
        # d12 of f(R e^{e1 W1} e^{e2 W2}) is (W1 (W2 f))(R)
        return self.base.eval_jet2(R, self.word[0], self.word[1]).d12()

    def value(self, R):
        return self.eval_reduced(R)

    def __call__(self, g):
        from .bolza import reduce_batch
        m = g.mat if isinstance(g, sl2.GroupElement) else np.asarray(g, dtype=float)
        single = m.ndim == 2
        R = reduce_batch(m[None] if single else m, self.group)
        out = self.eval_reduced(R)
        return float(out[0]) if single else out

    def derive(self, direction, order=1):
        if order != 1 or len(self.word) != 1:
            raise ValueError("only one further first-order derivative is available")
        return DerivedObservable(self.base, (direction,) + self.word)


def derive(f, direction, order=1):
    """Analytic derivative evaluator along U, V or X (order 1, or 2 for U/X)."""
    if direction not in ("U", "V", "X"):
        raise ValueError("direction must be U, V or X")
    if order == 1:
        return DerivedObservable(f, (direction,))
    if order == 2:
        if direction == "V":
            raise ValueError("second derivatives are provided along U and X only")
        return DerivedObservable(f, (direction, direction))
    raise ValueError("order must be 1 or 2")


def make_bump_observable(center, width, harmonic, group, coeff=1.0):
    """Bump observable around a disk point, exactly invariant by construction.

    The covering ball keeps every translate gamma whose bump support
    B(gamma^{-1} z0, support radius) can reach a basepoint within
    circumradius + EVAL_DRIFT of the origin.
    """
    if width >= 0.5 * SYSTOLE:
        raise ValueError("bump width must stay below half the systole")
    z0 = center.z if isinstance(center, sl2.DiskPoint) else complex(center)
    if abs(z0) >= 1.0:
        raise ValueError("bump center must lie inside the disk")
    supp = float(np.arccosh(1.0 + width ** 2))
    reach = group.reduction_radius + EVAL_DRIFT + supp
    d0 = float(sl2.dist_disk(0.0, z0))
    ball = group.ball(reach + d0 + 0.05)
    inv_centers = sl2.mobius(sl2.inv(ball), z0)
    keep = sl2.dist_disk(0.0, inv_centers) <= reach + 1e-9
    bump = BumpSpec(center=z0, width=float(width), harmonic=int(harmonic),
                    coeff=float(coeff), gammas=np.ascontiguousarray(ball[keep]))
    return Observable([bump], 0.0, group)


def exact_vol_mean(f):
    """Mean against normalised Haar by unfolding the Poincare sum.

    Frame harmonics integrate to zero; an m = 0 bump unfolds to
    2 pi w^2 int phi over the whole disk, divided by vol(M) = 4 pi.
    """
    total = f.offset
    for b in f.bumps:
        if b.harmonic == 0:
            total += b.coeff * 0.5 * b.width ** 2 * profile_integral()
    return total


@dataclass(frozen=True)
class GraphNormReport:
    l2: float
    l2_of_X_derivative: float
    graph_norm: float
    stderr: float = 0.0


def graph_norm(g_obs, quad_n, group, seed=1101):
    """Monte Carlo graph norm (|g|_0^2 + |Xg|_0^2)^(1/2) against Haar."""
    if not hasattr(g_obs, "derive"):
        raise ValueError("graph_norm needs an analytic X derivative")
    R = sample_haar(quad_n, group, seed)
    vals = g_obs.eval_reduced(R)
    xvals = g_obs.derive("X", 1).eval_reduced(R)
    m2 = float(np.mean(vals ** 2))
    x2 = float(np.mean(xvals ** 2))
    se = float(np.std(vals ** 2) / np.sqrt(quad_n))
    return GraphNormReport(l2=np.sqrt(m2), l2_of_X_derivative=np.sqrt(x2),
                           graph_norm=np.sqrt(m2 + x2), stderr=se)


# -- time change -------------------------------------------------------------

class TimeChange:
    """alpha = norm_constant (1 + epsilon f0), strictly positive, unit mass.

    The normalisation integral is evaluated by exact unfolding of the bump
    sums (see exact_vol_mean), so int alpha vol = 1 to quadrature precision
    far below 1e-6.  Internally alpha is itself an Observable, so all the
    fast evaluation and jet machinery applies unchanged.
    """

    def __init__(self, base, epsilon, norm_constant, gap):
        self.base = base
        self.epsilon = float(epsilon)
        self.norm_constant = float(norm_constant)
        self.gap = gap
        self.group = base.group
        scaled = [BumpSpec(b.center, b.width, b.harmonic,
                           b.coeff * norm_constant * epsilon, b.gammas)
                  for b in base.bumps] if epsilon != 0.0 else []
        self.as_observable = Observable(
            scaled, norm_constant * (1.0 + epsilon * base.offset), base.group)
        sup_dev = self.as_observable.sup_bound() - abs(self.as_observable.offset)
        self.alpha_min = self.as_observable.offset - sup_dev
        if self.alpha_min <= 0.0:
            raise ValueError("time change is not certifiably positive")

    def value(self, R):
        return self.as_observable.eval_reduced(R)

    def x_jets(self, R):
        """(alpha, X alpha, X^2 alpha) in one jet pass."""
        j = self.as_observable.eval_jet1(R, "X", order=2)
        return j.value(), j.d1(), j.d2()

    def d_alpha(self, R, direction):
        return self.as_observable.eval_jet1(R, direction, order=1).d1()

    @property
    def is_trivial(self):
        return self.epsilon == 0.0


def build_time_change(f0, epsilon, gap, quad_n=0):
    """Normalise c (1 + eps f0) to unit vol-mass and certify positivity."""
    sup = f0.sup_bound()
    if abs(epsilon) * sup > 0.5:
        raise ValueError("epsilon * sup|f0| must stay below 1/2")
    m0 = exact_vol_mean(f0)
    c0 = 1.0 / (1.0 + epsilon * m0)
    return TimeChange(base=f0, epsilon=epsilon, norm_constant=c0, gap=gap)


def project_zero_average(f, alpha, quad_n, seed):
    """Subtract the Monte Carlo vol_alpha mean; the estimate's standard error
    is stored on the result as a bias floor for downstream fits."""
    R = sample_haar(quad_n, alpha.group, seed)
    w = alpha.value(R)
    vals = f.eval_reduced(R)
    prod = w * vals
    mean = float(np.mean(prod))
    stderr = float(np.std(prod) / np.sqrt(quad_n))
    out = f.with_offset(f.offset - mean)
    out.projection_stderr = stderr
    out.zero_average = True
    return out


class CoboundaryObservable:
    """f = U_alpha u = (Uu)/alpha; zero vol_alpha average by construction.

    Exposes the transfer function u and Xu for the arc identity tests.
    """

    def __init__(self, u, alpha):
        self.u = u
        self.alpha = alpha
        self.group = u.group
        self._du = u.derive("U", 1)
        self._xu = u.derive("X", 1)

    def eval_reduced(self, R):
        return self._du.eval_reduced(R) / self.alpha.value(R)

    def value(self, R):
        return self.eval_reduced(R)

    def __call__(self, g):
        from .bolza import reduce_batch
        m = g.mat if isinstance(g, sl2.GroupElement) else np.asarray(g, dtype=float)
        single = m.ndim == 2
        R = reduce_batch(m[None] if single else m, self.group)
        out = self.eval_reduced(R)
        return float(out[0]) if single else out

    def transfer_value(self, R):
        return self.u.eval_reduced(R)

    def transfer_x(self, R):
        return self._xu.eval_reduced(R)


def coboundary(u, alpha):
    return CoboundaryObservable(u, alpha)

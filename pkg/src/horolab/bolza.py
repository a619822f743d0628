"""The Bolza surface as a concrete compact quotient of PSL(2,R).

The group is generated by the eight side pairings of the regular hyperbolic
octagon centred at the origin.  In SU(1,1) form the generators are

    [[ 1+sqrt(2),              sqrt(2+2 sqrt 2) e^{ik pi/4} ],
     [ sqrt(2+2 sqrt 2) e^{-ik pi/4},  1+sqrt(2)            ]],   k = 0..7,

with generator k+4 the inverse of generator k.  Each has |trace| =
2(1+sqrt 2) and displaces the origin by the systole 2 arccosh(1+sqrt 2).

Reduction to the fundamental domain is greedy descent on the origin
distance of the basepoint, which for unit-determinant matrices is a
monotone function of the Frobenius norm (see sl2.cosh_origin_dist).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sl2

__all__ = [
    "SQRT2", "GEN_TRACE", "SYSTOLE",
    "SpectralGapParams", "FuchsianGroup", "SurfacePoint",
    "bolza_group", "reduce_batch", "reduce_point", "group_ball",
    "sample_haar", "sample_vol_alpha", "rng_for", "frame_matrix",
    "BOLZA_MU0",
]

SQRT2 = np.sqrt(2.0)
GEN_TRACE = 2.0 * (1.0 + SQRT2)
SYSTOLE = 2.0 * np.arccosh(1.0 + SQRT2)

# smallest positive Laplace eigenvalue of the Bolza surface (literature
# value, used only as a regression target, never in simulation)
BOLZA_MU0 = 3.8389

_REDUCE_CAP = 10000
_DESCENT_TOL = 1e-12


@dataclass(frozen=True)
class SpectralGapParams:
    """Spectral gap data (mu0, nu0, eps0) controlling the decay exponents."""

    mu0: float
    nu0: float
    eps0: int

    @classmethod
    def from_mu0(cls, mu0):
        if mu0 <= 0.0:
            raise ValueError("mu0 must be positive")
        nu0 = np.sqrt(1.0 - 4.0 * mu0) if mu0 < 0.25 else 0.0
        eps0 = 1 if mu0 == 0.25 else 0
        return cls(mu0=float(mu0), nu0=float(nu0), eps0=eps0)


@dataclass(frozen=True)
class SurfacePoint:
    """Fundamental-domain representative of a point of Gamma \\ PSL(2,R)."""

    rep: np.ndarray
    last_word_length: int = 0

    def __post_init__(self):
        m = np.asarray(self.rep, dtype=float)
        object.__setattr__(self, "rep", m)
        m.setflags(write=False)

    def basepoint(self):
        return complex(sl2.basepoint(self.rep))

    def origin_dist(self):
        return float(np.arccosh(sl2.cosh_origin_dist(self.rep)))


@dataclass(frozen=True)
class FuchsianGroup:
    """Bolza side pairings plus cached octagon geometry."""

    generators: np.ndarray          # (8, 2, 2)
    reduction_radius: float         # circumradius of the Dirichlet octagon
    inradius: float
    _ball_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def generator(self, k):
        return sl2.GroupElement(self.generators[k % 8])

    def ball(self, radius):
        key = round(float(radius), 9)
        if key not in self._ball_cache:
            self._ball_cache[key] = group_ball(self, radius)
        return self._ball_cache[key]


def _su11_generators():
    diag = 1.0 + SQRT2
    off = np.sqrt(2.0 + 2.0 * SQRT2)
    mats = np.zeros((8, 2, 2), dtype=complex)
    for k in range(8):
        phase = np.exp(1j * k * np.pi / 4.0)
        mats[k, 0, 0] = diag
        mats[k, 0, 1] = off * phase
        mats[k, 1, 0] = off * np.conj(phase)
        mats[k, 1, 1] = diag
    return mats


def _octagon_radii(gens):
    """Circumradius and inradius of the Dirichlet octagon at the origin.

    The inradius is half the generator displacement.  The circumradius is
    found on the mid-direction between two adjacent side pairings by solving
    d(0, z) = min_k d(0, gamma_k z) along that ray (1D bisection; the
    difference is monotone through the vertex).
    """
    p0 = complex(sl2.basepoint(gens[0]))
    inr = 0.5 * sl2.dist_disk(0.0, p0)

    direction = np.exp(1j * np.pi / 8.0)

    def gap(rho):
        z = np.tanh(0.5 * rho) * direction
        best = min(sl2.dist_disk(0.0, sl2.mobius(gens[k], z)) for k in range(8))
        return sl2.dist_disk(0.0, z) - best

    lo, hi = inr, 4.0
    if gap(hi) < 0:
        raise RuntimeError("octagon vertex search bracket failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gap(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), float(inr)


def bolza_group():
    """Construct the Bolza group and self-check its invariants."""
    su = _su11_generators()
    gens = np.stack([sl2.cayley_to_sl2r(su[k]) for k in range(8)])
    traces = gens[:, 0, 0] + gens[:, 1, 1]
    if np.max(np.abs(np.abs(traces) - GEN_TRACE)) > 1e-10:
        raise RuntimeError("Bolza generator traces off")
    for k in range(4):
        prod = sl2.mul(gens[k + 4], gens[k])
        if np.max(np.abs(sl2.canonical_sign(prod) - np.eye(2))) > 1e-10:
            raise RuntimeError("generator %d+4 is not the inverse of %d" % (k, k))
    circ, inr = _octagon_radii(gens)
    return FuchsianGroup(generators=gens, reduction_radius=float(circ), inradius=inr)


# -- fundamental domain reduction -------------------------------------------

def reduce_batch(R, group, return_words=False, cap=_REDUCE_CAP):
    """Greedy descent of the origin distance over left generator multiples.

    Works on (n,2,2) stacks; terminates when no generator lowers the
    basepoint distance by more than 1e-12.  Ties pick the lowest generator
    index.  Returns sign-canonical representatives.
    """
    R = np.atleast_3d(np.asarray(R, dtype=float))
    if R.ndim == 2:
        R = R[None]
    R = sl2.renormalize(R.copy())
    n = R.shape[0]
    gens = group.generators
    words = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    for iteration in range(cap):
        sub = R[active]
        cur = np.arccosh(np.maximum(sl2.cosh_origin_dist(sub), 1.0))
        # candidate distances for all 8 generators at once
        cand = np.einsum("kij,njl->knil", gens, sub)
        cd = np.arccosh(np.maximum(sl2.cosh_origin_dist(cand), 1.0))
        best = np.min(cd, axis=0)
        improve = best < cur - _DESCENT_TOL
        if not np.any(improve):
            break
        idx = np.argmax(cd <= best[None, :] + _DESCENT_TOL, axis=0)
        moving = active[improve]
        R[moving] = cand[idx[improve], improve]
        words[moving] += 1
        active = moving
        if active.size == 0:
            break
    else:
        raise RuntimeError("reduction did not terminate within %d sweeps" % cap)
    R = sl2.canonical_sign(sl2.renormalize(R))
    if return_words:
        return R, words
    return R


def reduce_point(g, group):
    """Reduce a single GroupElement / 2x2 matrix to a SurfacePoint."""
    m = g.mat if isinstance(g, sl2.GroupElement) else np.asarray(g, dtype=float)
    R, w = reduce_batch(m[None], group, return_words=True)
    return SurfacePoint(rep=R[0], last_word_length=int(w[0]))


def _is_reduced_mask(R, group, slack=1e-15):
    cur = sl2.cosh_origin_dist(R)
    ok = np.ones(R.shape[0], dtype=bool)
    for k in range(8):
        cand = np.einsum("ij,njl->nil", group.generators[k], R)
        ok &= sl2.cosh_origin_dist(cand) >= cur * (1.0 - slack) - slack
    return ok


# -- group ball enumeration --------------------------------------------------

def group_ball(group, radius, max_elements=2_000_000):
    """All gamma in Gamma with d(0, gamma 0) <= radius, each once modulo sign.

    Breadth-first enumeration over generator words, pruned at radius plus a
    margin of two generator displacements; duplicates are removed by rounded
    canonical entries and the survivors re-checked pairwise.
    """
    if radius > 12.0:
        raise ValueError("group_ball capped at radius 12 (desk scale)")
    margin = 2.0 * SYSTOLE
    gens = group.generators

    def key_of(m):
        return tuple(np.round(m.reshape(4), 6))

    collected = {key_of(np.eye(2)): np.eye(2)}
    frontier = np.eye(2)[None]
    while frontier.shape[0]:
        cand = np.einsum("kij,njl->knil", gens, frontier).reshape(-1, 2, 2)
        cand = sl2.canonical_sign(sl2.renormalize(cand))
        disp = np.arccosh(np.maximum(sl2.cosh_origin_dist(cand), 1.0))
        cand = cand[disp <= radius + margin]
        fresh = []
        for m in cand:
            k = key_of(m)
            if k not in collected:
                collected[k] = m
                fresh.append(m)
        if len(collected) > max_elements:
            raise MemoryError("group ball exceeded the element cap")
        frontier = np.array(fresh).reshape(-1, 2, 2)

    elems = np.array(list(collected.values()))
    disp = np.arccosh(np.maximum(sl2.cosh_origin_dist(elems), 1.0))
    keep = disp <= radius
    elems, disp = elems[keep], disp[keep]
    order = np.lexsort(tuple(elems.reshape(-1, 4).T[::-1]) + (np.round(disp, 9),))
    elems = elems[order]
    # rounding-box edge cases: final pairwise sweep among near neighbours
    out = []
    for m in elems:
        dup = any(np.max(np.abs(m - p)) < 1e-9 for p in out[-8:])
        if not dup:
            out.append(m)
    ball = np.array(out).reshape(-1, 2, 2)
    near_id = np.arccosh(np.maximum(sl2.cosh_origin_dist(ball), 1.0)) < 1e-6
    if np.sum(near_id) != 1:
        raise RuntimeError("discreteness check failed: near-identity elements in ball")
    return ball


# -- sampling ----------------------------------------------------------------

def rng_for(seed, tag):
    """Counter-based generator for a (seed, purpose) pair."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed) * np.uint64(2654435761) + np.uint64(tag)))


def frame_matrix(z, theta):
    """SL(2,R) frame with basepoint z and frame angle theta.

    Built as translation(z) * rotation(theta) in SU(1,1), where
    translation(z) = (1-|z|^2)^{-1/2} [[1, z],[conj z, 1]].
    """
    z = np.asarray(z, dtype=complex)
    theta = np.asarray(theta, dtype=float)
    lam = 1.0 / np.sqrt(1.0 - np.abs(z) ** 2)
    half = np.exp(0.5j * theta)
    A = lam * half
    B = lam * z * np.conj(half)
    return sl2.sl2_from_ab(A, B)


def _in_octagon_mask(z, group):
    cosh_here = (1.0 + np.abs(z) ** 2) / (1.0 - np.abs(z) ** 2)
    ok = np.ones(z.shape, dtype=bool)
    for k in range(8):
        gz = sl2.mobius(group.generators[k], z)
        cosh_there = (1.0 + np.abs(gz) ** 2) / (1.0 - np.abs(gz) ** 2)
        ok &= cosh_here <= cosh_there + 1e-14
    return ok


def sample_haar(n, group, seed):
    """i.i.d. draws from normalised Haar measure on the quotient.

    Basepoints are rejection-sampled from the hyperbolic-area measure on the
    circumdisk of the octagon, frames uniform on [0, 2pi).  Deterministic in
    the seed (Philox stream, fixed batch schedule).
    """
    if n < 1:
        raise ValueError("need n >= 1 samples")
    rng = rng_for(seed, 101)
    cosh_max = np.cosh(group.reduction_radius + 1e-9)
    zs = []
    got = 0
    while got < n:
        m = max(2048, int(1.4 * (n - got)))
        u = rng.random(m)
        cosh_rho = 1.0 + u * (cosh_max - 1.0)
        rho = np.arccosh(cosh_rho)
        ang = rng.random(m) * 2.0 * np.pi
        z = np.tanh(0.5 * rho) * np.exp(1j * ang)
        z = z[_in_octagon_mask(z, group)]
        zs.append(z)
        got += z.size
    z = np.concatenate(zs)[:n]
    theta = rng_for(seed, 102).random(n) * 2.0 * np.pi
    R = frame_matrix(z, theta)
    return sl2.canonical_sign(sl2.renormalize(R))


def sample_vol_alpha(n, alpha, group, seed):
    """Haar draws with importance weights alpha(x) (vol_alpha has total mass 1)."""
    R = sample_haar(n, group, seed)
    w = alpha.value(R)
    if np.any(w <= 0.0):
        raise ValueError("time-change weights must be positive")
    return R, w

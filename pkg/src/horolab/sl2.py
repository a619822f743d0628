"""Exact linear algebra for SL(2,R) / SU(1,1) and Poincare-disk geometry.

Everything here is closed-form 2x2 matrix arithmetic, vectorised over a
leading batch axis.  The Lie algebra basis is

    U = [[0,1],[0,0]],   V = [[0,0],[1,0]],   X = [[1/2,0],[0,-1/2]],

which satisfies [U,V] = 2X, [X,U] = U, [X,V] = -V.  With this X the
one-parameter group exp(tX) moves the disk basepoint at unit hyperbolic
speed (curvature -1 disk metric 2|dz|/(1-|z|^2)).

Group elements are kept at unit determinant and identified modulo a global
sign (PSL(2,R)).  The SU(1,1) picture enters through the Cayley conjugate
m = K g K^{-1}, K = [[1,-i],[1,i]], which we never form explicitly: only
its two independent entries

    A = ((a+d) + i(b-c))/2,     B = ((a-d) - i(b+c))/2

are needed.  They satisfy |A|^2 - |B|^2 = det g, the disk basepoint of g is
z = B/conj(A), and cosh dist(0, z) = |A|^2 + |B|^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "U_MAT", "V_MAT", "X_MAT", "BASIS",
    "GroupElement", "LieVector", "DiskPoint", "RangeError",
    "mul", "inv", "det", "renormalize", "canonical_sign", "identity_batch",
    "exp_U", "exp_V", "exp_X", "exp_basis", "exp_general", "exp_general_taylor",
    "ab_coords", "sl2_from_ab", "basepoint", "frame_cos", "cosh_origin_dist",
    "mobius", "dist_disk", "cayley_to_sl2r", "log_near_identity", "lie_coefficients",
]

U_MAT = np.array([[0.0, 1.0], [0.0, 0.0]])
V_MAT = np.array([[0.0, 0.0], [1.0, 0.0]])
X_MAT = np.array([[0.5, 0.0], [0.0, -0.5]])
BASIS = {"U": U_MAT, "V": V_MAT, "X": X_MAT}

# exp(tX) overflows double precision once e^{t/2} does
_X_RANGE = 1400.0
_DET_DRIFT = 1e-13


class RangeError(ValueError):
    """Argument outside the numerically representable range."""


def det(g):
    g = np.asarray(g)
    return g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] * g[..., 1, 0]


def renormalize(g):
    """Divide by sqrt(det) wherever |det - 1| exceeds the drift threshold."""
    g = np.asarray(g, dtype=float)
    d = det(g)
    bad = np.abs(d - 1.0) > _DET_DRIFT
    if np.any(bad):
        g = g.copy()
        scale = np.where(bad, 1.0 / np.sqrt(d), 1.0)
        g *= scale[..., None, None]
    return g


def mul(g, h):
    """Group law with determinant renormalisation."""
    return renormalize(np.asarray(g) @ np.asarray(h))


def inv(g):
    g = np.asarray(g)
    out = np.empty_like(g)
    out[..., 0, 0] = g[..., 1, 1]
    out[..., 0, 1] = -g[..., 0, 1]
    out[..., 1, 0] = -g[..., 1, 0]
    out[..., 1, 1] = g[..., 0, 0]
    return out


def identity_batch(n):
    out = np.zeros((n, 2, 2))
    out[:, 0, 0] = 1.0
    out[:, 1, 1] = 1.0
    return out


def canonical_sign(g):
    """Flip sign so the first row-major entry of significant size is positive.

    Significance is judged against the matrix sup-norm so that a tiny
    roundoff entry never decides the sign.
    """
    g = np.asarray(g, dtype=float)
    flat = g.reshape(g.shape[:-2] + (4,))
    thresh = 1e-9 * np.max(np.abs(flat), axis=-1, keepdims=True)
    significant = np.abs(flat) > thresh
    first = np.argmax(significant, axis=-1)
    lead = np.take_along_axis(flat, first[..., None], axis=-1)[..., 0]
    sign = np.where(lead < 0.0, -1.0, 1.0)
    return g * sign[..., None, None]


def exp_U(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (2, 2))
    out[..., 0, 0] = 1.0
    out[..., 0, 1] = t
    out[..., 1, 1] = 1.0
    return out


def exp_V(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape + (2, 2))
    out[..., 0, 0] = 1.0
    out[..., 1, 0] = t
    out[..., 1, 1] = 1.0
    return out


def exp_X(t):
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > _X_RANGE):
        raise RangeError("exp(tX) overflows for |t| > %g" % _X_RANGE)
    out = np.zeros(t.shape + (2, 2))
    out[..., 0, 0] = np.exp(0.5 * t)
    out[..., 1, 1] = np.exp(-0.5 * t)
    return out


def exp_basis(t, which):
    if which == "U":
        return exp_U(t)
    if which == "V":
        return exp_V(t)
    if which == "X":
        return exp_X(t)
    raise ValueError("direction must be one of U, V, X")


def exp_general(w, t=1.0):
    """exp(t(uU + vV + xX)) through the trace classification of 2x2 exponentials.

    For traceless K one has K^2 = -det(K) I, so with D = -det(tK):
    D > 0 hyperbolic (cosh/sinh), D < 0 elliptic (cos/sin), D ~ 0 parabolic
    (series for sinh(q)/q keeps the formula smooth through zero).
    """
    u, v, x = (np.asarray(c, dtype=float) for c in w)
    t = np.asarray(t, dtype=float)
    ku = t * u
    kv = t * v
    kx = t * x
    D = 0.25 * kx * kx + ku * kv
    q = np.sqrt(np.abs(D))
    big = q > 1e-4
    with np.errstate(invalid="ignore", divide="ignore"):
        c_big = np.where(D > 0, np.cosh(q), np.cos(q))
        s_big = np.where(D > 0, np.sinh(q) / np.where(big, q, 1.0),
                         np.sin(q) / np.where(big, q, 1.0))
    # series in D: cosh sqrt(D) and sinh(sqrt(D))/sqrt(D) are entire in D
    c_small = 1.0 + D / 2.0 + D * D / 24.0 + D ** 3 / 720.0
    s_small = 1.0 + D / 6.0 + D * D / 120.0 + D ** 3 / 5040.0
    c = np.where(big, c_big, c_small)
    s = np.where(big, s_big, s_small)
    out = np.zeros(np.broadcast(ku, kv, kx).shape + (2, 2))
    out[..., 0, 0] = c + s * 0.5 * kx
    out[..., 0, 1] = s * ku
    out[..., 1, 0] = s * kv
    out[..., 1, 1] = c - s * 0.5 * kx
    return out


def exp_general_taylor(w, t=1.0, order=12):
    """Scaled-and-squared Taylor exponential; independent oracle for exp_general."""
    u, v, x = (float(c) for c in w)
    K = t * (u * U_MAT + v * V_MAT + x * X_MAT)
    norm = np.max(np.abs(K))
    squarings = max(0, int(np.ceil(np.log2(max(norm, 1e-30) / 0.25))))
    Ks = K / (2 ** squarings)
    term = np.eye(2)
    acc = np.eye(2)
    for k in range(1, order + 1):
        term = term @ Ks / k
        acc = acc + term
    for _ in range(squarings):
        acc = acc @ acc
    return acc


def log_near_identity(g, terms=4):
    """Matrix log of a 2x2 matrix close to the identity (series in g - I)."""
    g = np.asarray(g, dtype=float)
    E = g - np.eye(2)
    acc = np.zeros_like(E)
    power = np.eye(2)
    for k in range(1, terms + 1):
        power = power @ E
        acc = acc + ((-1.0) ** (k + 1) / k) * power
    return acc


def lie_coefficients(m):
    """Coefficients (u, v, x) of a traceless 2x2 matrix in the U, V, X basis."""
    m = np.asarray(m)
    return m[..., 0, 1], m[..., 1, 0], 2.0 * m[..., 0, 0]


# -- SU(1,1) coordinates and disk geometry ---------------------------------

def ab_coords(g):
    """Cayley-conjugate entries (A, B) of g; complex arrays of batch shape."""
    g = np.asarray(g)
    a = g[..., 0, 0]
    b = g[..., 0, 1]
    c = g[..., 1, 0]
    d = g[..., 1, 1]
    A = 0.5 * ((a + d) + 1j * (b - c))
    B = 0.5 * ((a - d) - 1j * (b + c))
    return A, B


def sl2_from_ab(A, B):
    """Inverse of ab_coords: real SL(2,R) matrix from SU(1,1) entries."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    out = np.zeros(np.broadcast(A, B).shape + (2, 2))
    out[..., 0, 0] = A.real + B.real
    out[..., 1, 1] = A.real - B.real
    out[..., 0, 1] = A.imag - B.imag
    out[..., 1, 0] = -A.imag - B.imag
    return out


def basepoint(g):
    """Disk basepoint z = B / conj(A) of the frame g."""
    A, B = ab_coords(g)
    return B / np.conj(A)


def cosh_origin_dist(g):
    """cosh of the hyperbolic distance from the origin to the basepoint of g.

    Equals half the squared Frobenius norm; this is what the fundamental
    domain reduction minimises.
    """
    g = np.asarray(g)
    return 0.5 * np.sum(g * g, axis=(-2, -1))


def frame_cos(g, m):
    """cos(m * frame angle) where the frame angle is 2 arg A; rational in g."""
    if m == 0:
        g = np.asarray(g)
        return np.ones(g.shape[:-2])
    A, _ = ab_coords(g)
    Am = A ** (2 * m)
    return Am.real / np.abs(Am)


def mobius(g, z):
    """Fractional-linear action of g on a disk point (complex scalar/array)."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1.0 - 1e-12):
        raise ValueError("mobius: point too close to the disk boundary")
    A, B = ab_coords(g)
    return (A * z + B) / (np.conj(B) * z + np.conj(A))


def dist_disk(z, w):
    """Hyperbolic distance in the curvature -1 Poincare disk."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    num = 2.0 * np.abs(z - w) ** 2
    den = (1.0 - np.abs(z) ** 2) * (1.0 - np.abs(w) ** 2)
    return np.arccosh(1.0 + num / den)


def cayley_to_sl2r(m, tol=1e-10):
    """Transport an SU(1,1) matrix [[A,B],[conj B, conj A]] to SL(2,R).

    The input must satisfy the SU(1,1) constraints within tol; the conjugated
    matrix must come out real within tol.
    """
    m = np.asarray(m, dtype=complex)
    A = m[..., 0, 0]
    B = m[..., 0, 1]
    su_residue = max(
        np.max(np.abs(m[..., 1, 0] - np.conj(B))),
        np.max(np.abs(m[..., 1, 1] - np.conj(A))),
        np.max(np.abs(np.abs(A) ** 2 - np.abs(B) ** 2 - 1.0)),
    )
    if su_residue > tol:
        raise ValueError("matrix violates the SU(1,1) constraints (residue %.3g)" % su_residue)
    g = sl2_from_ab(A, B)
    # conjugating back must reproduce m; the imaginary residue of that round
    # trip is algebraically zero here, so only det needs renormalising
    return renormalize(g)


# -- value wrappers ---------------------------------------------------------

@dataclass(frozen=True)
class GroupElement:
    """Unit determinant real 2x2 matrix modulo global sign."""

    mat: np.ndarray

    def __post_init__(self):
        m = canonical_sign(renormalize(np.asarray(self.mat, dtype=float)))
        if m.shape != (2, 2):
            raise ValueError("GroupElement wraps a single 2x2 matrix")
        object.__setattr__(self, "mat", m)
        self.mat.setflags(write=False)

    @classmethod
    def identity(cls):
        return cls(np.eye(2))

    def __matmul__(self, other):
        return GroupElement(mul(self.mat, other.mat))

    def inverse(self):
        return GroupElement(inv(self.mat))

    def trace(self):
        return float(self.mat[0, 0] + self.mat[1, 1])

    def basepoint(self):
        return DiskPoint.from_complex(complex(basepoint(self.mat)))

    def approx_equal(self, other, tol=1e-12):
        return bool(np.max(np.abs(self.mat - other.mat)) <= tol)

    def __eq__(self, other):
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self.mat.tobytes() == other.mat.tobytes()

    def __hash__(self):
        return hash(self.mat.tobytes())


@dataclass(frozen=True)
class LieVector:
    """Coefficients in the basis {U, V, X}."""

    u: float
    v: float
    x: float

    def bracket(self, other):
        # [U,V] = 2X, [X,U] = U, [X,V] = -V, exactly at coefficient level
        return LieVector(
            u=self.x * other.u - self.u * other.x,
            v=self.v * other.x - self.x * other.v,
            x=2.0 * (self.u * other.v - self.v * other.u),
        )

    def matrix(self):
        return self.u * U_MAT + self.v * V_MAT + self.x * X_MAT


@dataclass(frozen=True)
class DiskPoint:
    re: float
    im: float

    def __post_init__(self):
        if self.re * self.re + self.im * self.im >= 1.0:
            raise ValueError("DiskPoint must lie strictly inside the unit disk")

    @classmethod
    def from_complex(cls, z):
        return cls(float(np.real(z)), float(np.imag(z)))

    @property
    def z(self):
        return complex(self.re, self.im)

    def dist(self, other):
        return float(dist_disk(self.z, other.z))

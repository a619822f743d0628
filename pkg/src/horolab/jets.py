"""Truncated Taylor jets for exact directional derivatives.

Observables are smooth functions of the Cayley entries (A, B), which are
linear in the matrix.  Right-multiplying by exp(eps W) therefore turns an
evaluation into jet arithmetic with matrix-valued Taylor coefficients:

    g exp(e1 W1) exp(e2 W2) = g + e1 gW1 + e2 gW2 + e1 e2 gW1W2 + ...

Two truncations cover every derivative the flows need:

  Jet1  --  a + b e + c e^2 (mod e^3): first and second derivative along
            one direction (f'' = 2c).
  Jet2  --  a + b e1 + c e2 + d e1 e2 (mod e1^2, e2^2): mixed second
            derivatives, including repeated letters since the e1 e2
            coefficient of g exp(e1 W) exp(e2 W) is gW^2.

Components are numpy arrays (real or complex); all operations are exact
chain rules, so the derivatives are analytic, not finite differences.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Jet1", "Jet2", "jconj", "jreal", "jabs2", "jpow_int", "lift_const"]


class Jet1:
    __slots__ = ("a", "b", "c")

    def __init__(self, a, b, c):
        self.a, self.b, self.c = a, b, c

    def __add__(self, o):
        if isinstance(o, Jet1):
            return Jet1(self.a + o.a, self.b + o.b, self.c + o.c)
        return Jet1(self.a + o, self.b, self.c)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Jet1):
            return Jet1(self.a - o.a, self.b - o.b, self.c - o.c)
        return Jet1(self.a - o, self.b, self.c)

    def __rsub__(self, o):
        return Jet1(o - self.a, -self.b, -self.c)

    def __mul__(self, o):
        if isinstance(o, Jet1):
            return Jet1(self.a * o.a,
                        self.a * o.b + self.b * o.a,
                        self.a * o.c + self.b * o.b + self.c * o.a)
        return Jet1(self.a * o, self.b * o, self.c * o)

    __rmul__ = __mul__

    def __neg__(self):
        return Jet1(-self.a, -self.b, -self.c)

    def reciprocal(self):
        ia = 1.0 / self.a
        b = -self.b * ia * ia
        c = (self.b * self.b * ia - self.c) * ia * ia
        return Jet1(ia, b, c)

    def __truediv__(self, o):
        if isinstance(o, Jet1):
            return self * o.reciprocal()
        return Jet1(self.a / o, self.b / o, self.c / o)

    def __rtruediv__(self, o):
        return self.reciprocal() * o

    def exp(self):
        e = np.exp(self.a)
        return Jet1(e, e * self.b, e * (self.c + 0.5 * self.b * self.b))

    def value(self):
        return self.a

    def d1(self):
        return self.b

    def d2(self):
        return 2.0 * self.c


class Jet2:
    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a, b, c, d):
        self.a, self.b, self.c, self.d = a, b, c, d

    def __add__(self, o):
        if isinstance(o, Jet2):
            return Jet2(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
        return Jet2(self.a + o, self.b, self.c, self.d)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Jet2):
            return Jet2(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
        return Jet2(self.a - o, self.b, self.c, self.d)

    def __rsub__(self, o):
        return Jet2(o - self.a, -self.b, -self.c, -self.d)

    def __mul__(self, o):
        if isinstance(o, Jet2):
            return Jet2(self.a * o.a,
                        self.a * o.b + self.b * o.a,
                        self.a * o.c + self.c * o.a,
                        self.a * o.d + self.b * o.c + self.c * o.b + self.d * o.a)
        return Jet2(self.a * o, self.b * o, self.c * o, self.d * o)

    __rmul__ = __mul__

    def __neg__(self):
        return Jet2(-self.a, -self.b, -self.c, -self.d)

    def reciprocal(self):
        ia = 1.0 / self.a
        ia2 = ia * ia
        return Jet2(ia, -self.b * ia2, -self.c * ia2,
                    (2.0 * self.b * self.c * ia - self.d) * ia2)

    def __truediv__(self, o):
        if isinstance(o, Jet2):
            return self * o.reciprocal()
        return Jet2(self.a / o, self.b / o, self.c / o, self.d / o)

    def __rtruediv__(self, o):
        return self.reciprocal() * o

    def exp(self):
        e = np.exp(self.a)
        return Jet2(e, e * self.b, e * self.c, e * (self.d + self.b * self.c))

    def value(self):
        return self.a

    def d1(self):
        return self.b

    def d2(self):
        return self.c

    def d12(self):
        return self.d


def _map(j, f):
    if isinstance(j, Jet1):
        return Jet1(f(j.a), f(j.b), f(j.c))
    if isinstance(j, Jet2):
        return Jet2(f(j.a), f(j.b), f(j.c), f(j.d))
    return f(j)


def jconj(j):
    return _map(j, np.conj)


def jreal(j):
    return _map(j, np.real)


def jabs2(j):
    """|z|^2 = z conj(z), a real jet."""
    return jreal(j * jconj(j))


def jpow_int(j, n):
    """Integer power by repeated squaring (n >= 1)."""
    if n < 1:
        raise ValueError("jpow_int needs n >= 1")
    acc = None
    base = j
    while n:
        if n & 1:
            acc = base if acc is None else acc * base
        n >>= 1
        if n:
            base = base * base
    return acc


def lift_const(j_like, value):
    """Constant with the jet structure of j_like."""
    if isinstance(j_like, Jet1):
        z = np.zeros_like(j_like.b)
        return Jet1(value + z, z, z)
    if isinstance(j_like, Jet2):
        z = np.zeros_like(j_like.b)
        return Jet2(value + z, z, z, z)
    return value

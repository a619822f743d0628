import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horolab import sl2


def rand_elements(n, seed=0, scale=2.0):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(n, 3)) * scale
    return np.stack([sl2.exp_general(tuple(v)) for v in w])


def test_identity_and_inverse():
    g = sl2.GroupElement(sl2.exp_general((0.3, -0.2, 0.7)))
    e = sl2.GroupElement.identity()
    assert (e @ g).approx_equal(g)
    assert (g @ g.inverse()).approx_equal(e, tol=1e-12)


def test_exp_u_additivity_closed_form():
    assert np.allclose(sl2.exp_U(np.asarray(2.5)), [[1, 2.5], [0, 1]])
    lhs = sl2.mul(sl2.exp_U(np.asarray(1.0)), sl2.exp_U(np.asarray(2.0)))
    assert np.allclose(lhs, sl2.exp_U(np.asarray(3.0)), atol=1e-15)
    assert np.allclose(sl2.exp_U(np.asarray(0.0)), np.eye(2))


@pytest.mark.parametrize("which", ["U", "V", "X"])
def test_one_parameter_property(which):
    rng = np.random.default_rng(3)
    for _ in range(25):
        s, t = rng.uniform(-50, 50, size=2)
        lhs = sl2.exp_basis(np.asarray(s + t), which)
        rhs = sl2.mul(sl2.exp_basis(np.asarray(s), which),
                      sl2.exp_basis(np.asarray(t), which))
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))


def test_exp_x_range_error():
    with pytest.raises(sl2.RangeError):
        sl2.exp_X(np.asarray(1500.0))


def test_det_renormalization_bulk():
    g = rand_elements(200, seed=1)
    h = rand_elements(200, seed=2)
    prod = sl2.mul(g, h)
    assert np.max(np.abs(sl2.det(prod) - 1.0)) <= 1e-12


def test_lie_bracket_coefficients_exact():
    U = sl2.LieVector(1, 0, 0)
    V = sl2.LieVector(0, 1, 0)
    X = sl2.LieVector(0, 0, 1)
    assert U.bracket(V) == sl2.LieVector(0, 0, 2)
    assert X.bracket(U) == sl2.LieVector(1, 0, 0)
    assert X.bracket(V) == sl2.LieVector(0, -1, 0)


def test_group_commutator_bch_oracle():
    # exp(hX) exp(hU) exp(-hX) exp(-hU) = I + h^2 [X,U] + O(h^3), [X,U] = U.
    # Extrapolating the h^2 coefficient from two step sizes isolates it.
    def comm_coeff(h):
        c = sl2.mul(sl2.mul(sl2.exp_X(np.asarray(h)), sl2.exp_U(np.asarray(h))),
                    sl2.mul(sl2.exp_X(np.asarray(-h)), sl2.exp_U(np.asarray(-h))))
        return (c - np.eye(2)) / h ** 2

    c1 = comm_coeff(1e-2)
    c2 = comm_coeff(5e-3)
    extrap = 2.0 * c2 - c1     # kills the O(h) remainder of the quotient
    assert np.max(np.abs(extrap - sl2.U_MAT)) < 1e-4


def test_exp_general_matches_basis_and_taylor():
    t = 1.7
    assert np.allclose(sl2.exp_general((1, 0, 0), t), sl2.exp_U(np.asarray(t)))
    assert np.allclose(sl2.exp_general((0, 0, 1), t), sl2.exp_X(np.asarray(t)))
    rng = np.random.default_rng(7)
    for _ in range(40):
        w = rng.normal(size=3)
        t = rng.uniform(-1, 1) * 5.0 / max(np.linalg.norm(w), 1e-9)
        got = sl2.exp_general(tuple(w), t)
        ref = sl2.exp_general_taylor(tuple(w), t)
        assert np.max(np.abs(got - ref)) < 1e-12


def test_mobius_identity_and_inverse_roundtrip():
    g = sl2.exp_general((0.4, -0.7, 0.2))
    z = 0.3 + 0.4j
    assert sl2.mobius(np.eye(2), z) == z
    back = sl2.mobius(sl2.inv(g), sl2.mobius(g, z))
    assert abs(back - z) < 1e-12


def test_mobius_boundary_guard():
    with pytest.raises(ValueError):
        sl2.mobius(np.eye(2), 0.9999999999999)


def test_dist_symmetry_triangle():
    rng = np.random.default_rng(11)
    z = 0.8 * (rng.random(30) - 0.5) + 0.8j * (rng.random(30) - 0.5)
    w = 0.8 * (rng.random(30) - 0.5) + 0.8j * (rng.random(30) - 0.5)
    v = 0.8 * (rng.random(30) - 0.5) + 0.8j * (rng.random(30) - 0.5)
    assert np.max(np.abs(sl2.dist_disk(z, z))) == 0.0
    assert np.allclose(sl2.dist_disk(z, w), sl2.dist_disk(w, z))
    assert np.all(sl2.dist_disk(z, w) <= sl2.dist_disk(z, v) + sl2.dist_disk(v, w) + 1e-12)


def test_mobius_is_isometry():
    rng = np.random.default_rng(13)
    g = rand_elements(50, seed=5)
    z = 0.9 * (rng.random(50) - 0.5) + 0.9j * (rng.random(50) - 0.5)
    w = 0.9 * (rng.random(50) - 0.5) + 0.9j * (rng.random(50) - 0.5)
    d0 = sl2.dist_disk(z, w)
    d1 = sl2.dist_disk(sl2.mobius(g, z), sl2.mobius(g, w))
    assert np.max(np.abs(d0 - d1)) < 1e-10


def test_geodesic_unit_speed():
    # exp(tX) must displace the basepoint by exactly |t|
    for t in (0.5, 2.0, 7.5):
        z = sl2.basepoint(sl2.exp_X(np.asarray(t)))
        assert abs(sl2.dist_disk(0.0, z) - t) < 1e-12


def test_cayley_rotation_preserves_trace():
    theta = 0.7
    m = np.array([[np.exp(0.5j * theta), 0.0], [0.0, np.exp(-0.5j * theta)]])
    g = sl2.cayley_to_sl2r(m)
    assert abs(np.trace(g) - 2.0 * np.cos(0.5 * theta)) < 1e-12
    assert np.allclose(sl2.cayley_to_sl2r(np.eye(2)), np.eye(2))


def test_cayley_rejects_non_su11():
    bad = np.array([[1.3, 0.1], [0.4, 1.0]], dtype=complex)
    with pytest.raises(ValueError):
        sl2.cayley_to_sl2r(bad)


def test_canonical_sign_and_hash():
    g = sl2.exp_general((0.3, 0.1, -0.4))
    a = sl2.GroupElement(g)
    b = sl2.GroupElement(-g)
    assert a == b and hash(a) == hash(b)


def test_ab_coords_roundtrip_and_norm():
    g = rand_elements(64, seed=9)
    A, B = sl2.ab_coords(g)
    rel = np.abs(np.abs(A) ** 2 - np.abs(B) ** 2 - 1.0) / np.abs(A) ** 2
    assert np.max(rel) < 1e-13
    back = sl2.sl2_from_ab(A, B)
    assert np.max(np.abs(back - g)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.floats(-20, 20), st.floats(-20, 20), st.floats(-20, 20))
def test_exp_general_det_one(u, v, x):
    g = sl2.exp_general((u, v, x), t=0.1)
    assert abs(sl2.det(g) - 1.0) < 1e-9

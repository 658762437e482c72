import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rodhom.tensors import (
    SQRT2,
    ElasticityTensor,
    MacroStrainCoeffs,
    Skew3,
    Sym3,
    TensorError,
    k_to_skew,
    macro_strain,
    macro_strain_basis,
    mandel_to_sym,
    skew_basis,
    skew_to_k,
    sym_to_mandel,
    weighted_inner,
)

reals = st.floats(-10, 10, allow_nan=False)


def test_skew_basis_entries():
    K2 = skew_basis(2)
    assert K2[1, 0] == 0.5 and K2[0, 1] == -0.5
    assert np.count_nonzero(K2) == 2
    K4 = skew_basis(4)
    assert K4[2, 1] == 0.5 and K4[1, 2] == -0.5
    assert np.count_nonzero(K4) == 2


def test_skew_basis_orthogonal():
    for i in (2, 3, 4):
        for j in (2, 3, 4):
            d = np.sum(skew_basis(i) * skew_basis(j))
            assert d == (0.5 if i == j else 0.0)


@pytest.mark.parametrize("i", [0, 1, 5])
def test_skew_basis_rejects_index(i):
    with pytest.raises(TensorError):
        skew_basis(i)


def test_macro_strain_stretch():
    E = macro_strain(Skew3(), 1.0, 0.3, -0.7)
    assert np.array_equal(E, np.diag([1.0, 0.0, 0.0]))


def test_macro_strain_twist_generator():
    x2, x3 = 0.4, -0.9
    E = macro_strain(Skew3.from_matrix(skew_basis(4)), 0.0, x2, x3)
    expected = np.zeros((3, 3))
    expected[0, 1] = expected[1, 0] = -x3 / 4
    expected[0, 2] = expected[2, 0] = x2 / 4
    assert np.allclose(E, expected, atol=1e-15)


def test_macro_strain_bending_generator():
    E = macro_strain(Skew3.from_matrix(skew_basis(2)), 0.0, 1.0, 0.0)
    assert E[0, 0] == -0.5
    assert np.count_nonzero(E) == 1


def test_weighted_inner_examples():
    e11 = sym_to_mandel(np.diag([1.0, 0, 0]))[None, :]
    assert weighted_inner((0.0, 0.5), e11, e11, np.array([1.0])) == pytest.approx(1.0)
    assert weighted_inner((1.0, 1.0), np.zeros((1, 6)), e11, np.array([1.0])) == 0.0
    I = sym_to_mandel(np.eye(3))[None, :]
    assert weighted_inner((1.0, 1.0), I, I, np.array([1.0])) == pytest.approx(15.0)


def test_weighted_inner_grid_mismatch():
    with pytest.raises(TensorError):
        weighted_inner((1.0, 1.0), np.zeros((2, 6)), np.zeros((3, 6)), np.ones(2))


def test_mandel_pairing_matches_frobenius(rng):
    A = rng.standard_normal((5, 3, 3))
    B = rng.standard_normal((5, 3, 3))
    A, B = A + A.transpose(0, 2, 1), B + B.transpose(0, 2, 1)
    lhs = np.einsum("ni,ni->n", sym_to_mandel(A), sym_to_mandel(B))
    assert np.allclose(lhs, np.einsum("nij,nij->n", A, B))
    assert np.allclose(mandel_to_sym(sym_to_mandel(A)), A)


def test_sym3_symmetric():
    M = Sym3(1, 2, 3, 4, 5, 6).matrix()
    assert np.array_equal(M, M.T)


@given(reals, reals, reals)
def test_skew3_round_trip(c12, c13, c23):
    K = Skew3(c12, c13, c23)
    Km = K.matrix()
    assert np.array_equal(Km, -Km.T)
    assert Skew3.from_matrix(Km) == K


@given(reals, reals, reals, reals)
def test_macro_coeffs_bijective(a, k2, k3, k4):
    c = MacroStrainCoeffs(a, k2, k3, k4)
    back = MacroStrainCoeffs.from_pair(c.skew(), c.a)
    assert np.allclose(back.as_array(), c.as_array())
    assert np.allclose(skew_to_k(k_to_skew(k2, k3, k4)), [k2, k3, k4])


@given(reals, reals, reals, reals, st.floats(-2, 2), st.floats(-2, 2))
def test_basis_reproduces_macro_strain(a, k2, k3, k4, x2, x3):
    K = k_to_skew(k2, k3, k4)
    direct = sym_to_mandel(macro_strain(K, a, x2, x3))
    E = macro_strain_basis([x2], [x3])[:, 0]
    assert np.allclose(np.array([a, k2, k3, k4]) @ E, direct, atol=1e-12)


def test_skew_coefficients_are_basis_pairing():
    K = Skew3(0.3, -1.1, 2.0)
    k = skew_to_k(K)
    for i, ki in zip((2, 3, 4), k):
        assert np.sum(K.matrix() * skew_basis(i)) == pytest.approx(ki)


@settings(max_examples=50)
@given(reals, reals, reals, reals, reals, reals)
def test_macro_strain_linear(a, b, c12, c13, c23, s):
    K = Skew3(c12, c13, c23)
    x2, x3 = np.array([0.3, -1.0]), np.array([0.5, 0.2])
    lhs = macro_strain(K.scaled(s) + K, s * a + a, x2, x3)
    rhs = (1 + s) * macro_strain(K, a, x2, x3)
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + abs(s)) * (1 + abs(a) + abs(c12) + abs(c13) + abs(c23)))
    assert not np.any(macro_strain(Skew3(), 0.0, x2, x3))


@given(st.floats(-1, 5), st.floats(0.1, 5))
def test_isotropic_tensor_symmetric_and_bounded(lam, mu):
    L = ElasticityTensor.isotropic(lam, mu)
    rng = np.random.default_rng(0)
    F, G = rng.standard_normal((2, 3, 3))
    F, G = F + F.T, G + G.T
    assert np.sum(L.apply(F) * G) == pytest.approx(np.sum(F * L.apply(G)))
    lo, hi = L.bounds()
    q = np.sum(L.apply(F) * F)
    nF = np.sum(F * F)
    assert lo * nF - 1e-9 <= q <= hi * nF + 1e-9


def test_weighted_inner_symmetric(rng):
    C = rng.standard_normal((7, 6, 6))
    C = np.einsum("nij,nkj->nik", C, C)
    F, G = rng.standard_normal((2, 7, 6))
    w = rng.random(7)
    assert weighted_inner(C, F, G, w) == pytest.approx(weighted_inner(C, G, F, w), rel=1e-12)


def test_elasticity_from_entries_round_trip(rng):
    C = rng.standard_normal((6, 6))
    C = C @ C.T
    L = ElasticityTensor(C)
    assert np.allclose(ElasticityTensor.from_entries(L.entries()).mandel, C)
    with pytest.raises(TensorError):
        ElasticityTensor(np.triu(C))
    with pytest.raises(TensorError):
        L.check(1e3, 1e4)


def test_isotropic_mandel_shear_scaling():
    L = ElasticityTensor.isotropic(0.0, 1.0)
    F = np.zeros((3, 3))
    F[0, 1] = F[1, 0] = 1.0
    assert np.allclose(L.apply(F), 2 * F)
    assert sym_to_mandel(F)[3] == pytest.approx(SQRT2)

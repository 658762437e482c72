import numpy as np
import pytest
import scipy.sparse as sp

from rodhom.cells import (
    CellDiscretization,
    SolverError,
    _factorize,
    build_discretization,
    project_prestrain,
    solve_correctors,
    y_grid,
)
from rodhom.effective import assemble_b, assemble_M
from rodhom.isotropic import IsotropicEffective, analytic_correctors, analytic_k, section_data
from rodhom.microstructure import (
    AffinePrestrain,
    BilayerPrestrain,
    LayeredMaterial,
    ModelError,
    Slice,
)
from rodhom.section import build_section, torsion_solve
from rodhom.tensors import Skew3, sym_to_mandel, macro_strain

HOMOG = LayeredMaterial.homogeneous(1.0, 1.0)


def rel_l2(a, b, w):
    return np.sqrt(w @ np.sum((a - b) ** 2, axis=1)) / np.sqrt(w @ np.sum(b ** 2, axis=1))


@pytest.fixture(scope="module")
def tiny():
    return build_section({"kind": "square"}, refine=2)


def test_y_grid_includes_breaks():
    g = y_grid(4, (0.3,))
    assert 0.3 in set(np.round(g.edges, 15))
    assert g.weights.sum() == pytest.approx(1.0)


def test_kernel_dimension_finite(tiny):
    disc = CellDiscretization(tiny, HOMOG, 1.0, n_y=3)
    assert disc.kernel_dimension() == 4
    assert disc.n_constraints == 4


def test_kernel_dimension_zero_and_inf(tiny):
    d0 = CellDiscretization(tiny, HOMOG, 0.0, n_y=3)
    assert d0.kernel_dimension() == d0.n_constraints == 4 + 4 * 3
    di = CellDiscretization(tiny, HOMOG, "inf", n_y=3)
    assert di.kernel_dimension() == di.n_constraints == 3 * tiny.n_quad + 4


def test_single_y_interval_drops_y_blocks(tiny):
    disc = CellDiscretization(tiny, HOMOG, 0.0, n_y=1)
    a, b = disc.blocks["psi"][0], disc.blocks["phi_hat"][1]
    assert sp.linalg.norm(disc.G[:, a:b]) == 0.0


@pytest.mark.parametrize("token", ["-2", "zero", "nan"])
def test_bad_gamma_token(tiny, token):
    with pytest.raises(ModelError):
        CellDiscretization(tiny, HOMOG, token)


def test_build_discretization_requires_gamma(tiny):
    with pytest.raises(ModelError):
        build_discretization(Slice(0.0, 1.0, HOMOG), tiny)


def test_singular_system_detected():
    K = sp.csc_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SolverError):
        _factorize(K)


def _closed_form(mesh, disc, gamma, material):
    eff = IsotropicEffective(gamma, material.moduli(), section_data(mesh, exact_disk=False))
    grad = np.tile(torsion_solve(mesh).grad_at_quad, (disc.y.n_points, 1))
    return analytic_correctors(eff, disc.x2, disc.x3, disc.y_at, grad)


@pytest.mark.parametrize("gamma", [0.0, float("inf")])
def test_homogeneous_correctors_closed_form(square, gamma):
    disc = CellDiscretization(square, HOMOG, gamma)
    cs = solve_correctors(disc)
    ref = _closed_form(square, disc, gamma, HOMOG)
    nu = 0.25
    assert np.allclose(ref[0, :, :3], [1.0, -nu, -nu])
    for i in range(4):
        assert rel_l2(cs.total[i], ref[i], disc.weights) <= 2e-2
    # stretch corrector is pointwise uniaxial-stress
    assert np.allclose(cs.total[0, :, :3], [1.0, -nu, -nu], atol=1e-8)
    for i, x in ((1, disc.x2), (2, disc.x3)):
        assert rel_l2(cs.total[i], -x[:, None] * cs.total[0], disc.weights) <= 2e-2
        assert np.allclose(cs.total[i][:, 0], -x * cs.total[0][:, 0], atol=1e-8)


def test_twist_corrector_finite_gamma():
    mesh = build_section({"kind": "square"}, refine=8)
    disc = CellDiscretization(mesh, HOMOG, 1.0, n_y=2)
    cs = solve_correctors(disc)
    ref = _closed_form(mesh, CellDiscretization(mesh, HOMOG, 0.0), 0.0, HOMOG)[3]
    ref = np.tile(ref, (disc.y.n_points // (len(ref) // mesh.n_quad), 1))
    assert rel_l2(cs.total[3], ref, disc.weights) <= 2e-2


def test_two_phase_stretch_corrector(square):
    mat = LayeredMaterial.from_phases([[0.4, 1.0, 1.0], [0.6, 2.0, 3.0]])
    disc = CellDiscretization(square, mat, 0.0)
    cs = solve_correctors(disc)
    mod = mat.moduli()
    expected = mod.beta0 / mod.beta(disc.y_at)
    assert np.allclose(cs.total[0, :, 0], expected, rtol=2e-2)
    assert len(np.unique(np.round(expected, 12))) == 2


@pytest.mark.parametrize("gamma", [0.0, 1.0, float("inf")])
def test_galerkin_and_constraints(gamma):
    mesh = build_section({"kind": "square"}, refine=4)
    mat = LayeredMaterial.from_phases([[0.5, 1.0, 1.0], [0.5, 1.0, 2.0]])
    disc = CellDiscretization(mesh, mat, gamma, n_y=4)
    cs = solve_correctors(disc)
    assert cs.galerkin_residual <= 1e-8
    assert cs.constraint_residual <= 1e-10


@pytest.mark.parametrize("gamma", [0.0, 1.0, float("inf")])
def test_energy_optimality(gamma, rng):
    mesh = build_section({"kind": "square"}, refine=4)
    mat = LayeredMaterial.from_phases([[0.5, 1.0, 1.0], [0.5, 1.0, 2.0]])
    disc = CellDiscretization(mesh, mat, gamma, n_y=4)
    cs = solve_correctors(disc)
    for i in range(4):
        e0 = disc.inner(cs.total[i], cs.total[i])
        for _ in range(25):
            dx = rng.standard_normal(disc.n_dof) * 1e-2
            F = cs.total[i] + disc.strain(dx)
            assert disc.inner(F, F) >= e0 * (1 - 1e-12)


def test_projection_of_representable_field(square):
    K0, a0 = Skew3(0.3, -0.2, 0.7), 0.15
    for gamma in (0.0, float("inf")):
        disc = CellDiscretization(square, HOMOG, gamma)
        B = AffinePrestrain(K0, a0).sample(square, disc.y.points).reshape(-1, 6)
        proj = project_prestrain(disc, B)
        assert proj.a_fit == pytest.approx(a0, abs=1e-10)
        assert np.allclose([proj.K_fit.c12, proj.K_fit.c13, proj.K_fit.c23], [0.3, -0.2, 0.7], atol=1e-10)
        assert proj.m_density <= 1e-20


def test_projection_of_zero(square):
    disc = CellDiscretization(square, HOMOG, 0.0)
    proj = project_prestrain(disc, np.zeros((disc.n_points, 6)))
    assert not np.any(proj.k) and not np.any(proj.chi) and proj.m_density == 0.0


def test_projection_bilayer_matches_closed_form(square):
    mat = LayeredMaterial.from_phases([[0.25, 1.0, 1.0], [0.75, 1.0, 2.0]])
    pre = BilayerPrestrain(0.25)
    disc = CellDiscretization(square, mat, 0.0, y_breaks=pre.y_breaks)
    B = pre.sample(square, disc.y.points).reshape(-1, 6)
    proj = project_prestrain(disc, B)
    ref = analytic_k(IsotropicEffective(0.0, mat.moduli(), section_data(square)), pre)
    assert np.allclose(proj.k, ref, atol=2e-2 * np.max(np.abs(ref)))
    assert ref[2] == pytest.approx(0.75)


@pytest.mark.parametrize("gamma", [0.0, 2.0, float("inf")])
def test_pythagoras_split(gamma, rng):
    mesh = build_section({"kind": "square"}, refine=4)
    mat = LayeredMaterial.from_phases([[0.5, 1.0, 1.0], [0.5, 2.0, 3.0]])
    disc = CellDiscretization(mesh, mat, gamma, n_y=4)
    F = rng.standard_normal((disc.n_points, 6))
    cs = solve_correctors(disc)
    M, _ = assemble_M(cs, disc)
    k = np.linalg.solve(M, assemble_b(cs, disc, F))
    R = F + disc.strain(disc.relax(F))
    proj = project_prestrain(disc, F)
    lhs = disc.inner(R, R)
    assert abs(lhs - proj.m_density - k @ M @ k) <= 1e-8 * disc.inner(F, F)
    assert np.allclose(proj.k, k, atol=1e-9 * np.max(np.abs(k)))


def test_macro_strain_basis_in_disc(square):
    disc = CellDiscretization(square, HOMOG, 0.0)
    K = Skew3(0.1, 0.2, 0.3)
    direct = sym_to_mandel(macro_strain(K, 0.4, disc.x2, disc.x3))
    assert np.allclose(np.array([0.4, -0.1, -0.2, -0.3]) @ disc.E.transpose(1, 0, 2), direct)

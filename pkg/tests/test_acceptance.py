"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line (printed in the pytest terminal
summary, or directly when this file is run as a script) and then asserts.
"""
import time

import numpy as np
import pytest

from rodhom.cells import CellDiscretization, project_prestrain, solve_correctors
from rodhom.cli import cmd_validate
from rodhom.effective import assemble_b, assemble_M, fem_slice, homogenize
from rodhom.io import load_model
from rodhom.isotropic import IsotropicEffective, analytic_correctors, analytic_k, section_data
from rodhom.microstructure import (
    LayeredMaterial,
    MicrostructureModel,
    NematicPrestrain,
    SampledPrestrain,
    ScaledPrestrain,
    Slice,
    bilayer_model,
)
from rodhom.section import build_section, square_series_tau, square_twist_integral, torsion_solve
from rodhom.shape import design_model, inverse_design
from rodhom.tensors import k_to_skew

INF = float("inf")
RESULTS = {}
SQUARE = {"kind": "square", "half_width": 1.0}
DISK = {"kind": "disk", "radius": 1.0}


def record(n, ok, detail):
    RESULTS[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


def rel_l2(a, b, w):
    return float(np.sqrt(w @ np.sum((a - b) ** 2, axis=1)) / np.sqrt(w @ np.sum(b ** 2, axis=1)))


def single(prestrain, gamma, material, section=SQUARE):
    return MicrostructureModel(1.0, gamma, section, (Slice(0.0, 1.0, material, prestrain),))


# ----------------------------------------------------------------------------


def criterion_1():
    t0 = time.perf_counter()
    sq = build_section(SQUARE)
    tau = torsion_solve(sq).tau
    runtime = time.perf_counter() - t0
    series = square_series_tau(50)
    rel = abs(tau - series) / series
    tor = torsion_solve(build_section(DISK))
    phimax = float(np.max(np.abs(tor.phi)))
    rel_d = abs(tor.tau - np.pi / 2) / (np.pi / 2)
    ok = rel <= 1e-2 and runtime < 5.0 and phimax <= 1e-8 and rel_d <= 1e-2
    return record(1, ok, f"square tau {tau:.6f} vs series {series:.6f} (rel {rel:.2e}, {runtime:.2f} s); "
                         f"disk max|phi| {phimax:.1e}, tau rel err {rel_d:.2e}")


def criterion_2():
    mesh = build_section(SQUARE)
    grad = torsion_solve(mesh).grad_at_quad
    worst = 0.0
    mat = LayeredMaterial.homogeneous(1.0, 1.0)
    for gamma in (0.0, INF):
        disc = CellDiscretization(mesh, mat, gamma)
        cs = solve_correctors(disc)
        eff = IsotropicEffective(gamma, mat.moduli(), section_data(mesh, exact_disk=False))
        ref = analytic_correctors(eff, disc.x2, disc.x3, disc.y_at, np.tile(grad, (disc.y.n_points, 1)))
        worst = max(worst, max(rel_l2(cs.total[i], ref[i], disc.weights) for i in range(4)))
    two = LayeredMaterial.from_phases([[0.4, 1.0, 1.0], [0.6, 2.0, 3.0]])
    disc = CellDiscretization(mesh, two, 0.0)
    cs = solve_correctors(disc)
    mod = two.moduli()
    phase_err = []
    for y in (0.2, 0.7):
        sel = disc.y_at == disc.y.points[np.argmin(np.abs(disc.y.points - y))]
        expected = mod.beta0 / mod.beta(y)
        phase_err.append(float(np.max(np.abs(cs.total[0, sel, 0] - expected)) / abs(expected)))
    ok = worst <= 2e-2 and max(phase_err) <= 2e-2
    return record(2, ok, f"max rel L2 corrector error {worst:.3e}; two-phase (1,1) entry errors "
                         f"{phase_err[0]:.2e}, {phase_err[1]:.2e}")


def criterion_3():
    models = [
        ("homogeneous square", LayeredMaterial.homogeneous(1.0, 1.0), SQUARE),
        ("bilayer square", LayeredMaterial.from_phases([[0.5, 1.0, 1.0], [0.5, 1.0, 2.0]]), SQUARE),
        ("homogeneous disk", LayeredMaterial.homogeneous(2.0, 0.5), DISK),
        ("three-layer rectangle", LayeredMaterial.from_phases([[0.2, 1.0, 1.0], [0.5, 0.5, 2.0], [0.3, 2.0, 0.7]]),
         {"kind": "rectangle", "width": 2.0, "height": 1.0}),
    ]
    worst_d, worst_o = 0.0, 0.0
    for _, mat, sec in models:
        for gamma in (0.0, INF):
            model = single(NematicPrestrain("twist", 0.0), gamma, mat, sec)
            fem = homogenize(model, "fem").slices[0].M
            ana = homogenize(model, "analytic").slices[0].M
            d = np.diag(ana)
            worst_d = max(worst_d, float(np.max(np.abs(np.diag(fem) - d) / d)))
            worst_o = max(worst_o, float(np.max(np.abs(fem - np.diag(np.diag(fem)))) / np.max(d)))
    ok = worst_d <= 2e-2 and worst_o <= 1e-2
    return record(3, ok, f"{len(models)} models x 2 regimes: max diagonal rel err {worst_d:.3e}, "
                         f"max off-diagonal / diag scale {worst_o:.3e}")


def criterion_4():
    thetas = np.linspace(0.0, 1.0, 11)
    k0 = np.array([homogenize(bilayer_model(1.0, 1.0, 2.0, t, 0.0), "analytic").slices[0].k[2] for t in thetas])
    affine_err = float(np.max(np.abs(k0 - (-1.5) * (2 * thetas - 1))))
    k_inf = homogenize(bilayer_model(1.0, 1.0, 2.0, 0.5, INF), "analytic").slices[0].k[2]
    target = (1.0 * (3.0 - 5.0) * (1.0 + 3.0 + 5.0)) / ((3.0 + 5.0) * (1.0 + 1.5 + 2.5))
    inf_err = abs(k_inf - target)
    fem_err = 0.0
    for t in (0.25, 0.5):
        for g in (0.0, INF):
            m = bilayer_model(1.0, 1.0, 2.0, t, g)
            f = homogenize(m, "fem").slices[0].k
            a = homogenize(m, "analytic").slices[0].k
            fem_err = max(fem_err, float(np.max(np.abs(f - a)) / max(np.max(np.abs(a)), 1.0)))
    flat = abs(homogenize(bilayer_model(1.0, 1.0, 2.0, 0.5, 0.0), "analytic").slices[0].k[2])
    curved = [abs(homogenize(bilayer_model(1.0, m1, m2, 0.5, INF), "analytic").slices[0].k[2])
              for m1, m2 in ((1.0, 2.0), (2.0, 1.0), (0.5, 3.0))]
    ok = affine_err <= 1e-10 and inf_err <= 1e-10 and fem_err <= 2e-2 and flat <= 1e-10 and min(curved) > 1e-3
    return record(4, ok, f"gamma=0 affine err {affine_err:.1e}; gamma=inf k3(1/2) = {k_inf:.12f} vs "
                         f"{target:.12f} (err {inf_err:.3e}); FEM vs closed form {fem_err:.2e}; "
                         f"k3(1/2; 0) = {flat:.1e}, min |k3(1/2; inf)| = {min(curved):.3f}")


def _smooth_random_prestrain(mesh, rng):
    x2, x3 = mesh.quad_points.T
    basis = np.stack([np.ones_like(x2), x2, x3, x2 * x3, x2 ** 2, x3 ** 2, np.sin(2 * x2) * x3])
    edges = [0.0, 0.3, 0.55, 1.0]
    B = np.einsum("yck,kq->yqc", rng.standard_normal((3, 6, basis.shape[0])), basis)
    return SampledPrestrain(edges, B)


def criterion_5():
    rng = np.random.default_rng(2024)
    mesh = build_section(SQUARE)
    worst_a, worst_f = 0.0, 0.0
    for lam, mu in ((1.0, 1.0), (2.0, 0.5)):
        mat = LayeredMaterial.homogeneous(lam, mu)
        for _ in range(3):
            pre = _smooth_random_prestrain(mesh, rng)
            ks = {}
            for g in (0.0, INF):
                m = single(pre, g, mat)
                ks[g, "a"] = homogenize(m, "analytic").slices[0].k
                ks[g, "f"] = homogenize(m, "fem").slices[0].k
            worst_a = max(worst_a, float(np.max(np.abs(ks[0.0, "a"] - ks[INF, "a"])) / np.max(np.abs(ks[INF, "a"]))))
            worst_f = max(worst_f, float(np.max(np.abs(ks[0.0, "f"] - ks[INF, "f"])) / np.max(np.abs(ks[INF, "f"]))))
    ok = worst_a <= 1e-10 and worst_f <= 2e-2
    return record(5, ok, f"6 sampled prestrains: analytic rel diff {worst_a:.1e}, FEM rel diff {worst_f:.1e}")


def criterion_6():
    rng = np.random.default_rng(6)
    targets = []
    for i in range(10):
        r, phi = np.sqrt(rng.random()), 2 * np.pi * rng.random()
        targets.append((float(i), float(i + 1), k_to_skew(r * np.cos(phi), r * np.sin(phi), rng.standard_normal())))
    model = design_model(inverse_design(targets))
    want = np.array([K.bending() for *_, K in targets])
    errs = {}
    for path in ("analytic", "fem"):
        got = np.array([s.K_eff.bending() for s in homogenize(model, path).slices])
        errs[path] = float(np.max(np.linalg.norm(got - want, axis=1) / np.linalg.norm(want, axis=1)))
    ok = errs["fem"] <= 2e-2 and errs["analytic"] <= 1e-10
    return record(6, ok, f"10 targets: FEM max rel err {errs['fem']:.3e}, analytic {errs['analytic']:.1e}")


def _fit_sinusoid(theta, v):
    A = np.column_stack([np.ones_like(theta), np.cos(2 * theta), np.sin(2 * theta)])
    c, *_ = np.linalg.lstsq(A, v, rcond=None)
    return c, float(np.max(np.abs(A @ c - v)))


def criterion_7():
    mat = LayeredMaterial.homogeneous(1.0, 1.0)
    rbar = 1.0
    thetas = np.linspace(0.0, np.pi, 9)
    ana, b4_rel = [], 0.0
    for t in thetas:
        s = homogenize(single(NematicPrestrain("splay_bend", t, rbar), 0.0, mat), "analytic").slices[0]
        ana.append(s.k)
        b4_rel = max(b4_rel, abs(s.b[3]) / np.max(np.abs(s.b)))
    fem = homogenize(single(NematicPrestrain("splay_bend", 0.3, rbar), 0.0, mat), "fem").slices[0]
    b4_rel = max(b4_rel, abs(fem.b[3]) / np.max(np.abs(fem.b)))
    ana = np.array(ana)
    k24 = max(float(np.max(np.abs(ana[:, [1, 3]]))), float(np.max(np.abs(fem.k[[1, 3]]))))
    c1, r1 = _fit_sinusoid(thetas, ana[:, 0])
    c3, r3 = _fit_sinusoid(thetas, ana[:, 2])
    # twist family: k4 against cos(2 theta) and the series-based constant
    tau = torsion_solve(build_section(SQUARE)).tau
    tw = np.array([homogenize(single(NematicPrestrain("twist", t, rbar), 0.0, mat), "analytic").slices[0].k[3]
                   for t in thetas])
    c4, r4 = _fit_sinusoid(thetas, tw)
    pipeline_const = c4[1] * tau / rbar
    series_const = np.mean([square_twist_integral(t) / np.cos(2 * t) for t in (0.0, 0.3, np.pi / 2)])
    printed = {
        "c_a = (8/pi^3)(8 tanh(pi/2) - pi)": 8 / np.pi ** 3 * (8 * np.tanh(np.pi / 2) - np.pi),
        "c_b = (32/pi^3)(2 tanh(pi/2) - pi)": 32 / np.pi ** 3 * (2 * np.tanh(np.pi / 2) - np.pi),
        "c_c = (32/pi^3)(2 tanh(pi/2) - pi/2)": 32 / np.pi ** 3 * (2 * np.tanh(np.pi / 2) - np.pi / 2),
    }
    matches = [name for name, v in printed.items() if abs(v - series_const) <= 1e-2 * abs(series_const)]
    report = (f"twist integral / cos(2 theta) = {series_const:.8f}; matches: {', '.join(matches) or 'none'}; "
              f"pipeline k4 tau/(rbar cos 2theta) = {pipeline_const:.6f} (b4 = -rbar <mu>_hom J)")
    RESULTS["7-report"] = "criterion  7 report: " + report
    ok = (b4_rel <= 1e-8 and k24 <= 1e-8 and r1 <= 1e-6 and r3 <= 1e-6 and r4 <= 1e-6
          and abs(c4[0]) <= 1e-10 and abs(c4[2]) <= 1e-10
          and abs(pipeline_const + series_const) <= 1e-2 * abs(series_const))
    return record(7, ok, f"splay-bend |b4|/|b| {b4_rel:.1e}, max|k2|,|k4| {k24:.1e}, sinusoid fit residuals "
                         f"{r1:.1e}, {r3:.1e}; k1 = {c1[0]:.6f} + {c1[1]:.6f} cos2t, k3 = {c3[2]:.6f} sin2t; "
                         f"twist k4 fit residual {r4:.1e}")


def criterion_8():
    rng = np.random.default_rng(8)
    failures = []
    mk, spd = 0.0, True
    for name in ("bilayer", "bilayer_inf", "halfdisk", "homogeneous", "splay_bend"):
        model, _ = load_model(name)
        for s in homogenize(model, "fem").slices:
            spd &= bool(np.allclose(s.M, s.M.T, rtol=0, atol=0) and np.linalg.eigvalsh(s.M)[0] > 0)
            mk = max(mk, s.info["Mk_residual"])
    pyth, lin_a, lin_f, optimal = 0.0, 0.0, 0.0, True
    mesh = build_section(SQUARE, refine=8)
    mat = LayeredMaterial.from_phases([[0.5, 1.0, 1.0], [0.5, 2.0, 3.0]])
    for gamma in (0.0, 1.0, INF):
        disc = CellDiscretization(mesh, mat, gamma, n_y=4)
        cs = solve_correctors(disc)
        M, _ = assemble_M(cs, disc)
        F = rng.standard_normal((disc.n_points, 6))
        k = np.linalg.solve(M, assemble_b(cs, disc, F))
        R = F + disc.strain(disc.relax(F))
        proj = project_prestrain(disc, F)
        pyth = max(pyth, abs(disc.inner(R, R) - proj.m_density - k @ M @ k) / disc.inner(F, F))
        k2 = np.linalg.solve(M, assemble_b(cs, disc, 2.5 * F))
        lin_f = max(lin_f, float(np.max(np.abs(k2 - 2.5 * k)) / np.max(np.abs(k))))
        for i in range(4):
            e0 = disc.inner(cs.total[i], cs.total[i])
            for _ in range(25):
                G = cs.total[i] + disc.strain(1e-2 * rng.standard_normal(disc.n_dof))
                optimal &= disc.inner(G, G) >= e0 * (1 - 1e-12)
    pre = NematicPrestrain("twist", 0.4)
    for g in (0.0, INF):
        eff = IsotropicEffective(g, mat.moduli(), section_data(build_section(SQUARE)))
        k = analytic_k(eff, pre)
        lin_a = max(lin_a, float(np.max(np.abs(analytic_k(eff, ScaledPrestrain(pre, 2.5)) - 2.5 * k)) / np.max(np.abs(k))))
    ok = spd and mk <= 1e-10 and pyth <= 1e-8 and lin_a <= 1e-12 and lin_f <= 1e-10 and optimal
    return record(8, ok, f"SPD {spd}; max Mk-b {mk:.1e}; Pythagoras {pyth:.1e}; linearity analytic {lin_a:.1e}, "
                         f"FEM {lin_f:.1e}; 300 perturbations optimal {optimal}")


def criterion_9():
    model, _ = load_model("homogeneous")
    k0 = homogenize(model, "fem", gamma=0.0)
    kinf = homogenize(model, "fem", gamma=INF)
    worst, con, slowest, ndof = 0.0, 0.0, 0.0, 0
    for i, sl in enumerate(model.slices):
        t0 = time.perf_counter()
        s1 = fem_slice(model, sl, gamma=1.0)
        slowest = max(slowest, time.perf_counter() - t0)
        ndof = max(ndof, s1.info["n_dof"])
        con = max(con, s1.info["constraint_residual"])
        a, b = k0.slices[i].k, kinf.slices[i].k
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        worst = max(worst, float(np.max(np.maximum(lo - s1.k, s1.k - hi)) / np.max(np.abs(b))))
        worst = max(worst, float(np.max(np.abs(s1.k - b)) / np.max(np.abs(b))))
    ok = worst <= 2e-2 and con <= 1e-10 and ndof >= 1e4 and slowest < 60.0
    return record(9, ok, f"gamma=1 k vs gamma in {{0, inf}}: rel dev {worst:.2e}; constraint residual {con:.1e}; "
                         f"slowest slice {slowest:.1f} s with {ndof} unknowns")


def criterion_10():
    a = cmd_validate().text()
    b = cmd_validate().text()
    ok = a == b and "0 failed" in a
    return record(10, ok, f"two validate runs byte-identical: {a == b}; {a.splitlines()[-1]}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 11)])
def test_acceptance(criterion):
    assert criterion(), RESULTS.get(int(criterion.__name__.split("_")[1]))


if __name__ == "__main__":
    for c in CRITERIA:
        c()
        n = int(c.__name__.split("_")[1])
        print(RESULTS[n], flush=True)
        if n == 7:
            print(RESULTS["7-report"], flush=True)

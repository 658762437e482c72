"""Closed-form effective quantities for laterally layered isotropic composites.

For gamma in {0, inf} and Lame moduli depending on y only, the correctors
are explicit in terms of the scalar effective moduli and the torsion
function of the section, so M is diagonal and b is a short list of
weighted prestrain moments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .microstructure import EffectiveModuli, ModelError, Prestrain, SampledPrestrain
from .section import CrossSectionMesh, TorsionData, section_moments, torsion_solve
from .tensors import SQRT2, Skew3, skew_to_k


@dataclass(frozen=True)
class SectionData:
    """Area, second moments and torsion data of a cross-section.

    When ``disk_radius`` is set the values are those of the exact disk and
    section integrals use polar Gauss quadrature instead of the mesh.
    """

    area: float
    I2: float
    I3: float
    tau: float
    mesh: CrossSectionMesh
    torsion: TorsionData | None = None
    disk_radius: float | None = None


def section_data(mesh: CrossSectionMesh, exact_disk: bool = True) -> SectionData:
    shape = mesh.shape
    if exact_disk and shape.get("kind") == "disk":
        r = float(shape.get("radius", 1.0))
        return SectionData(np.pi * r ** 2, np.pi * r ** 4 / 4, np.pi * r ** 4 / 4, np.pi * r ** 4 / 2,
                           mesh, None, r)
    mom = section_moments(mesh)
    tor = torsion_solve(mesh)
    return SectionData(mom["area"], mom["I2"], mom["I3"], tor.tau, mesh, tor)


@dataclass(frozen=True)
class IsotropicEffective:
    gamma: float
    moduli: EffectiveModuli
    section: SectionData

    def __post_init__(self):
        if not (self.gamma == 0 or math.isinf(self.gamma)):
            raise ModelError("closed forms exist only for gamma = 0 and gamma = inf")
        if not (self.beta_gamma > 0 and self.mu_hom > 0):
            raise ModelError("degenerate effective moduli")

    @property
    def beta_gamma(self) -> float:
        return self.moduli.beta_gamma(self.gamma)

    @property
    def mu_hom(self) -> float:
        return self.moduli.mu_hom


def _section_rule(sec: SectionData, prestrain: Prestrain | None, n_r: int = 24, n_t: int = 48):
    """Points (x2, x3), weights and torsion gradient for integrals over S."""
    if sec.disk_radius is not None and not isinstance(prestrain, SampledPrestrain):
        R = sec.disk_radius
        tr, wr = np.polynomial.legendre.leggauss(n_r)
        r = 0.5 * R * (tr + 1)
        wr = 0.5 * R * wr * r
        cuts = sorted({float(np.mod(a, 2 * np.pi)) for a in getattr(prestrain, "angular_breaks", ())})
        if not cuts:
            cuts = [0.0]
        cuts = cuts + [cuts[0] + 2 * np.pi]
        tt, wt = np.polynomial.legendre.leggauss(n_t)
        ang, wang = [], []
        for a, b in zip(cuts[:-1], cuts[1:]):
            ang.append(a + 0.5 * (b - a) * (tt + 1))
            wang.append(0.5 * (b - a) * wt)
        ang, wang = np.concatenate(ang), np.concatenate(wang)
        x2 = np.outer(r, np.cos(ang)).ravel()
        x3 = np.outer(r, np.sin(ang)).ravel()
        w = np.outer(wr, wang).ravel()
        return x2, x3, w, np.zeros((len(w), 2))
    mesh = sec.mesh
    x2, x3 = mesh.quad_points.T
    return x2, x3, mesh.quad_weights, sec.torsion.grad_at_quad


def _y_rule(prestrain, moduli: EffectiveModuli):
    edges = np.unique(np.concatenate([[0.0, 1.0], moduli.lam.edges, list(prestrain.y_breaks)]))
    return 0.5 * (edges[:-1] + edges[1:]), np.diff(edges)


def analytic_M(eff: IsotropicEffective) -> np.ndarray:
    s = eff.section
    bg = eff.beta_gamma
    return np.diag([bg * s.area, bg * s.I2, bg * s.I3, eff.mu_hom * s.tau])


def analytic_b(eff: IsotropicEffective, prestrain: Prestrain) -> np.ndarray:
    sec = eff.section
    x2, x3, ws, grad = _section_rule(sec, prestrain)
    yp, wy = _y_rule(prestrain, eff.moduli)
    if isinstance(prestrain, SampledPrestrain):
        B = prestrain.sample(sec.mesh, yp)
    else:
        B = prestrain.evaluate(x2, x3, yp)  # (ny, ns, 6)
    lever = np.stack([np.ones_like(x2), -x2, -x3])  # e1 - xbar
    b = np.zeros(4)
    b[:3] = eff.beta_gamma * lever @ (ws * (wy @ B[..., 0]))
    if math.isinf(eff.gamma):
        g = eff.moduli.g_inf(yp)
        b[:3] -= lever @ (ws * ((wy * g) @ (B[..., 1] + B[..., 2])))
    Bavg = np.tensordot(wy, B, axes=1)  # y-average, (ns, 6)
    # B12 + B21 = sqrt(2) * Mandel slot 3, B13 + B31 = sqrt(2) * slot 4
    f2 = grad[:, 0] - x3
    f3 = grad[:, 1] + x2
    b[3] = eff.mu_hom * SQRT2 * np.sum(ws * (f2 * Bavg[:, 3] + f3 * Bavg[:, 4]))
    return b


def analytic_k(eff: IsotropicEffective, prestrain: Prestrain) -> np.ndarray:
    """(a, k2, k3, k4) with k_i = b_i / M_ii."""
    return analytic_b(eff, prestrain) / np.diag(analytic_M(eff))


def analytic_Qhom(eff: IsotropicEffective, K: Skew3, a: float) -> float:
    k = np.concatenate([[a], skew_to_k(K)])
    return float(np.sum(np.diag(analytic_M(eff)) * k ** 2))


def analytic_correctors(eff: IsotropicEffective, x2, x3, y, grad_phi) -> np.ndarray:
    """E^(i) + chi^(i), i = 1..4, as Mandel fields of shape (4, n, 6).

    ``grad_phi`` is the torsion-function gradient at the points (n, 2).
    """
    x2, x3, y = (np.asarray(v, dtype=float) for v in (x2, x3, y))
    mod = eff.moduli
    lam, mu = mod.lam(y), mod.mu(y)
    out = np.zeros((4, len(x2), 6))
    if eff.gamma == 0:
        s = mod.beta0 / mod.beta(y)
        nu = mod.nu(y)
        out[0, :, 0] = s
        out[0, :, 1] = out[0, :, 2] = -s * nu
    else:
        M = mod.M(y)
        out[0, :, 0] = mod.beta_inf / M + 2 * mod.nu_inf * lam / M
        out[0, :, 1] = out[0, :, 2] = -mod.nu_inf
    out[1] = -x2[:, None] * out[0]
    out[2] = -x3[:, None] * out[0]
    r = mod.mu_hom / mu
    g = np.asarray(grad_phi, dtype=float)
    out[3, :, 3] = SQRT2 * 0.5 * r * (g[:, 0] - x3)
    out[3, :, 4] = SQRT2 * 0.5 * r * (g[:, 1] + x2)
    return out

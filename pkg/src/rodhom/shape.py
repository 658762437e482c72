"""Rod centerlines from a piecewise-constant curvature-torsion field, and inverse design.

The frame ODE R' = R K with constant skew K on each slice is integrated
with exact exponentials, and the centerline u' = R e1 with the exact
screw-motion integral, so the result is exact up to round-off for any
number of steps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .microstructure import (
    HalfDiskPrestrain,
    LayeredMaterial,
    MicrostructureModel,
    ModelError,
    Slice,
)
from .tensors import Skew3


def axial_vector(K: Skew3) -> np.ndarray:
    """w with K v = w x v."""
    return np.array([-K.c23, K.c13, -K.c12])


def _coefficients(t):
    """sin(t)/t, (1 - cos t)/t^2, (t - sin t)/t^3 with series near 0."""
    if t < 1e-3:
        t2 = t * t
        return 1 - t2 / 6 + t2 * t2 / 120, 0.5 - t2 / 24 + t2 * t2 / 720, 1 / 6 - t2 / 120 + t2 * t2 / 5040
    s, c = np.sin(t), np.cos(t)
    return s / t, (1 - c) / t ** 2, (t - s) / t ** 3


def skew_exp(K: Skew3, h: float = 1.0) -> np.ndarray:
    """exp(h K) by the Rodrigues formula."""
    A = h * K.matrix()
    t = h * np.linalg.norm(axial_vector(K))
    a, b, _ = _coefficients(t)
    return np.eye(3) + a * A + b * (A @ A)


def skew_exp_integral(K: Skew3, h: float) -> np.ndarray:
    """int_0^h exp(s K) ds."""
    A = h * K.matrix()
    t = h * np.linalg.norm(axial_vector(K))
    _, b, c = _coefficients(t)
    return h * (np.eye(3) + b * A + c * (A @ A))


@dataclass
class RodShape:
    x1: np.ndarray
    u: np.ndarray  # (n, 3)
    R: np.ndarray  # (n, 3, 3)

    def rows(self) -> list:
        return [(x, *u, *R.ravel()) for x, u, R in zip(self.x1, self.u, self.R)]

    @staticmethod
    def header() -> list:
        return ["x1", "u_x", "u_y", "u_z"] + [f"R{i}{j}" for i in range(1, 4) for j in range(1, 4)]


def _as_field(K_field, length):
    if isinstance(K_field, Skew3):
        if length is None:
            raise ModelError("a constant field needs a length")
        return [(0.0, float(length), K_field)]
    return [(float(a), float(b), K) for a, b, K in K_field]


def integrate_shape(K_field, n_steps: int = 16, R0=None, u0=None, length: float | None = None) -> RodShape:
    """Integrate R' = R K, u' = R e1 over a list of ``(x1_start, x1_end, K)`` slices.

    ``n_steps`` is the number of output steps per slice.
    """
    if n_steps < 1:
        raise ModelError("n_steps must be at least 1")
    field = _as_field(K_field, length)
    R = np.eye(3) if R0 is None else np.array(R0, dtype=float)
    u = np.zeros(3) if u0 is None else np.array(u0, dtype=float)
    xs, us, Rs = [field[0][0]], [u.copy()], [R.copy()]
    for x0, x1, K in field:
        h = (x1 - x0) / n_steps
        step = skew_exp(K, h)
        shift = skew_exp_integral(K, h)[:, 0]
        for j in range(n_steps):
            u = u + R @ shift
            R = R @ step
            xs.append(x0 + (j + 1) * h)
            us.append(u.copy())
            Rs.append(R.copy())
    return RodShape(np.array(xs), np.array(us), np.array(Rs))


def helix_parameters(K: Skew3) -> tuple[float, float]:
    """(radius, pitch) of the centerline generated by a constant K with bending."""
    w = axial_vector(K)
    n = np.linalg.norm(w)
    if n == 0:
        raise ModelError("zero generator gives a straight line")
    axis = w / n
    radius = np.linalg.norm(np.cross(np.array([1.0, 0.0, 0.0]), axis)) / n
    pitch = 2 * np.pi * axis[0] / n
    return float(radius), float(pitch)


@dataclass(frozen=True)
class DesignRow:
    x1_start: float
    x1_end: float
    theta: float
    alpha: float


def inverse_design(K_target, tol: float = 1e-12) -> list:
    """Half-disk designs (theta, alpha) whose K_eff e1 matches K_target e1 per slice."""
    rows = []
    for i, (x0, x1, K) in enumerate(_as_field(K_target, None)):
        c2, c3 = K.bending()
        theta = float(np.hypot(c2, c3))
        if theta > 1 + tol:
            raise ModelError(f"slice {i} [{x0}, {x1}]: |K e1| = {theta:.6g} exceeds 1")
        theta = min(theta, 1.0)
        alpha = 0.0 if theta == 0 else float(np.mod(np.arctan2(-c3, -c2), 2 * np.pi))
        rows.append(DesignRow(x0, x1, theta, alpha))
    return rows


def design_model(rows, lam: float = 1.0, mu: float = 1.0, gamma: float = 0.0,
                 refine: int | None = None) -> MicrostructureModel:
    """Homogeneous isotropic unit-disk rod carrying the half-disk prestrain of each row."""
    mat = LayeredMaterial.homogeneous(lam, mu)
    slices = tuple(Slice(r.x1_start, r.x1_end, mat, HalfDiskPrestrain(r.theta, r.alpha)) for r in rows)
    section = {"kind": "disk", "radius": 1.0}
    if refine is not None:
        section["refine"] = int(refine)
    return MicrostructureModel(rows[-1].x1_end, gamma, section, slices, name="design")

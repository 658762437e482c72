"""Per-slice averaging matrices, prestrain vectors and the effective rod model.

A slice result carries the 4x4 matrix M, the vector b and k = M^{-1} b in
the coordinates (a, k2, k3, k4) of :mod:`rodhom.tensors`.  The rod model
collects slices in x1 order and evaluates Q_hom, its reduced bending-torsion
form and the limit energy of a sampled frame field.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .cells import CellDiscretization, SolverError, project_prestrain, solve_correctors
from .isotropic import IsotropicEffective, analytic_b, analytic_M, section_data
from .microstructure import ModelError, MicrostructureModel, Slice, gamma_token, parse_gamma
from .section import build_section
from .tensors import MacroStrainCoeffs, Skew3, k_to_skew, skew_to_k

SYMMETRY_RTOL = 1e-10


def worker_count() -> int:
    """Worker threads from ``RODHOM_WORKERS`` (default 1)."""
    raw = os.environ.get("RODHOM_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ModelError(f"RODHOM_WORKERS must be an integer, got {raw!r}") from None
    return max(1, n)


def ordered_map(func, items, workers: int | None = None) -> list:
    """``[func(x) for x in items]`` on a thread pool, results in input order."""
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# ----------------------------------------------------------------------------
# slice-level operations


def assemble_M(correctors, disc: CellDiscretization, rtol: float = SYMMETRY_RTOL):
    """Gram matrix of the corrected strains; returns (M, relative asymmetry)."""
    T = correctors.total
    M = np.array([[disc.inner(T[i], T[j]) for j in range(4)] for i in range(4)])
    asym = float(np.max(np.abs(M - M.T)) / np.max(np.abs(M)))
    if asym > rtol:
        raise SolverError(f"averaging matrix asymmetry {asym:.3g} exceeds {rtol:g}")
    return 0.5 * (M + M.T), asym


def assemble_b(correctors, disc: CellDiscretization, B) -> np.ndarray:
    return np.array([disc.inner(B, correctors.total[i]) for i in range(4)])


def check_spd(M) -> None:
    M = np.asarray(M, dtype=float)
    if not np.allclose(M, M.T, rtol=1e-12, atol=0):
        raise SolverError("averaging matrix is not symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise SolverError("averaging matrix is not positive definite") from None


def solve_k(M, b) -> MacroStrainCoeffs:
    check_spd(M)
    return MacroStrainCoeffs.from_array(np.linalg.solve(M, b))


def qhom_eval(M, K: Skew3, a: float) -> float:
    k = np.concatenate([[a], skew_to_k(K)])
    return float(k @ np.asarray(M) @ k)


def qhom_reduced(M, K: Skew3) -> float:
    """min over a of Q_hom(K, a) via the Schur complement of M[0, 0]."""
    M = np.asarray(M, dtype=float)
    kk = skew_to_k(K)
    S = M[1:, 1:] - np.outer(M[1:, 0], M[0, 1:]) / M[0, 0]
    return float(kk @ S @ kk)


def qhom_optimal_stretch(M, K: Skew3) -> float:
    M = np.asarray(M, dtype=float)
    return float(-(M[0, 1:] @ skew_to_k(K)) / M[0, 0])


@dataclass
class SliceResult:
    x1_start: float
    x1_end: float
    M: np.ndarray
    b: np.ndarray
    k: np.ndarray
    path: str
    m_density: float | None = None
    info: dict = field(default_factory=dict)

    @property
    def length(self) -> float:
        return self.x1_end - self.x1_start

    @property
    def K_eff(self) -> Skew3:
        return k_to_skew(*self.k[1:])

    @property
    def a_eff(self) -> float:
        return float(self.k[0])


def slice_mesh(model: MicrostructureModel, sl: Slice, refine: int | None = None):
    """Section mesh for a slice; disk meshes are turned to align with prestrain jumps."""
    angle = None
    if model.section.get("kind") == "disk":
        angle = sl.prestrain.preferred_disk_angle()
    return build_section(model.section, refine, angle)


def fem_slice(model: MicrostructureModel, sl: Slice, refine=None, n_y=None, gamma=None) -> SliceResult:
    g = model.gamma if gamma is None else gamma
    mesh = slice_mesh(model, sl, refine)
    disc = CellDiscretization(mesh, sl.material, g, n_y, sl.prestrain.y_breaks)
    cs = solve_correctors(disc)
    M, asym = assemble_M(cs, disc)
    B = sl.prestrain.sample(mesh, disc.y.points).reshape(-1, 6)
    b = assemble_b(cs, disc, B)
    k = solve_k(M, b).as_array()
    proj = project_prestrain(disc, B)
    info = {
        "n_dof": disc.n_dof,
        "n_constraints": disc.n_constraints,
        "constraint_residual": cs.constraint_residual,
        "galerkin_residual": cs.galerkin_residual,
        "asymmetry": asym,
        "k_projection": proj.k,
        "Mk_residual": float(np.linalg.norm(M @ k - b) / max(np.linalg.norm(b), np.linalg.norm(M) * 1e-300)),
    }
    return SliceResult(sl.x1_start, sl.x1_end, M, b, k, "fem", proj.m_density, info)


def analytic_slice(model: MicrostructureModel, sl: Slice, refine=None, gamma=None) -> SliceResult:
    g = model.gamma if gamma is None else gamma
    if not sl.material.isotropic:
        raise ModelError("closed forms need a layered isotropic material")
    mesh = slice_mesh(model, sl, refine)
    eff = IsotropicEffective(g, sl.material.moduli(), section_data(mesh))
    M = analytic_M(eff)
    b = analytic_b(eff, sl.prestrain)
    return SliceResult(sl.x1_start, sl.x1_end, M, b, b / np.diag(M), "analytic", None, {})


def analytic_available(model: MicrostructureModel, gamma=None) -> bool:
    g = model.gamma if gamma is None else parse_gamma(gamma)
    return model.is_isotropic and (g == 0 or math.isinf(g))


@dataclass
class EffectiveModel:
    """Slicewise effective rod: K_eff, a_eff piecewise constant in x1, and m."""

    length: float
    gamma: float
    slices: list
    provenance: str

    def __post_init__(self):
        for s in self.slices:
            check_spd(s.M)

    @property
    def m(self) -> float | None:
        return incompatibility(self)

    def slice_at(self, x1: float) -> SliceResult:
        for s in self.slices:
            if x1 < s.x1_end:
                return s
        return self.slices[-1]

    def K_eff(self, x1: float) -> Skew3:
        return self.slice_at(x1).K_eff

    def a_eff(self, x1: float) -> float:
        return self.slice_at(x1).a_eff

    def table(self) -> list:
        return [(s.x1_start, s.x1_end, *map(float, s.k)) for s in self.slices]

    def K_field(self) -> list:
        """[(x1_start, x1_end, K_eff)] for shape integration."""
        return [(s.x1_start, s.x1_end, s.K_eff) for s in self.slices]

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "gamma": gamma_token(self.gamma),
            "path": self.provenance,
            "slices": [
                {
                    "x1_start": s.x1_start,
                    "x1_end": s.x1_end,
                    "M": [float(v) for v in np.asarray(s.M).ravel()],
                    "b": [float(v) for v in s.b],
                    "k": [float(v) for v in s.k],
                    "m_density": None if s.m_density is None else float(s.m_density),
                }
                for s in self.slices
            ],
            "K_eff": [list(map(float, row)) for row in self.table()],
            "m": self.m,
        }


def incompatibility(model: EffectiveModel):
    """m = sum over slices of length * m_density (None on the closed-form path)."""
    if any(s.m_density is None for s in model.slices):
        return None
    return float(sum(s.length * s.m_density for s in model.slices))


def homogenize(model: MicrostructureModel, path: str = "fem", refine=None, n_y=None,
               gamma=None, workers=None) -> EffectiveModel:
    """Effective model along one path (``fem`` or ``analytic``)."""
    g = model.gamma if gamma is None else parse_gamma(gamma)
    if path == "fem":
        def run(item):
            i, sl = item
            try:
                return fem_slice(model, sl, refine, n_y, g)
            except SolverError as exc:
                raise SolverError(f"slice {i} [{sl.x1_start}, {sl.x1_end}]: {exc}") from exc
    elif path == "analytic":
        if not analytic_available(model, g):
            raise ModelError("closed forms need an isotropic model and gamma in {0, inf}")

        def run(item):
            return analytic_slice(model, item[1], refine, g)
    else:
        raise ModelError(f"unknown path {path!r}")
    results = ordered_map(run, enumerate(model.slices), workers)
    return EffectiveModel(model.length, g, results, path)


# ----------------------------------------------------------------------------
# limit energy


@dataclass
class RodState:
    """Frames R (n, 3, 3) on a grid x1 (n,); stretch a per node (n,) or per step (n - 1,)."""

    x1: np.ndarray
    R: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.x1 = np.asarray(self.x1, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        n = len(self.x1)
        if self.R.shape != (n, 3, 3) or len(self.a) not in (n, n - 1):
            raise ModelError("rod state arrays have inconsistent shapes")
        if np.any(np.diff(self.x1) <= 0):
            raise ModelError("rod state grid must be increasing")


def frame_derivative(state: RodState, tol: float = 1e-9) -> list:
    """R^T d1 R on each grid step from the log map of consecutive frames."""
    RtR = np.einsum("nji,njk->nik", state.R, state.R)
    err = np.max(np.abs(RtR - np.eye(3)))
    if err > tol:
        raise ModelError(f"frame field is not orthonormal (max |R^T R - I| = {err:.3g})")
    rel = np.einsum("nji,njk->nik", state.R[:-1], state.R[1:])
    w = Rotation.from_matrix(rel).as_rotvec() / np.diff(state.x1)[:, None]
    # skew matrix of w has entries (1,2) = -w3, (1,3) = w2, (2,3) = -w1
    return [Skew3(-v[2], v[1], -v[0]) for v in w]


def limit_energy(model: EffectiveModel, state: RodState) -> float:
    """int Q_hom(x1, R^T d1 R + K_eff, a + a_eff) dx1 + m.

    The integrand is evaluated at step midpoints, so steps must not
    straddle slice ends.
    """
    Om = frame_derivative(state)
    total = 0.0
    for j, W in enumerate(Om):
        x0, x1 = state.x1[j], state.x1[j + 1]
        s = model.slice_at(0.5 * (x0 + x1))
        a = state.a[j] if len(state.a) == len(Om) else 0.5 * (state.a[j] + state.a[j + 1])
        total += (x1 - x0) * qhom_eval(s.M, W + s.K_eff, a + s.a_eff)
    m = model.m
    return total + (m or 0.0)


def minimizer_state(model: EffectiveModel, n_per_slice: int = 16) -> RodState:
    """Exact minimizer frames: R^T d1 R = -K_eff, a = -a_eff."""
    from .shape import integrate_shape

    neg = [(x0, x1, -K) for x0, x1, K in model.K_field()]
    shape = integrate_shape(neg, n_per_slice)
    mids = 0.5 * (shape.x1[:-1] + shape.x1[1:])
    a = np.array([-model.a_eff(x) for x in mids])
    return RodState(shape.x1, shape.R, a)

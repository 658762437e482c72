"""Finite element solution of the corrector cell problems on S x Y.

All three scale regimes share one algebraic structure.  A sparse *strain
operator* ``G`` maps the regime's unknowns to Mandel strain vectors at the
quadrature points of S x Y, the elasticity enters through a block-diagonal
weight ``W = diag(w_p L_p)``, and the relaxation problem

    min_x  || F + G x ||_W^2   subject to  C x = 0

is solved through the bordered system ``[[G'WG, C'], [C, 0]]``.  The
constraint rows ``C`` remove exactly the kernel of ``G`` (rigid modes and
additive constants), so one LU factorization serves every right-hand side.

Unknowns per regime (Y is the periodic unit cell, grids are periodic P1):

``gamma = 0``
    skew coefficients (psi2, psi3, psi4)(y), scalar phi_hat(y), and
    phi_bar in R^3, P1 on S and constant on each Y interval.
``gamma = inf``
    phi_hat in R^3 per S quadrature point, P1 in y, and phi_bar in R^3, P1 on S.
``0 < gamma < inf``
    phi in R^3, tensor-product P1 on S x Y, strain sym(d_y phi | d_2 phi / gamma | d_3 phi / gamma).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .microstructure import ModelError, parse_gamma
from .tensors import SQRT2, macro_strain_basis

_H = 0.5 * SQRT2
_GAUSS2 = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))

DEFAULT_NY_FINITE = 16


class SolverError(RuntimeError):
    pass


def regime_of(gamma) -> str:
    g = parse_gamma(gamma)
    if g == 0:
        return "zero"
    if math.isinf(g):
        return "inf"
    return "finite"


@dataclass(frozen=True)
class YGrid:
    """Periodic P1 grid on [0, 1) with a fixed rule inside each interval."""

    edges: np.ndarray  # n_int + 1 values, 0 ... 1
    points: np.ndarray  # quadrature points
    weights: np.ndarray
    interval: np.ndarray  # interval index of each point
    values: sp.csr_matrix  # (n_pts, n_nodes)
    deriv: sp.csr_matrix  # (n_pts, n_nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.edges) - 1

    @property
    def n_points(self) -> int:
        return len(self.points)


def y_grid(n_y: int, breaks=(), rule: str = "midpoint") -> YGrid:
    """Union of a uniform grid with ``n_y`` intervals and the coefficient breaks."""
    if n_y < 1:
        raise ModelError("n_y must be at least 1")
    e = np.concatenate([np.linspace(0.0, 1.0, n_y + 1), [b for b in breaks if 0.0 < b < 1.0]])
    e = np.sort(e)
    keep = np.concatenate([[True], np.diff(e) > 1e-12])
    e = e[keep]
    e[-1] = 1.0
    n = len(e) - 1
    loc = (0.5,) if rule == "midpoint" else _GAUSS2
    lw = np.full(len(loc), 1.0 / len(loc))
    pts, wts, itv, rows, cols, vals, dvals = [], [], [], [], [], [], []
    for t in range(n):
        h = e[t + 1] - e[t]
        a, b = t, (t + 1) % n
        for xi, wx in zip(loc, lw):
            p = len(pts)
            pts.append(e[t] + xi * h)
            wts.append(wx * h)
            itv.append(t)
            rows += [p, p]
            cols += [a, b]
            vals += [1 - xi, xi]
            dvals += [-1 / h, 1 / h]
    npt = len(pts)
    V = sp.csr_matrix((vals, (rows, cols)), shape=(npt, n))
    D = sp.csr_matrix((dvals, (rows, cols)), shape=(npt, n))
    return YGrid(e, np.array(pts), np.array(wts), np.array(itv), V, D)


def _place(op, block: int, offsets, n_dof):
    """Embed a sparse operator into the columns of one dof block."""
    op = op.tocoo()
    return sp.csr_matrix((op.data, (op.row, op.col + offsets[block])), shape=(op.shape[0], n_dof))


class CellDiscretization:
    """Assembled relaxation problem for one x1 slice.

    Parameters
    ----------
    mesh : CrossSectionMesh
        Normalized cross-section mesh.
    material : LayeredMaterial or SampledMaterial
    gamma : float or str
        Scale ratio (0, inf or positive).
    n_y : int, optional
        Uniform Y intervals (merged with coefficient breaks).  Defaults to
        1 for gamma in {0, inf}, where P1 in y is exact for piecewise
        constant coefficients, and 16 otherwise.
    y_breaks : sequence of float
        Extra Y breakpoints (prestrain jumps).
    """

    def __init__(self, mesh, material, gamma, n_y: int | None = None, y_breaks=()):
        self.mesh = mesh
        self.gamma = parse_gamma(gamma)
        self.regime = regime_of(self.gamma)
        if n_y is None:
            n_y = DEFAULT_NY_FINITE if self.regime == "finite" else 1
        breaks = sorted(set(material.y_breaks) | set(float(b) for b in y_breaks))
        rule = "gauss2" if self.regime == "finite" else "midpoint"
        self.y = y_grid(n_y, breaks, rule)
        self.material = material

        nq, ny = mesh.n_quad, self.y.n_points
        self.n_points = nq * ny
        self.weights = np.kron(self.y.weights, mesh.quad_weights)
        self.x2 = np.tile(mesh.quad_points[:, 0], ny)
        self.x3 = np.tile(mesh.quad_points[:, 1], ny)
        self.y_at = np.repeat(self.y.points, nq)
        C = material.mandel(mesh, self.y.points)
        self.C = np.ascontiguousarray(C).reshape(self.n_points, 6, 6)
        self.E = macro_strain_basis(self.x2, self.x3)

        cols, self.constraints, self.blocks = getattr(self, f"_build_{self.regime}")()
        self.n_dof = self.constraints.shape[1]
        m = [cols[0][0], cols[1][1], cols[2][2],
             _H * (cols[1][0] + cols[0][1]),
             _H * (cols[2][0] + cols[0][2]),
             _H * (cols[2][1] + cols[1][2])]
        self.G = sp.vstack([sp.csr_matrix(c) for c in m]).tocsr()
        self.Wmat = self._weight_matrix()
        self.WG = (self.Wmat @ self.G).tocsr()
        self.A = (self.G.T @ self.WG).tocsc()
        self.A = 0.5 * (self.A + self.A.T)
        self._lu = None
        self._lu_aug = None

    # -- regime layouts -----------------------------------------------------

    def _s_ops(self):
        mesh = self.mesh
        P = mesh.node_interpolant_at_quad()
        D2, D3 = mesh.gradient_at_quad()
        return P, D2, D3

    def _rotation_rows(self, P):
        """Rows of int_S phi, i = 1..3, and int_S phi . (0, -x3, x2) for a P1 field."""
        ws = self.mesh.quad_weights
        x2, x3 = self.mesh.quad_points.T
        mean = P.T @ ws
        rot2 = P.T @ (-x3 * ws)
        rot3 = P.T @ (x2 * ws)
        return mean, rot2, rot3

    def _build_finite(self):
        P, D2, D3 = self._s_ops()
        Y = self.y
        ns, n_block = self.mesh.n_nodes, self.mesh.n_nodes * Y.n_nodes
        n_dof = 3 * n_block
        off = [0, n_block, 2 * n_block]
        dy = sp.kron(Y.deriv, P, format="csr")
        d2 = sp.kron(Y.values, D2, format="csr") / self.gamma
        d3 = sp.kron(Y.values, D3, format="csr") / self.gamma
        cols = [[_place(op, i, off, n_dof) for i in range(3)] for op in (dy, d2, d3)]
        # int over S x Y of phi_i and of phi . (0, -x3, x2)
        V = sp.kron(Y.values, P, format="csr")
        wv = V.T @ self.weights
        wr2 = V.T @ (-self.x3 * self.weights)
        wr3 = V.T @ (self.x2 * self.weights)
        rows = [np.zeros(n_dof) for _ in range(4)]
        for i in range(3):
            rows[i][off[i]:off[i] + n_block] = wv
        rows[3][off[1]:off[1] + n_block] = wr2
        rows[3][off[2]:off[2] + n_block] = wr3
        con = sp.csr_matrix(np.vstack(rows))
        blocks = {"phi": (0, n_dof, ns)}
        return cols, con, blocks

    def _build_zero(self):
        P, D2, D3 = self._s_ops()
        Y = self.y
        nq, ns, nyn = self.mesh.n_quad, self.mesh.n_nodes, Y.n_nodes
        n_int = nyn
        nb = n_int * ns
        off = [0, nyn, 2 * nyn, 3 * nyn, 4 * nyn, 4 * nyn + nb, 4 * nyn + 2 * nb]
        n_dof = 4 * nyn + 3 * nb
        dyq = sp.kron(Y.deriv, np.ones((nq, 1)), format="csr")
        x2 = sp.diags(self.x2)
        x3 = sp.diags(self.x3)
        col1 = [
            _place(-x2 @ dyq, 0, off, n_dof) + _place(-x3 @ dyq, 1, off, n_dof) + _place(dyq, 3, off, n_dof),
            _place(-x3 @ dyq, 2, off, n_dof),
            _place(x2 @ dyq, 2, off, n_dof),
        ]
        Iy = sp.csr_matrix((np.ones(Y.n_points), (np.arange(Y.n_points), Y.interval)), shape=(Y.n_points, n_int))
        d2 = sp.kron(Iy, D2, format="csr")
        d3 = sp.kron(Iy, D3, format="csr")
        col2 = [_place(d2, 4 + i, off, n_dof) for i in range(3)]
        col3 = [_place(d3, 4 + i, off, n_dof) for i in range(3)]
        # constraints: zero y-mean of psi and phi_hat; per interval zero mean
        # and zero in-plane rotation moment of phi_bar
        ymean = Y.values.T @ Y.weights
        rows, cidx, vals = [], [], []
        r = 0
        for b in range(4):
            rows += [r] * nyn
            cidx += list(off[b] + np.arange(nyn))
            vals += list(ymean)
            r += 1
        mean, rot2, rot3 = self._rotation_rows(P)
        nodes = np.arange(ns)
        for t in range(n_int):
            for i in range(3):
                rows += [r] * ns
                cidx += list(off[4 + i] + t * ns + nodes)
                vals += list(mean)
                r += 1
            rows += [r] * (2 * ns)
            cidx += list(off[5] + t * ns + nodes) + list(off[6] + t * ns + nodes)
            vals += list(rot2) + list(rot3)
            r += 1
        con = sp.csr_matrix((vals, (rows, cidx)), shape=(r, n_dof))
        blocks = {"psi": (0, 3 * nyn), "phi_hat": (3 * nyn, 4 * nyn), "phi_bar": (4 * nyn, n_dof)}
        return [col1, col2, col3], con, blocks

    def _build_inf(self):
        P, D2, D3 = self._s_ops()
        Y = self.y
        nq, ns, nyn = self.mesh.n_quad, self.mesh.n_nodes, Y.n_nodes
        nh = nyn * nq
        off = [0, nh, 2 * nh, 3 * nh, 3 * nh + ns, 3 * nh + 2 * ns]
        n_dof = 3 * nh + 3 * ns
        dy = sp.kron(Y.deriv, sp.identity(nq), format="csr")
        ones = np.ones((Y.n_points, 1))
        d2 = sp.kron(ones, D2, format="csr")
        d3 = sp.kron(ones, D3, format="csr")
        col1 = [_place(dy, i, off, n_dof) for i in range(3)]
        col2 = [_place(d2, 3 + i, off, n_dof) for i in range(3)]
        col3 = [_place(d3, 3 + i, off, n_dof) for i in range(3)]
        ymean = sp.csr_matrix((Y.values.T @ Y.weights)[None, :])
        per_point = sp.kron(ymean, sp.identity(nq), format="csr")  # (nq, nh)
        blocks_c = [_place(per_point, i, off, n_dof) for i in range(3)]
        mean, rot2, rot3 = self._rotation_rows(P)
        rows = np.zeros((4, n_dof))
        for i in range(3):
            rows[i, off[3 + i]:off[3 + i] + ns] = mean
        rows[3, off[4]:off[4] + ns] = rot2
        rows[3, off[5]:off[5] + ns] = rot3
        con = sp.vstack(blocks_c + [sp.csr_matrix(rows)]).tocsr()
        blocks = {"phi_hat": (0, 3 * nh), "phi_bar": (3 * nh, n_dof)}
        return [col1, col2, col3], con, blocks

    # -- algebra ------------------------------------------------------------

    def _weight_matrix(self):
        n = self.n_points
        w = self.weights
        blocks = [[None] * 6 for _ in range(6)]
        for c in range(6):
            for d in range(6):
                v = w * self.C[:, c, d]
                if np.any(v != 0):
                    blocks[c][d] = sp.diags(v, format="csr")
                elif c == d:
                    blocks[c][d] = sp.csr_matrix((n, n))
        return sp.bmat(blocks, format="csr")

    def strain(self, x) -> np.ndarray:
        """Mandel strain field (n_points, 6) of the dof vector ``x``."""
        return (self.G @ x).reshape(6, self.n_points).T

    def apply_L(self, F) -> np.ndarray:
        """w_p L_p F_p for a Mandel field (n_points, 6)."""
        return self.weights[:, None] * np.einsum("pij,pj->pi", self.C, F)

    def inner(self, F, H) -> float:
        return float(np.sum(self.apply_L(F) * H))

    def load(self, F) -> np.ndarray:
        """G' W F as a dof vector."""
        return self.G.T @ self.apply_L(F).T.reshape(-1)

    @property
    def n_constraints(self) -> int:
        return self.constraints.shape[0]

    def bordered(self):
        return sp.bmat([[self.A, self.constraints.T], [self.constraints, None]], format="csc")

    def factorization(self):
        if self._lu is None:
            self._lu = _factorize(self.bordered())
        return self._lu

    def relax(self, F):
        """Minimizer x of ||F + G x||_W over the constrained dofs."""
        F = np.asarray(F, dtype=float)
        rhs = np.concatenate([-self.load(F), np.zeros(self.n_constraints)])
        z = self.factorization().solve(rhs)
        return z[: self.n_dof]

    def kernel_dimension(self, rtol: float = 1e-9) -> int:
        """Count near-zero eigenvalues of the unconstrained operator (dense; small meshes only)."""
        w = np.linalg.eigvalsh(self.A.toarray())
        return int(np.sum(w <= rtol * w[-1]))


def _factorize(K):
    try:
        lu = splu(K.tocsc(), permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from exc
    d = np.abs(lu.U.diagonal())
    if not np.all(np.isfinite(d)) or d.min() <= 1e-13 * d.max():
        raise SolverError("bordered system is singular (a kernel mode is not constrained)")
    return lu


def build_discretization(slice_, mesh, n_y: int | None = None, gamma=None) -> CellDiscretization:
    """Discretization of one model slice; ``gamma`` is required."""
    if gamma is None:
        raise ModelError("gamma is required")
    return CellDiscretization(mesh, slice_.material, gamma, n_y, slice_.prestrain.y_breaks)


@dataclass
class CorrectorSet:
    """Corrected strains E^(i) + chi^(i) at the quadrature points of a slice."""

    total: np.ndarray  # (4, n_points, 6)
    chi: np.ndarray  # (4, n_points, 6)
    dofs: np.ndarray  # (4, n_dof)
    constraint_residual: float
    galerkin_residual: float


def solve_correctors(disc: CellDiscretization) -> CorrectorSet:
    X = np.stack([disc.relax(disc.E[i]) for i in range(4)])
    chi = np.stack([disc.strain(x) for x in X])
    total = disc.E + chi
    scale = max(np.linalg.norm(disc.load(disc.E[i])) for i in range(4))
    gal = max(np.linalg.norm(disc.load(total[i])) for i in range(4)) / scale
    cscale = np.abs(disc.constraints).sum(axis=1).A.ravel().max()
    con = max(np.abs(disc.constraints @ x).max() for x in X) / (cscale * max(1.0, np.abs(X).max()))
    return CorrectorSet(total=total, chi=chi, dofs=X, constraint_residual=float(con), galerkin_residual=float(gal))


@dataclass
class Projection:
    """Least-squares fit of sym B by E(K, a) + chi."""

    k: np.ndarray  # (a, k2, k3, k4)
    dofs: np.ndarray
    chi: np.ndarray  # (n_points, 6)
    m_density: float

    @property
    def a_fit(self) -> float:
        return float(self.k[0])

    @property
    def K_fit(self):
        from .tensors import k_to_skew

        return k_to_skew(*self.k[1:])


def project_prestrain(disc: CellDiscretization, B) -> Projection:
    """min over (k, x) of || B - sum_i k_i E^(i) - G x ||_W^2 (4 augmented unknowns)."""
    B = np.asarray(B, dtype=float)
    if disc._lu_aug is None:
        WE = np.stack([disc.apply_L(disc.E[i]).T.reshape(-1) for i in range(4)], axis=1)
        GtWE = disc.G.T @ WE
        EtWE = np.array([[disc.inner(disc.E[i], disc.E[j]) for j in range(4)] for i in range(4)])
        nc = disc.n_constraints
        K = sp.bmat(
            [
                [disc.A, sp.csc_matrix(GtWE), disc.constraints.T],
                [sp.csc_matrix(GtWE.T), sp.csc_matrix(EtWE), None],
                [disc.constraints, None, sp.csc_matrix((nc, nc))],
            ],
            format="csc",
        )
        disc._lu_aug = _factorize(K)
    rhs_x = disc.load(B)
    rhs_k = np.array([disc.inner(B, disc.E[i]) for i in range(4)])
    z = disc._lu_aug.solve(np.concatenate([rhs_x, rhs_k, np.zeros(disc.n_constraints)]))
    x = z[: disc.n_dof]
    k = z[disc.n_dof: disc.n_dof + 4]
    chi = disc.strain(x)
    R = B - np.einsum("i,ipc->pc", k, disc.E) - chi
    return Projection(k=k, dofs=x, chi=chi, m_density=max(disc.inner(R, R), 0.0))

"""Triangulated rod cross-sections and the Saint-Venant torsion problem.

Meshes are linear triangles.  Every integral over the section uses the
interior three-point rule (barycentric (2/3, 1/6, 1/6) and permutations),
which is exact for quadratics and never places a point on an element edge,
so indicator fields aligned with element boundaries are sampled exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

# barycentric coordinates of the quadrature points, one row per point
QUAD_BARY = np.array(
    [[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]
)


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class RigidMotion:
    """x' = rotation @ (x - center)."""

    rotation: np.ndarray
    center: np.ndarray

    def apply(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.center) @ self.rotation.T

    @property
    def is_identity(self) -> bool:
        return bool(np.allclose(self.rotation, np.eye(2)) and np.allclose(self.center, 0.0))


class CrossSectionMesh:
    """Conforming, positively oriented triangulation of a cross-section.

    Parameters
    ----------
    nodes : (n, 2) array
        Node coordinates (x2, x3).
    triangles : (m, 3) int array
        Node indices; clockwise triangles are reoriented.
    shape : dict, optional
        Builtin geometry the mesh approximates (kept for exact-geometry
        shortcuts and reporting).
    """

    def __init__(self, nodes, triangles, shape: dict | None = None):
        nodes = np.array(nodes, dtype=float)
        tri = np.array(triangles, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or tri.ndim != 2 or tri.shape[1] != 3:
            raise MeshError("nodes must be (n, 2) and triangles (m, 3)")
        if tri.size == 0 or tri.min() < 0 or tri.max() >= len(nodes):
            raise MeshError("triangle index out of range")
        rounded = np.round(nodes, 12)
        if len(np.unique(rounded, axis=0)) != len(nodes):
            raise MeshError("duplicate nodes")
        area2 = _signed_area2(nodes, tri)
        scale = max(np.ptp(nodes[:, 0]), np.ptp(nodes[:, 1]), 1e-300) ** 2
        if np.any(np.abs(area2) <= 1e-12 * scale):
            raise MeshError("degenerate (zero-area) triangle")
        flip = area2 < 0
        tri[flip] = tri[flip][:, [0, 2, 1]]
        self.nodes = nodes
        self.triangles = tri
        self.shape = dict(shape or {})
        self.nodes.setflags(write=False)
        self.triangles.setflags(write=False)
        self.areas = 0.5 * np.abs(area2)
        self.grads = _shape_gradients(nodes, tri, self.areas)
        qp = np.einsum("qa,tad->tqd", QUAD_BARY, nodes[tri])
        self.quad_points = qp.reshape(-1, 2)
        self.quad_weights = np.repeat(self.areas / 3.0, 3)
        n_comp, _ = connected_components(self.adjacency(), directed=False)
        self.n_components = int(n_comp)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_quad(self) -> int:
        return 3 * self.n_triangles

    def adjacency(self) -> sp.csr_matrix:
        t = self.triangles
        rows = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
        cols = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
        A = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(self.n_nodes,) * 2)
        return (A + A.T).tocsr()

    def boundary_edges(self) -> np.ndarray:
        t = self.triangles
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq[counts == 1]

    def integrate(self, values) -> float:
        """Integrate values sampled at the quadrature points."""
        return float(np.dot(self.quad_weights, values))

    def moments(self) -> dict:
        x2, x3 = self.quad_points.T
        w = self.quad_weights
        return {
            "area": float(w.sum()),
            "x2": float(w @ x2),
            "x3": float(w @ x3),
            "x2x2": float(w @ (x2 * x2)),
            "x3x3": float(w @ (x3 * x3)),
            "x2x3": float(w @ (x2 * x3)),
        }

    def transformed(self, motion: RigidMotion) -> "CrossSectionMesh":
        m = CrossSectionMesh(motion.apply(self.nodes), self.triangles, self.shape)
        return m

    def node_interpolant_at_quad(self) -> sp.csr_matrix:
        """Sparse (n_quad, n_nodes) matrix of P1 shape function values."""
        rows = np.repeat(np.arange(self.n_quad), 3)
        cols = np.repeat(self.triangles, 3, axis=0).reshape(-1)
        vals = np.tile(QUAD_BARY.reshape(-1), self.n_triangles)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_quad, self.n_nodes))

    def gradient_at_quad(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """Sparse operators mapping nodal values to d/dx2 and d/dx3 at quad points."""
        rows = np.repeat(np.arange(self.n_quad), 3)
        cols = np.repeat(self.triangles, 3, axis=0).reshape(-1)
        g = np.repeat(self.grads, 3, axis=0)  # (n_quad, 3, 2)
        D2 = sp.csr_matrix((g[:, :, 0].reshape(-1), (rows, cols)), shape=(self.n_quad, self.n_nodes))
        D3 = sp.csr_matrix((g[:, :, 1].reshape(-1), (rows, cols)), shape=(self.n_quad, self.n_nodes))
        return D2, D3


def _signed_area2(nodes, tri):
    a, b, c = nodes[tri[:, 0]], nodes[tri[:, 1]], nodes[tri[:, 2]]
    return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])


def _shape_gradients(nodes, tri, areas):
    p = nodes[tri]  # (m, 3, 2)
    g = np.empty_like(p)
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        # gradient of the barycentric coordinate of vertex a
        g[:, a, 0] = (p[:, b, 1] - p[:, c, 1]) / (2 * areas)
        g[:, a, 1] = (p[:, c, 0] - p[:, b, 0]) / (2 * areas)
    return g


# ----------------------------------------------------------------------------
# builtin meshes


def _crisscross(x0, x1, y0, y1, nx, ny):
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    corners = np.column_stack([X.ravel(), Y.ravel()])
    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    CX, CY = np.meshgrid(cx, cy, indexing="ij")
    centers = np.column_stack([CX.ravel(), CY.ravel()])
    nodes = np.vstack([corners, centers])
    off = len(corners)
    tris = []
    for i in range(nx):
        for j in range(ny):
            a = i * (ny + 1) + j
            b = (i + 1) * (ny + 1) + j
            c = (i + 1) * (ny + 1) + j + 1
            d = i * (ny + 1) + j + 1
            m = off + i * ny + j
            tris += [(a, b, m), (b, c, m), (c, d, m), (d, a, m)]
    return nodes, np.array(tris)


def square_mesh(half_width: float = 1.0, n: int = 16) -> CrossSectionMesh:
    """Square (-h, h)^2 split into n x n cells of four triangles each (D4 symmetric)."""
    if n < 1:
        raise MeshError("square mesh needs n >= 1")
    h = float(half_width)
    nodes, tri = _crisscross(-h, h, -h, h, n, n)
    return CrossSectionMesh(nodes, tri, {"kind": "square", "half_width": h})


def rectangle_mesh(width: float, height: float, nx: int, ny: int) -> CrossSectionMesh:
    nodes, tri = _crisscross(-width / 2, width / 2, -height / 2, height / 2, nx, ny)
    return CrossSectionMesh(nodes, tri, {"kind": "rectangle", "width": width, "height": height})


def disk_mesh(radius: float = 1.0, rings: int = 12, sectors: int = 6, angle: float = 0.0) -> CrossSectionMesh:
    """Polar-ring disk mesh; ring k carries ``sectors * k`` equally spaced nodes.

    The boundary is a regular polygon, and the ``sectors`` radial lines at
    ``angle + 2 pi j / sectors`` are unions of mesh edges.
    """
    if rings < 1 or sectors < 3:
        raise MeshError("disk mesh needs rings >= 1 and sectors >= 3")
    nodes = [(0.0, 0.0)]
    start = [0]
    for k in range(1, rings + 1):
        start.append(len(nodes))
        r = radius * k / rings
        n_k = sectors * k
        for j in range(n_k):
            t = angle + 2 * np.pi * j / n_k
            nodes.append((r * np.cos(t), r * np.sin(t)))
    tris = []
    for w in range(sectors):
        # ring 1: one triangle per wedge
        tris.append((0, start[1] + w, start[1] + (w + 1) % sectors))
    for k in range(2, rings + 1):
        n_in, n_out = sectors * (k - 1), sectors * k
        for w in range(sectors):
            inner = [start[k - 1] + (w * (k - 1) + i) % n_in for i in range(k)]
            outer = [start[k] + (w * k + i) % n_out for i in range(k + 1)]
            # strip between k-1 inner and k outer segments
            i = o = 0
            while i < k - 1 or o < k:
                # advance the side whose next node is angularly behind
                if o < k and (i == k - 1 or (o + 1) / k <= (i + 1) / (k - 1)):
                    tris.append((inner[i], outer[o], outer[o + 1]))
                    o += 1
                else:
                    tris.append((inner[i], outer[o], inner[i + 1]))
                    i += 1
    return CrossSectionMesh(np.array(nodes), np.array(tris),
                            {"kind": "disk", "radius": float(radius), "angle": float(angle)})


def read_mesh(path) -> CrossSectionMesh:
    """Plain-text mesh: node count, ``x2 x3`` node lines, then ``i j k`` triangles."""
    lines = []
    for raw in Path(path).read_text().splitlines():
        s = raw.split("#", 1)[0].strip()
        if s:
            lines.append(s)
    if not lines:
        raise MeshError(f"{path}: empty mesh file")
    try:
        n = int(lines[0])
        nodes = np.array([[float(v) for v in ln.split()] for ln in lines[1:n + 1]])
        tris = np.array([[int(v) for v in ln.split()] for ln in lines[n + 1:]])
    except ValueError as exc:
        raise MeshError(f"{path}: {exc}") from exc
    if len(nodes) != n:
        raise MeshError(f"{path}: expected {n} node lines")
    return CrossSectionMesh(nodes, tris, {"kind": "file", "path": str(path)})


def write_mesh(mesh: CrossSectionMesh, path) -> None:
    out = [str(mesh.n_nodes)]
    out += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes]
    out += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    Path(path).write_text("\n".join(out) + "\n")


# ----------------------------------------------------------------------------
# geometry


def normalize_section(mesh: CrossSectionMesh, rtol: float = 1e-12):
    """Translate to the centroid and rotate to principal axes.

    Returns the normalized mesh and the applied :class:`RigidMotion`.
    """
    m = mesh.moments()
    area = m["area"]
    if not area > 0:
        raise MeshError("degenerate mesh")
    c = np.array([m["x2"], m["x3"]]) / area
    if np.allclose(c, 0.0, atol=rtol * np.sqrt(area)):
        c = np.zeros(2)
    x = mesh.quad_points - c
    w = mesh.quad_weights
    I22, I33, I23 = w @ (x[:, 0] ** 2), w @ (x[:, 1] ** 2), w @ (x[:, 0] * x[:, 1])
    if abs(I23) <= rtol * (I22 + I33):
        R = np.eye(2)
    else:
        t = 0.5 * np.arctan2(2 * I23, I22 - I33)
        R = np.array([[np.cos(t), np.sin(t)], [-np.sin(t), np.cos(t)]])
    motion = RigidMotion(R, c)
    if motion.is_identity:
        return mesh, motion
    return mesh.transformed(motion), motion


def section_moments(mesh: CrossSectionMesh) -> dict:
    """|S|, I2 = int x2^2, I3 = int x3^2 by exact per-triangle integration."""
    m = mesh.moments()
    if not m["area"] > 0:
        raise MeshError("degenerate mesh")
    return {"area": m["area"], "I2": m["x2x2"], "I3": m["x3x3"]}


@dataclass
class TorsionData:
    """Torsion function (nodal, mean zero) and torsional rigidity."""

    phi: np.ndarray
    tau: float
    grad_at_quad: np.ndarray = field(repr=False)  # (n_quad, 2), constant per triangle


def torsion_solve(mesh: CrossSectionMesh) -> TorsionData:
    """P1 minimizer of int (d2 phi - x3)^2 + (d3 phi + x2)^2 with int phi = 0."""
    if mesh.n_components != 1:
        raise MeshError("torsion problem is singular on a disconnected mesh")
    t = mesh.triangles
    n = mesh.n_nodes
    A, G = mesh.areas, mesh.grads
    rows = np.repeat(t, 3, axis=1).reshape(-1)
    cols = np.tile(t, (1, 3)).reshape(-1)
    ke = A[:, None, None] * np.einsum("tad,tbd->tab", G, G)
    K = sp.coo_matrix((ke.reshape(-1), (rows, cols)), shape=(n, n)).tocsc()
    cen = mesh.nodes[t].mean(axis=1)
    w = np.column_stack([cen[:, 1], -cen[:, 0]])
    fe = A[:, None] * np.einsum("tad,td->ta", G, w)
    f = np.bincount(t.reshape(-1), weights=fe.reshape(-1), minlength=n)
    mass = np.bincount(t.reshape(-1), weights=np.repeat(A / 3.0, 3), minlength=n)
    Kb = sp.bmat([[K, sp.csc_matrix(mass[:, None])], [sp.csc_matrix(mass[None, :]), None]]).tocsc()
    sol = splu(Kb).solve(np.append(f, 0.0))
    phi = sol[:n]
    grad = np.einsum("tad,ta->td", G, phi[t])
    gq = np.repeat(grad, 3, axis=0)
    x2, x3 = mesh.quad_points.T
    integrand = (gq[:, 0] - x3) ** 2 + (gq[:, 1] + x2) ** 2
    tau = mesh.integrate(integrand)
    return TorsionData(phi=phi, tau=float(tau), grad_at_quad=gq)


# ----------------------------------------------------------------------------
# series representation of the torsion function of the square (-1, 1)^2


def _series_coeff(n):
    return -16.0 / (n ** 3 * np.pi ** 3)


def _edge_term(x1, x2, N):
    """Single-edge series and its gradient, odd n = 1 .. 2N-1.

    cosh(a)/sinh(n pi) and sinh(a)/sinh(n pi) with 0 <= a <= n pi are formed
    from decaying exponentials to avoid overflow.
    """
    x1 = np.asarray(x1, dtype=float)[..., None]
    x2 = np.asarray(x2, dtype=float)[..., None]
    n = 2 * np.arange(1, N + 1) - 1.0
    b = n * np.pi
    a = 0.5 * b * (1.0 + x1)
    denom = -np.expm1(-2 * b)
    ch = (np.exp(a - b) + np.exp(-a - b)) / denom
    sh = (np.exp(a - b) - np.exp(-a - b)) / denom
    c = np.cos(0.5 * b * (1.0 + x2))
    s = np.sin(0.5 * b * (1.0 + x2))
    An = _series_coeff(n)
    val = np.sum(An * ch * c, axis=-1)
    d1 = np.sum(An * 0.5 * b * sh * c, axis=-1)
    d2 = np.sum(-An * 0.5 * b * ch * s, axis=-1)
    return val, d1, d2


def torsion_square_series(N: int, x2, x3, grad: bool = False):
    """Partial sum of the quarter-turn symmetrized series for phi on (-1, 1)^2.

    Returns phi (and its gradient when ``grad``) at the points (x2, x3).
    """
    if N < 1:
        raise ValueError("truncation N must be >= 1")
    p = np.stack(np.broadcast_arrays(np.asarray(x2, float), np.asarray(x3, float)), axis=-1)
    R = np.array([[0.0, 1.0], [-1.0, 0.0]])
    val = np.zeros(p.shape[:-1])
    g = np.zeros(p.shape)
    Rk = np.eye(2)
    for _ in range(4):
        q = p @ Rk.T
        v, d1, d2 = _edge_term(q[..., 0], q[..., 1], N)
        val += v
        g += np.stack([d1, d2], axis=-1) @ Rk
        Rk = R @ Rk
    return (val, g) if grad else val


def square_series_tau(N: int = 50, n_gauss: int = 160) -> float:
    """Torsional rigidity of (-1, 1)^2 from the series by tensor Gauss quadrature.

    The interval is split in halves so no node sits on the symmetry lines.
    """
    t, w = np.polynomial.legendre.leggauss(n_gauss)
    pts = np.concatenate([0.5 * (t - 1), 0.5 * (t + 1)])
    wts = np.concatenate([0.5 * w, 0.5 * w])
    X2, X3 = np.meshgrid(pts, pts, indexing="ij")
    _, g = torsion_square_series(N, X2, X3, grad=True)
    f = (g[..., 0] - X3) ** 2 + (g[..., 1] + X2) ** 2
    return float(wts @ f @ wts)


def square_twist_integral(theta: float, N: int = 50, n_gauss: int = 200) -> float:
    """int_{-1}^{1} (phi(1,t) - phi(-1,t) - 2t) sin(2 theta + pi t / 2) dt for the square."""
    t, w = np.polynomial.legendre.leggauss(n_gauss)
    jump = torsion_square_series(N, np.ones_like(t), t) - torsion_square_series(N, -np.ones_like(t), t)
    return float(w @ ((jump - 2 * t) * np.sin(2 * theta + 0.5 * np.pi * t)))


# ----------------------------------------------------------------------------
# section specifications

DEFAULT_REFINE = {"square": 20, "rectangle": 8, "disk": 12}


def build_section(spec: dict, refine: int | None = None, angle: float | None = None) -> CrossSectionMesh:
    """Normalized mesh for a section description.

    ``spec["kind"]`` is ``square`` (``half_width``), ``rectangle`` (``width``,
    ``height``), ``disk`` (``radius``) or ``file`` (``path``).  ``refine`` is
    cells per side (square), cells per unit length (rectangle) or rings
    (disk).  ``angle`` rotates a disk mesh so that its radial edges include
    that direction.
    """
    kind = spec.get("kind")
    if kind == "square":
        n = int(refine or spec.get("refine") or DEFAULT_REFINE["square"])
        mesh = square_mesh(float(spec.get("half_width", 1.0)), n)
    elif kind == "rectangle":
        n = int(refine or spec.get("refine") or DEFAULT_REFINE["rectangle"])
        w, h = float(spec["width"]), float(spec["height"])
        mesh = rectangle_mesh(w, h, max(1, round(n * w)), max(1, round(n * h)))
    elif kind == "disk":
        n = int(refine or spec.get("refine") or DEFAULT_REFINE["disk"])
        a = float(spec.get("angle", 0.0)) if angle is None else float(angle)
        mesh = disk_mesh(float(spec.get("radius", 1.0)), n, 6, a)
    elif kind == "file":
        mesh = read_mesh(spec["path"])
    else:
        raise MeshError(f"unknown section kind {kind!r}")
    mesh, _ = normalize_section(mesh)
    return mesh

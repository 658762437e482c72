"""Fixed-size tensor algebra for rod homogenization.

Symmetric 3x3 matrices are stored in Mandel form, ordered
``(11, 22, 33, 12, 13, 23)`` with the shear entries scaled by sqrt(2), so the
Euclidean dot product of two Mandel vectors equals the Frobenius pairing of
the matrices.  Fourth-order elasticity tensors acting on symmetric matrices
become symmetric 6x6 matrices in the same basis.

Skew matrices use the coordinates ``(K12, K13, K23)``.  The macroscopic
strain basis uses the unit skew generators ``2 * skew_basis(i)``; see
:func:`skew_to_k` for the sign and scale bookkeeping.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT2 = np.sqrt(2.0)

# (row, col) of each Mandel slot
MANDEL_INDEX = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
_MANDEL_SCALE = np.array([1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2])
_TRACE = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])


class TensorError(ValueError):
    pass


def sym_to_mandel(F):
    """Mandel vector(s) of the symmetric part of ``F`` with shape (..., 3, 3)."""
    F = np.asarray(F, dtype=float)
    S = 0.5 * (F + np.swapaxes(F, -1, -2))
    out = np.stack([S[..., i, j] for i, j in MANDEL_INDEX], axis=-1)
    return out * _MANDEL_SCALE


def mandel_to_sym(v):
    v = np.asarray(v, dtype=float) / _MANDEL_SCALE
    out = np.zeros(v.shape[:-1] + (3, 3))
    for c, (i, j) in enumerate(MANDEL_INDEX):
        out[..., i, j] = v[..., c]
        out[..., j, i] = v[..., c]
    return out


@dataclass(frozen=True)
class Sym3:
    """Symmetric 3x3 matrix from its six independent entries."""

    a11: float = 0.0
    a22: float = 0.0
    a33: float = 0.0
    a12: float = 0.0
    a13: float = 0.0
    a23: float = 0.0

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.a11, self.a12, self.a13],
                [self.a12, self.a22, self.a23],
                [self.a13, self.a23, self.a33],
            ]
        )

    def mandel(self) -> np.ndarray:
        return sym_to_mandel(self.matrix())

    @classmethod
    def from_matrix(cls, F) -> "Sym3":
        S = 0.5 * (np.asarray(F, dtype=float) + np.asarray(F, dtype=float).T)
        return cls(S[0, 0], S[1, 1], S[2, 2], S[0, 1], S[0, 2], S[1, 2])


@dataclass(frozen=True)
class Skew3:
    """Skew matrix K = c12 (e1 x e2 - e2 x e1) + c13 (...) + c23 (...)."""

    c12: float = 0.0
    c13: float = 0.0
    c23: float = 0.0

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [0.0, self.c12, self.c13],
                [-self.c12, 0.0, self.c23],
                [-self.c13, -self.c23, 0.0],
            ]
        )

    @classmethod
    def from_matrix(cls, K, atol: float = 1e-12) -> "Skew3":
        K = np.asarray(K, dtype=float)
        if np.max(np.abs(K + K.T)) > atol * max(1.0, np.max(np.abs(K))):
            raise TensorError("matrix is not antisymmetric")
        return cls(float(K[0, 1]), float(K[0, 2]), float(K[1, 2]))

    def __add__(self, other: "Skew3") -> "Skew3":
        return Skew3(self.c12 + other.c12, self.c13 + other.c13, self.c23 + other.c23)

    def __neg__(self) -> "Skew3":
        return Skew3(-self.c12, -self.c13, -self.c23)

    def scaled(self, s: float) -> "Skew3":
        return Skew3(s * self.c12, s * self.c13, s * self.c23)

    def bending(self) -> np.ndarray:
        """Components (e2, e3) of K e1, the curvature vector of the centerline."""
        return np.array([-self.c12, -self.c13])


def skew_basis(i: int) -> np.ndarray:
    """Skew basis K^(i), i in {2, 3, 4}, with entries +-1/2."""
    if i == 2:
        a, b = 1, 0
    elif i == 3:
        a, b = 2, 0
    elif i == 4:
        a, b = 2, 1
    else:
        raise TensorError(f"skew basis index must be 2, 3 or 4, got {i}")
    K = np.zeros((3, 3))
    K[a, b] = 0.5
    K[b, a] = -0.5
    return K


def strain_generator(i: int) -> np.ndarray:
    """Unit skew generator 2 K^(i) used to build the strain basis E^(i)."""
    return 2.0 * skew_basis(i)


def skew_to_k(K: Skew3) -> np.ndarray:
    """Coefficients (k2, k3, k4) with K = sum_i k_i * 2 K^(i).

    Equivalently k_i = K : K^(i) (Frobenius pairing with the half-entry
    basis).  In matrix entries: k2 = K21 = -K12, k3 = K31 = -K13,
    k4 = K32 = -K23.  This is the only place the convention is encoded.
    """
    return np.array([-K.c12, -K.c13, -K.c23])


def k_to_skew(k2: float, k3: float, k4: float) -> Skew3:
    return Skew3(-float(k2), -float(k3), -float(k4))


@dataclass(frozen=True)
class MacroStrainCoeffs:
    """The 4-vector k = (a, k2, k3, k4): stretch, two bendings, twist."""

    a: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    k4: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.k2, self.k3, self.k4])

    @classmethod
    def from_array(cls, k) -> "MacroStrainCoeffs":
        k = np.asarray(k, dtype=float)
        return cls(float(k[0]), float(k[1]), float(k[2]), float(k[3]))

    @classmethod
    def from_pair(cls, K: Skew3, a: float) -> "MacroStrainCoeffs":
        k2, k3, k4 = skew_to_k(K)
        return cls(float(a), float(k2), float(k3), float(k4))

    def skew(self) -> Skew3:
        return k_to_skew(self.k2, self.k3, self.k4)


def macro_strain(K: Skew3, a: float, x2, x3) -> np.ndarray:
    """sym[(K xbar + a e1) x e1] at xbar = (0, x2, x3); shape (..., 3, 3)."""
    x2 = np.asarray(x2, dtype=float)
    x3 = np.asarray(x3, dtype=float)
    Km = K.matrix()
    v = Km[:, 1, None] * x2.reshape(-1) + Km[:, 2, None] * x3.reshape(-1)
    v[0] += a
    out = np.zeros((v.shape[1], 3, 3))
    out[:, 0, 0] = v[0]
    out[:, 0, 1] = out[:, 1, 0] = 0.5 * v[1]
    out[:, 0, 2] = out[:, 2, 0] = 0.5 * v[2]
    return out.reshape(x2.shape + (3, 3))


def macro_strain_basis(x2, x3) -> np.ndarray:
    """Mandel values of E^(1..4) at the given points, shape (4, n, 6)."""
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    x3 = np.asarray(x3, dtype=float).reshape(-1)
    E = np.zeros((4, x2.size, 6))
    E[0, :, 0] = 1.0
    E[1, :, 0] = -x2
    E[2, :, 0] = -x3
    E[3, :, 3] = -0.5 * SQRT2 * x3
    E[3, :, 4] = 0.5 * SQRT2 * x2
    return E


class ElasticityTensor:
    """Linear map on symmetric matrices, stored as a symmetric 6x6 Mandel matrix."""

    def __init__(self, mandel):
        C = np.asarray(mandel, dtype=float)
        if C.shape != (6, 6):
            raise TensorError("Mandel elasticity matrix must be 6x6")
        if np.max(np.abs(C - C.T)) > 1e-12 * max(1.0, np.max(np.abs(C))):
            raise TensorError("elasticity tensor lacks major symmetry")
        self._C = 0.5 * (C + C.T)
        self._C.setflags(write=False)

    @classmethod
    def isotropic(cls, lam: float, mu: float) -> "ElasticityTensor":
        t = cls(2.0 * mu * np.eye(6) + lam * np.outer(_TRACE, _TRACE))
        t.lam, t.mu = float(lam), float(mu)
        return t

    @classmethod
    def from_entries(cls, entries) -> "ElasticityTensor":
        """Build from the 21 upper-triangular Mandel entries, row by row."""
        entries = np.asarray(entries, dtype=float)
        if entries.size != 21:
            raise TensorError("a full elasticity tensor has 21 independent entries")
        C = np.zeros((6, 6))
        C[np.triu_indices(6)] = entries
        C = C + np.triu(C, 1).T
        return cls(C)

    @property
    def mandel(self) -> np.ndarray:
        return self._C

    def entries(self) -> np.ndarray:
        return self._C[np.triu_indices(6)].copy()

    def apply(self, F) -> np.ndarray:
        """L F for symmetric F of shape (..., 3, 3)."""
        return mandel_to_sym(sym_to_mandel(F) @ self._C)

    def bounds(self) -> tuple[float, float]:
        """Smallest and largest alpha, beta with alpha|F|^2 <= <LF,F> <= beta|F|^2."""
        w = np.linalg.eigvalsh(self._C)
        return float(w[0]), float(w[-1])

    def check(self, alpha: float, beta: float) -> None:
        lo, hi = self.bounds()
        if lo < alpha or hi > beta:
            raise TensorError(
                f"elasticity tensor eigenvalues [{lo:.6g}, {hi:.6g}] outside [{alpha}, {beta}]"
            )


def isotropic_mandel(lam, mu) -> np.ndarray:
    """Stack of isotropic Mandel matrices for arrays of Lame moduli."""
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    C = 2.0 * mu[..., None, None] * np.eye(6) + lam[..., None, None] * np.outer(_TRACE, _TRACE)
    return C


def apply_isotropic(lam, mu, F):
    """Mandel L F for isotropic moduli broadcast against Mandel vectors F."""
    F = np.asarray(F, dtype=float)
    tr = F[..., 0] + F[..., 1] + F[..., 2]
    out = 2.0 * np.asarray(mu)[..., None] * F
    out[..., :3] += (np.asarray(lam) * tr)[..., None]
    return out


def weighted_inner(L, F, G, weights) -> float:
    """Quadrature of <L F, G> with L either (lam, mu) arrays or (n, 6, 6) matrices.

    ``F`` and ``G`` are Mandel fields of shape (n, 6) on the same rule
    (``weights`` of shape (n,)).
    """
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    w = np.asarray(weights, dtype=float)
    if F.shape != G.shape or F.shape[:-1] != w.shape:
        raise TensorError("fields and weights are sampled on different grids")
    if isinstance(L, tuple):
        LF = apply_isotropic(L[0], L[1], F)
    else:
        LF = np.einsum("nij,nj->ni", np.asarray(L, dtype=float), F)
    return float(np.sum(w * np.einsum("ni,ni->n", LF, G)))

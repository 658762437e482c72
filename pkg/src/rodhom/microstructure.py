"""Composite materials and prestrain fields on the rod reference cell.

Coefficients are piecewise constant in the rod axis x1 (declared slices) and
in the periodic cell variable y (a :class:`PeriodicProfile`).  Inside a slice
the material is either laterally layered isotropic (Lame moduli depending on
y only) or a full tensor field sampled at the quadrature points of the cell
discretization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensors import Skew3, isotropic_mandel, macro_strain, sym_to_mandel


class ModelError(ValueError):
    pass


def parse_gamma(token) -> float:
    """Scale ratio from a token: ``"0"``, ``"inf"`` or a positive real."""
    if isinstance(token, (int, float)) and not isinstance(token, bool):
        value = float(token)
    else:
        s = str(token).strip().lower()
        if s in ("inf", "infinity", "+inf"):
            return math.inf
        try:
            value = float(s)
        except ValueError:
            raise ModelError(f"gamma: invalid token {token!r} (expected '0', 'inf' or a positive real)") from None
    if math.isnan(value) or value < 0:
        raise ModelError(f"gamma: invalid token {token!r} (expected '0', 'inf' or a positive real)")
    return value


def gamma_token(gamma: float) -> str:
    if gamma == 0:
        return "0"
    if math.isinf(gamma):
        return "inf"
    return repr(float(gamma))


class PeriodicProfile:
    """Piecewise-constant function on the periodic cell [0, 1).

    Parameters
    ----------
    edges : sequence of float
        Strictly increasing interval endpoints, ``edges[0] == 0`` and
        ``edges[-1] == 1``.
    values : array_like
        One payload per interval (first axis).
    """

    def __init__(self, edges, values):
        edges = np.asarray(edges, dtype=float)
        values = np.asarray(values, dtype=float)
        if edges.ndim != 1 or len(edges) < 2 or edges[0] != 0.0 or edges[-1] != 1.0:
            raise ModelError("profile edges must start at 0 and end at 1")
        if np.any(np.diff(edges) <= 0):
            raise ModelError("profile edges must be strictly increasing")
        if values.shape[0] != len(edges) - 1:
            raise ModelError("one profile value per interval required")
        self.edges = edges
        self.values = values
        self.edges.setflags(write=False)
        self.values.setflags(write=False)

    @classmethod
    def constant(cls, value) -> "PeriodicProfile":
        return cls([0.0, 1.0], [value])

    @classmethod
    def from_fractions(cls, fractions, values) -> "PeriodicProfile":
        """Consecutive intervals with the given length fractions (zero-length ones dropped)."""
        fr = np.asarray(fractions, dtype=float)
        vals = np.asarray(values, dtype=float)
        if np.any(fr < 0) or not np.isclose(fr.sum(), 1.0, rtol=0, atol=1e-12):
            raise ModelError("phase fractions must be non-negative and sum to 1")
        keep = fr > 0
        edges = np.concatenate([[0.0], np.cumsum(fr[keep])])
        edges[-1] = 1.0
        return cls(edges, vals[keep])

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def breaks(self) -> tuple:
        return tuple(float(e) for e in self.edges[1:-1])

    def __call__(self, y):
        y = np.mod(np.asarray(y, dtype=float), 1.0)
        idx = np.clip(np.searchsorted(self.edges, y, side="right") - 1, 0, len(self.values) - 1)
        return self.values[idx]

    def mean(self):
        return np.tensordot(self.lengths, self.values, axes=1)

    def harmonic_mean(self):
        if np.any(self.values <= 0):
            raise ModelError("harmonic mean needs strictly positive values")
        return 1.0 / np.tensordot(self.lengths, 1.0 / self.values, axes=1)

    def refine(self, points) -> "PeriodicProfile":
        """Same function on a partition refined by the given interior points."""
        pts = [p for p in np.atleast_1d(points) if 0.0 < p < 1.0]
        edges = np.unique(np.concatenate([self.edges, pts]))
        mids = 0.5 * (edges[:-1] + edges[1:])
        return PeriodicProfile(edges, self(mids))

    def map(self, func) -> "PeriodicProfile":
        return PeriodicProfile(self.edges, func(self.values))

    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))


def common_refinement(*profiles: PeriodicProfile) -> list[PeriodicProfile]:
    edges = np.unique(np.concatenate([p.edges for p in profiles]))
    return [p.refine(edges) for p in profiles]


# ----------------------------------------------------------------------------
# effective moduli of layered isotropic materials


def check_lame(lam, mu, where: str = "material") -> None:
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(mu))):
        raise ModelError(f"{where}: non-finite Lame modulus")
    if np.any(mu <= 0):
        raise ModelError(f"{where}: shear modulus mu must be positive (got min {mu.min():g})")
    if np.any(3 * lam + 2 * mu <= 0):
        raise ModelError(f"{where}: 3*lambda + 2*mu must be positive for a positive definite tensor")


@dataclass(frozen=True)
class EffectiveModuli:
    """Scalar moduli entering the closed-form corrector formulas."""

    lam: PeriodicProfile
    mu: PeriodicProfile
    nu: PeriodicProfile
    beta: PeriodicProfile
    M: PeriodicProfile
    nu_inf: float
    beta0: float
    beta_inf: float
    g_inf: PeriodicProfile
    mu_hom: float

    def beta_gamma(self, gamma: float) -> float:
        if gamma == 0:
            return self.beta0
        if math.isinf(gamma):
            return self.beta_inf
        raise ModelError("closed forms exist only for gamma = 0 and gamma = inf")


def effective_moduli(lam: PeriodicProfile, mu: PeriodicProfile) -> EffectiveModuli:
    lam, mu = common_refinement(lam, mu)
    check_lame(lam.values, mu.values)
    L, U = lam.values, mu.values
    M = 2 * U + L
    nu = L / (2 * (U + L))
    beta = U * (2 * U + 3 * L) / (U + L)
    w = lam.lengths
    M_hom = 1.0 / (w @ (1.0 / M))
    lm = w @ (L / M)
    nu_inf = 0.5 * M_hom * lm / (lm ** 2 * M_hom - w @ (L ** 2 / M) + w @ (L + U))
    beta0 = 1.0 / (w @ (1.0 / beta))
    beta_inf = M_hom * (1 - 2 * nu_inf * lm)
    g = 2 * (U + L) * nu_inf - (beta_inf + 2 * nu_inf * L) * L / M
    e = lam.edges
    return EffectiveModuli(
        lam=lam,
        mu=mu,
        nu=PeriodicProfile(e, nu),
        beta=PeriodicProfile(e, beta),
        M=PeriodicProfile(e, M),
        nu_inf=float(nu_inf),
        beta0=float(beta0),
        beta_inf=float(beta_inf),
        g_inf=PeriodicProfile(e, g),
        mu_hom=float(1.0 / (w @ (1.0 / U))),
    )


# ----------------------------------------------------------------------------
# materials


class LayeredMaterial:
    """Isotropic material with Lame moduli depending on y only."""

    isotropic = True

    def __init__(self, lam: PeriodicProfile, mu: PeriodicProfile):
        lam, mu = common_refinement(lam, mu)
        check_lame(lam.values, mu.values)
        self.lam, self.mu = lam, mu

    @classmethod
    def homogeneous(cls, lam: float, mu: float) -> "LayeredMaterial":
        return cls(PeriodicProfile.constant(lam), PeriodicProfile.constant(mu))

    @classmethod
    def from_phases(cls, phases) -> "LayeredMaterial":
        """From rows ``(fraction, lambda, mu)`` laid out consecutively in y."""
        ph = np.asarray(phases, dtype=float).reshape(-1, 3)
        lam = PeriodicProfile.from_fractions(ph[:, 0], ph[:, 1])
        mu = PeriodicProfile.from_fractions(ph[:, 0], ph[:, 2])
        return cls(lam, mu)

    @property
    def y_breaks(self) -> tuple:
        return self.lam.breaks

    @property
    def is_homogeneous(self) -> bool:
        return self.lam.is_constant() and self.mu.is_constant()

    def moduli(self) -> EffectiveModuli:
        return effective_moduli(self.lam, self.mu)

    def mandel(self, mesh, y) -> np.ndarray:
        """Mandel matrices at (y, quadrature point), shape (len(y), n_quad, 6, 6)."""
        C = isotropic_mandel(self.lam(y), self.mu(y))
        return np.broadcast_to(C[:, None], (len(C), mesh.n_quad, 6, 6))

    def lame(self, y):
        return self.lam(y), self.mu(y)


class SampledMaterial:
    """Full elasticity tensors sampled per (y interval, section quadrature point)."""

    isotropic = False

    def __init__(self, y_edges, mandel, alpha: float = 0.0):
        self.profile = PeriodicProfile(y_edges, np.zeros(len(y_edges) - 1))
        C = np.asarray(mandel, dtype=float)
        if C.ndim != 4 or C.shape[0] != len(y_edges) - 1 or C.shape[2:] != (6, 6):
            raise ModelError("sampled material must have shape (n_y_intervals, n_quad, 6, 6)")
        if not np.all(np.isfinite(C)):
            raise ModelError("sampled material contains non-finite values")
        if np.max(np.abs(C - np.swapaxes(C, -1, -2))) > 1e-12 * max(1.0, np.abs(C).max()):
            raise ModelError("sampled material lacks major symmetry")
        w = np.linalg.eigvalsh(C)
        if w.min() <= alpha:
            raise ModelError(f"sampled material is not positive definite (min eigenvalue {w.min():g})")
        self.C = C

    @property
    def y_breaks(self) -> tuple:
        return self.profile.breaks

    @property
    def is_homogeneous(self) -> bool:
        return False

    def mandel(self, mesh, y) -> np.ndarray:
        if mesh.n_quad != self.C.shape[1]:
            raise ModelError(f"sampled material has {self.C.shape[1]} quadrature points, mesh has {mesh.n_quad}")
        y = np.mod(np.asarray(y, dtype=float), 1.0)
        idx = np.clip(np.searchsorted(self.profile.edges, y, side="right") - 1, 0, self.C.shape[0] - 1)
        return self.C[idx]


# ----------------------------------------------------------------------------
# prestrain fields


class Prestrain:
    """Prestrain B(xbar, y); :meth:`evaluate` returns Mandel vectors of sym B."""

    name = "prestrain"
    y_breaks: tuple = ()
    # angles (radians) where B jumps along circles about the origin
    angular_breaks: tuple = ()

    def evaluate(self, x2, x3, y) -> np.ndarray:
        """Mandel sym B at all (y, point) pairs, shape (len(y), n_points, 6)."""
        raise NotImplementedError

    def sample(self, mesh, y) -> np.ndarray:
        x2, x3 = mesh.quad_points.T
        return self.evaluate(x2, x3, y)

    def params(self) -> dict:
        return {}

    def preferred_disk_angle(self):
        """Mesh rotation that aligns disk element edges with jumps of B, if any."""
        return None


def _shape_out(x2, y):
    return np.zeros((len(np.atleast_1d(y)), len(np.atleast_1d(x2)), 6))


class NoPrestrain(Prestrain):
    name = "none"

    def evaluate(self, x2, x3, y):
        return _shape_out(x2, y)


class BilayerPrestrain(Prestrain):
    """B = sgn(x3) rho(y) Id with rho = +1 on [0, theta) and -1 on [theta, 1)."""

    name = "bilayer"

    def __init__(self, theta: float):
        if not 0.0 <= theta <= 1.0:
            raise ModelError(f"bilayer: theta must lie in [0, 1], got {theta}")
        self.theta = float(theta)
        self.rho = PeriodicProfile.from_fractions([self.theta, 1 - self.theta], [1.0, -1.0])
        self.y_breaks = self.rho.breaks

    def evaluate(self, x2, x3, y):
        out = _shape_out(x2, y)
        s = np.sign(np.asarray(x3, dtype=float))
        out[..., :3] = (self.rho(np.atleast_1d(y))[:, None] * s[None, :])[..., None]
        return out

    def params(self):
        return {"theta": self.theta}


class NematicPrestrain(Prestrain):
    """B = (rbar/3) Id - rbar n(x3) x n(x3) for the splay-bend or twist director.

    splay-bend: n = (cos(theta + pi x3/4), 0, sin(theta + pi x3/4));
    twist:      n = (cos(theta + pi x3/4), sin(theta + pi x3/4), 0).
    """

    def __init__(self, variant: str, theta: float, rbar: float = 1.0):
        v = variant.lower().replace("-", "_")
        if v in ("splaybend", "splay"):
            v = "splay_bend"
        if v not in ("splay_bend", "twist"):
            raise ModelError(f"nematic: unknown director family {variant!r}")
        self.variant = v
        self.name = v
        self.theta = float(theta)
        self.rbar = float(rbar)

    def director(self, x3) -> np.ndarray:
        t = self.theta + 0.25 * np.pi * np.asarray(x3, dtype=float)
        n = np.zeros(np.shape(t) + (3,))
        n[..., 0] = np.cos(t)
        n[..., 1 if self.variant == "twist" else 2] = np.sin(t)
        return n

    def matrix(self, x3) -> np.ndarray:
        n = self.director(x3)
        return self.rbar / 3.0 * np.eye(3) - self.rbar * n[..., :, None] * n[..., None, :]

    def evaluate(self, x2, x3, y):
        B = sym_to_mandel(self.matrix(np.atleast_1d(x3)))
        return np.broadcast_to(B, (len(np.atleast_1d(y)),) + B.shape).copy()

    def params(self):
        return {"theta": self.theta, "rbar": self.rbar}


class HalfDiskPrestrain(Prestrain):
    """B = (3 pi / 8) Id on {y < theta, angle of xbar in [alpha - pi/2, alpha + pi/2)}."""

    name = "halfdisk"
    amplitude = 3 * np.pi / 8

    def __init__(self, theta: float, alpha: float):
        if not 0.0 <= theta <= 1.0:
            raise ModelError(f"halfdisk: theta must lie in [0, 1], got {theta}")
        self.theta = float(theta)
        self.alpha = float(alpha) % (2 * np.pi)
        self.cell = PeriodicProfile.from_fractions([self.theta, 1 - self.theta], [1.0, 0.0])
        self.y_breaks = self.cell.breaks
        self.angular_breaks = (self.alpha - 0.5 * np.pi, self.alpha + 0.5 * np.pi)

    def indicator(self, x2, x3) -> np.ndarray:
        phi = np.arctan2(np.asarray(x3, float), np.asarray(x2, float))
        rel = np.mod(phi - (self.alpha - 0.5 * np.pi), 2 * np.pi)
        return (rel < np.pi).astype(float)

    def evaluate(self, x2, x3, y):
        out = _shape_out(x2, y)
        v = self.amplitude * self.cell(np.atleast_1d(y))[:, None] * self.indicator(x2, x3)[None, :]
        out[..., :3] = v[..., None]
        return out

    def params(self):
        return {"theta": self.theta, "alpha": self.alpha}

    def preferred_disk_angle(self):
        return self.alpha + 0.5 * np.pi


class AffinePrestrain(Prestrain):
    """B = sym[(K xbar + a e1) x e1], exactly representable by (K, a)."""

    name = "affine"

    def __init__(self, K: Skew3, a: float):
        self.K, self.a = K, float(a)

    def evaluate(self, x2, x3, y):
        B = sym_to_mandel(macro_strain(self.K, self.a, np.atleast_1d(x2), np.atleast_1d(x3)))
        return np.broadcast_to(B, (len(np.atleast_1d(y)),) + B.shape).copy()

    def params(self):
        return {"K": [self.K.c12, self.K.c13, self.K.c23], "a": self.a}


class ScaledPrestrain(Prestrain):
    """c * B for an existing field (used by linearity checks)."""

    def __init__(self, base: Prestrain, factor: float):
        self.base, self.factor = base, float(factor)
        self.name = base.name
        self.y_breaks = base.y_breaks
        self.angular_breaks = base.angular_breaks

    def evaluate(self, x2, x3, y):
        return self.factor * self.base.evaluate(x2, x3, y)

    def sample(self, mesh, y):
        return self.factor * self.base.sample(mesh, y)

    def params(self):
        return {**self.base.params(), "factor": self.factor}

    def preferred_disk_angle(self):
        return self.base.preferred_disk_angle()


class SampledPrestrain(Prestrain):
    """sym B given per (y interval, section quadrature point) as Mandel vectors."""

    name = "file"

    def __init__(self, y_edges, mandel):
        self.profile = PeriodicProfile(y_edges, np.zeros(len(y_edges) - 1))
        B = np.asarray(mandel, dtype=float)
        if B.ndim != 3 or B.shape[0] != len(y_edges) - 1 or B.shape[2] != 6:
            raise ModelError("sampled prestrain must have shape (n_y_intervals, n_quad, 6)")
        if not np.all(np.isfinite(B)):
            raise ModelError("sampled prestrain contains non-finite values")
        self.B = B
        self.y_breaks = self.profile.breaks

    def evaluate(self, x2, x3, y):
        raise ModelError("sampled prestrain is only defined at the mesh quadrature points")

    def sample(self, mesh, y):
        if mesh.n_quad != self.B.shape[1]:
            raise ModelError(f"sampled prestrain has {self.B.shape[1]} quadrature points, mesh has {mesh.n_quad}")
        y = np.mod(np.asarray(y, dtype=float), 1.0)
        idx = np.clip(np.searchsorted(self.profile.edges, y, side="right") - 1, 0, self.B.shape[0] - 1)
        return self.B[idx]


def nematic_prestrain(variant: str, theta: float, rbar: float = 1.0) -> NematicPrestrain:
    return NematicPrestrain(variant, theta, rbar)


def halfdisk_prestrain(theta: float, alpha: float, section=None) -> HalfDiskPrestrain:
    if section is not None and section.get("kind") != "disk":
        raise ModelError("halfdisk prestrain requires the unit-disk cross-section")
    if section is not None and abs(section.get("radius", 1.0) - 1.0) > 0:
        raise ModelError("halfdisk prestrain requires the unit-disk cross-section")
    return HalfDiskPrestrain(theta, alpha)


# ----------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class Slice:
    x1_start: float
    x1_end: float
    material: object
    prestrain: Prestrain = field(default_factory=NoPrestrain)

    @property
    def length(self) -> float:
        return self.x1_end - self.x1_start

    @property
    def y_breaks(self) -> tuple:
        return tuple(sorted(set(self.material.y_breaks) | set(self.prestrain.y_breaks)))


@dataclass(frozen=True)
class MicrostructureModel:
    """Rod of length ``length`` with slicewise coefficients and scale ratio ``gamma``.

    ``section`` is a dict describing the cross-section (see
    :func:`rodhom.section.build_section`).
    """

    length: float
    gamma: float
    section: dict
    slices: tuple
    name: str = "model"

    def __post_init__(self):
        object.__setattr__(self, "gamma", parse_gamma(self.gamma))
        object.__setattr__(self, "slices", tuple(self.slices))
        if not self.length > 0:
            raise ModelError("rod length must be positive")
        if not self.slices:
            raise ModelError("model needs at least one slice")
        x = 0.0
        for i, s in enumerate(self.slices):
            if abs(s.x1_start - x) > 1e-12 or not s.x1_end > s.x1_start:
                raise ModelError(f"slice {i}: slices must tile [0, length] in order")
            x = s.x1_end
        if abs(x - self.length) > 1e-12:
            raise ModelError(f"slices end at {x}, rod length is {self.length}")

    @property
    def is_isotropic(self) -> bool:
        return all(s.material.isotropic for s in self.slices)

    def with_gamma(self, gamma: float) -> "MicrostructureModel":
        return MicrostructureModel(self.length, gamma, self.section, self.slices, self.name)


def bilayer_model(lam: float, mu1: float, mu2: float, theta: float, gamma, length: float = 1.0) -> MicrostructureModel:
    """Square-section bilayer: mu = mu1 on [0, theta), mu2 after; B = sgn(x3) rho(y) Id."""
    if not 0.0 <= theta <= 1.0:
        raise ModelError(f"bilayer: theta must lie in [0, 1], got {theta}")
    mat = LayeredMaterial(
        PeriodicProfile.constant(lam),
        PeriodicProfile.from_fractions([theta, 1 - theta], [mu1, mu2]),
    )
    sl = Slice(0.0, float(length), mat, BilayerPrestrain(theta))
    return MicrostructureModel(float(length), parse_gamma(gamma), {"kind": "square", "half_width": 1.0},
                               (sl,), name="bilayer")


__all__ = [
    "ModelError",
    "PeriodicProfile",
    "EffectiveModuli",
    "effective_moduli",
    "LayeredMaterial",
    "SampledMaterial",
    "Prestrain",
    "NoPrestrain",
    "BilayerPrestrain",
    "NematicPrestrain",
    "HalfDiskPrestrain",
    "AffinePrestrain",
    "ScaledPrestrain",
    "SampledPrestrain",
    "Slice",
    "MicrostructureModel",
    "bilayer_model",
    "nematic_prestrain",
    "halfdisk_prestrain",
    "parse_gamma",
    "gamma_token",
]

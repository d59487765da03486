"""Resolvent of finitely many high-contrast inclusions and of their point limit.

With Xi = (Xi_y) in the direct sum of L^2(Omega) over the centers y:

  (A Xi)(x)  = sum_y int_Omega G(x - y - r z) Xi_y(z) dz
  (E f)_y(x) = (R_0 f)(y + r x)
  (B Xi)_y   = mu_y int_Omega G(r(. - z)) Xi_y(z) dz
  (C Xi)_y   = sum_{y1 != y} int_Omega G(r(. - z) + y - y1) Xi_y1(z) dz
  (D Xi)_y   = mu_y Xi_y,         F = lam (1 - lam B)^{-1} D

and (H - nu)^{-1} = R_0 + A (1 - F C)^{-1} F E with H = -Lap - lam (w_r - 1).
All operators act on coefficient vectors of a basis of L^2(Omega) per center
(see ``basis``); the Galerkin matrices are divided by the diagonal Gram matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as sla

from ..design import COUPLING_SHIFT, limit_coupling, log_self_energy
from ..errors import NearResonance, NotContractive, SingularQ
from ..geometry import CrystalSpec, InclusionShape
from ..latticesum import q_matrix_points
from ..parallel import parallel_map
from ..specfun import as_spectral, green_radial, log_term, EULER_GAMMA
from .basis import PolarBasis, TriangleBasis, make_basis

SINGULAR_Q_COND = 1e12


@dataclass(frozen=True)
class FiniteCrystal:
    """Finitely many scaled inclusions y + r Omega with per-center target class."""

    centers: tuple
    classes: tuple
    lambdas: tuple
    coefficients: tuple
    shape: InclusionShape
    r: float

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "centers", tuple(map(tuple, c.tolist())))
        object.__setattr__(self, "classes", tuple(int(k) for k in self.classes))
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        object.__setattr__(self, "coefficients", tuple(float(v) for v in self.coefficients))
        if len(self.classes) != len(self.centers):
            raise ValueError("one class index per center")
        if len(self.lambdas) != len(self.coefficients):
            raise ValueError("lambdas and coefficients differ in length")
        if any(k < 0 or k >= len(self.lambdas) for k in self.classes):
            raise ValueError("class index out of range")
        if not 0 < self.r < 1:
            raise ValueError("r must lie in (0, 1)")
        if len(c) > 1:
            d = np.hypot(*(c[:, None, :] - c[None, :, :]).transpose(2, 0, 1))
            d[np.diag_indices(len(c))] = np.inf
            if d.min() <= 2 * self.r * self.shape.bounding_radius:
                raise ValueError("inclusions overlap: centers closer than 2 r R_Omega")

    @classmethod
    def from_spec(cls, spec: CrystalSpec, r: float | None = None, shells: int = 0) -> "FiniteCrystal":
        """Centers of ``spec`` plus their translates by p1 a1 + p2 a2, |p_i| <= shells."""
        lat = spec.lattice
        pts, classes = [], []
        for p1 in range(-shells, shells + 1):
            for p2 in range(-shells, shells + 1):
                t = p1 * np.asarray(lat.a1) + p2 * np.asarray(lat.a2)
                for n, y in enumerate(spec.centers_array):
                    pts.append(y + t)
                    classes.append(n)
        return cls(tuple(map(tuple, pts)), tuple(classes), spec.lambdas, spec.coefficients,
                   spec.shape, spec.r if r is None else r)

    def with_r(self, r: float) -> "FiniteCrystal":
        return FiniteCrystal(self.centers, self.classes, self.lambdas, self.coefficients, self.shape, r)

    def translated(self, t) -> "FiniteCrystal":
        c = np.asarray(self.centers) + np.asarray(t, dtype=float)
        return FiniteCrystal(c, self.classes, self.lambdas, self.coefficients, self.shape, self.r)

    @property
    def centers_array(self) -> np.ndarray:
        return np.asarray(self.centers, dtype=float).reshape(-1, 2)

    @property
    def size(self) -> int:
        return len(self.centers)

    def mu(self) -> np.ndarray:
        """mu(r, y) = mu_n(1/|ln r|) per center."""
        x = 1.0 / abs(math.log(self.r))
        A = self.shape.area
        return np.array([2 * math.pi * x / (self.lambdas[n] * A) + self.coefficients[n] * x * x
                         for n in self.classes])

    def limit_data(self, corrected: bool = True) -> "LimitData":
        """Per-class limit couplings; ``corrected=False`` drops COUPLING_SHIFT."""
        C = log_self_energy(self.shape)
        shift = 0.0 if corrected else COUPLING_SHIFT
        alphas = tuple(float(limit_coupling(c, lam, self.shape, C)) - shift
                       for c, lam in zip(self.coefficients, self.lambdas))
        return LimitData(self.lambdas, alphas, self.shape.area)


@dataclass(frozen=True)
class LimitData:
    lambdas: tuple
    alphas: tuple
    area: float


def f_limit(n: int, nu, lam: float, design: LimitData) -> complex:
    """q(y, nu, lam) / |Omega|^2 for a center of class n, where

        q = 2 pi / (ln(sqrt(nu)/2i) - gamma + 2 pi alpha_n)  if lam = lambda_n, else 0.
    """
    target = design.lambdas[n]
    if abs(lam - target) > 1e-12 * max(1.0, abs(target)):
        return 0j
    den = log_term(as_spectral(nu).nu) - EULER_GAMMA + 2 * math.pi * design.alphas[n]
    if abs(den) < 1e-12:
        raise NearResonance(f"limit denominator {abs(den):.3e} at nu={nu}")
    return complex(2 * math.pi / den / design.area ** 2)


@dataclass
class ResolventSamples:
    points: np.ndarray
    values: np.ndarray
    info: dict = field(default_factory=dict)


DENSE_NORM_LIMIT = 800


def _wnorm(X: np.ndarray, gram: np.ndarray) -> float:
    """Operator norm on the weighted coefficient space."""
    s = np.sqrt(gram)
    Y = (s[:, None] * X) / s[None, :]
    if len(Y) <= DENSE_NORM_LIMIT:
        return float(np.linalg.norm(Y, 2))
    v0 = np.ones(Y.shape[1], dtype=complex)
    return float(sla.svds(Y, k=1, v0=v0, return_singular_vectors=False, tol=1e-12)[0])


def _pair_block(task):
    basis, nu, r, D = task
    z = basis.nodes
    diff = r * (z[:, None, :] - z[None, :, :]) + np.asarray(D)[None, None, :]
    G = green_radial(np.hypot(diff[..., 0], diff[..., 1]), nu, warn=False)
    Wp = basis.weights[:, None] * basis.P
    return (Wp.conj().T @ G @ Wp) / basis.gram[:, None]


@dataclass
class BSOperators:
    """Assembled operators of a finite crystal at one spectral parameter."""

    fc: FiniteCrystal
    nu: complex
    basis: object
    B: list  # per-center blocks, operator form, mu included
    C: np.ndarray  # (M nb, M nb) operator form, zero diagonal blocks
    D: np.ndarray  # mu per center

    @property
    def nb(self) -> int:
        return self.basis.size

    @property
    def gram(self) -> np.ndarray:
        return np.tile(self.basis.gram, self.fc.size)

    def _blockdiag(self, blocks) -> np.ndarray:
        M, nb = self.fc.size, self.nb
        out = np.zeros((M * nb, M * nb), dtype=complex)
        for i, b in enumerate(blocks):
            out[i * nb:(i + 1) * nb, i * nb:(i + 1) * nb] = b
        return out

    def B_matrix(self) -> np.ndarray:
        return self._blockdiag(self.B)

    def D_matrix(self) -> np.ndarray:
        return np.diag(np.repeat(self.D, self.nb)).astype(complex)

    def F(self, lam: float) -> np.ndarray:
        """F_r = lam (1 - lam B)^{-1} D, block by block."""
        eye = np.eye(self.nb)
        return self._blockdiag([lam * mu * la.solve(eye - lam * b, eye)
                                for b, mu in zip(self.B, self.D)])

    def _mean_row(self) -> np.ndarray:
        # <phi_b> = int_Omega phi_b
        return self.basis.weights @ self.basis.P

    def F_limit(self, lam: float, design: LimitData) -> np.ndarray:
        """Rank-one blocks q/|Omega|^2 <Xi_y> 1."""
        row = self._mean_row()
        blocks = [f_limit(n, self.nu, lam, design) * np.outer(self.basis.const, row)
                  for n in self.fc.classes]
        return self._blockdiag(blocks)

    def C0(self) -> np.ndarray:
        """C at r = 0: blocks G(y - y1) <Xi_y1> 1."""
        M, nb = self.fc.size, self.nb
        c = self.fc.centers_array
        row = self._mean_row()
        out = np.zeros((M * nb, M * nb), dtype=complex)
        for i in range(M):
            for j in range(M):
                if i != j:
                    g = green_radial(math.dist(c[i], c[j]), self.nu, warn=False)
                    out[i * nb:(i + 1) * nb, j * nb:(j + 1) * nb] = g * np.outer(self.basis.const, row)
        return out

    def norm(self, X: np.ndarray) -> float:
        return _wnorm(X, self.gram)

    def A_matrix(self, points) -> np.ndarray:
        """(A Xi)(x) for x in ``points`` as a matrix on coefficients."""
        x = np.asarray(points, dtype=float).reshape(-1, 2)
        b = self.basis
        Wp = b.weights[:, None] * b.P
        cols = []
        for y in self.fc.centers_array:
            diff = x[:, None, :] - (y[None, None, :] + self.fc.r * b.nodes[None, :, :])
            G = green_radial(np.hypot(diff[..., 0], diff[..., 1]), self.nu, warn=False)
            cols.append(G @ Wp)
        return np.hstack(cols)

    def A0_matrix(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=float).reshape(-1, 2)
        row = self._mean_row()
        cols = []
        for y in self.fc.centers_array:
            g = green_radial(np.hypot(*(x - y).T), self.nu, warn=False)
            cols.append(np.outer(g, row))
        return np.hstack(cols)

    def E_vector(self, f) -> np.ndarray:
        """Coefficients of (E f)_y = (R_0 f)(y + r .) per center (L^2 projection)."""
        b = self.basis
        out = []
        for y in self.fc.centers_array:
            v = f.free_resolvent(y[None, :] + self.fc.r * b.nodes, self.nu)
            out.append((b.P.conj().T @ (b.weights * v)) / b.gram)
        return np.concatenate(out)

    def E0_vector(self, f) -> np.ndarray:
        v = f.free_resolvent(self.fc.centers_array, self.nu)
        return np.concatenate([vi * self.basis.const for vi in np.atleast_1d(v)])


def assemble_bs(fc: FiniteCrystal, nu, order: str = "standard", basis=None, jobs: int | None = 1) -> BSOperators:
    """Assemble B, C, D on a basis of L^2(Omega); A and E are applied on demand.

    ``order`` picks the basis resolution ('coarse', 'standard', 'fine') unless an
    explicit ``basis`` is given.  Off-diagonal blocks depend only on y - y1 and
    are computed once per distinct difference.
    """
    p = as_spectral(nu)
    if p.nu.imag == 0:
        raise ValueError("assemble_bs needs Im nu != 0")
    nu = p.nu
    basis = make_basis(fc.shape, order) if basis is None else basis
    mu = fc.mu()
    S = basis.self_block(nu, fc.r) / basis.gram[:, None]
    B = [m * S for m in mu]
    M, nb = fc.size, basis.size
    C = np.zeros((M * nb, M * nb), dtype=complex)
    if M > 1:
        c = fc.centers_array
        keys = {}
        for i in range(M):
            for j in range(M):
                if i != j:
                    keys.setdefault(tuple(np.round(c[i] - c[j], 12)), []).append((i, j))
        diffs = sorted(keys)
        blocks = parallel_map(_pair_block, [(basis, nu, fc.r, D) for D in diffs], jobs)
        for D, blk in zip(diffs, blocks):
            for i, j in keys[D]:
                C[i * nb:(i + 1) * nb, j * nb:(j + 1) * nb] = blk
    return BSOperators(fc, nu, basis, B, C, mu)


def bs_resolvent_apply(fc: FiniteCrystal, nu, lam: float, f, points, order: str = "standard",
                       ops: BSOperators | None = None) -> ResolventSamples:
    """(H_{r,lam} - nu)^{-1} f at ``points`` through R_0 + A (1 - F C)^{-1} F E."""
    ops = assemble_bs(fc, nu, order) if ops is None else ops
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    u0 = f.free_resolvent(pts, ops.nu)
    if lam == 0:
        return ResolventSamples(pts, u0, {"contraction": 0.0})
    F = ops.F(lam)
    FC = F @ ops.C
    kappa = ops.norm(FC) if fc.size > 1 else 0.0
    if kappa >= 1:
        raise NotContractive(f"||F_r C_r|| = {kappa:.3f} >= 1; try a larger |Im nu|")
    xi = la.solve(np.eye(len(F)) - FC, F @ ops.E_vector(f))
    return ResolventSamples(pts, u0 + ops.A_matrix(pts) @ xi, {"contraction": kappa})


def _scaled_basis(basis, r: float):
    if isinstance(basis, PolarBasis):
        return PolarBasis(basis.radius * r, panels=basis.edges / basis.radius, order=basis.order,
                          m_max=basis.m_max, n_phi=basis.n_phi, fine=basis.fine)
    if isinstance(basis, TriangleBasis):
        out = TriangleBasis.__new__(TriangleBasis)
        out.triangles = basis.triangles * r
        out.nodes = basis.nodes * r
        out.weights = basis.weights * r * r
        out.owner = basis.owner
        out.P = basis.P
        out.gram = basis.gram * r * r
        out.const = basis.const
        out.area = basis.area * r * r
        return out
    raise TypeError("unknown basis")


def factorization_resolvent_apply(fc: FiniteCrystal, nu, lam: float, f, points,
                                  order: str = "standard") -> ResolventSamples:
    """Same resolvent through R_0 + lam R_0 v (1 - lam u R_0 v)^{-1} u R_0 in physical coordinates.

    u R_0 v is discretised directly on the inclusions y + r Omega (basis of the
    scaled shape, kernel G(x - x')), with no rescaling and no F / C split.
    """
    nu = as_spectral(nu).nu
    ref = make_basis(fc.shape, order)
    b = _scaled_basis(ref, fc.r)
    M, nb = fc.size, b.size
    c = fc.centers_array
    pot = fc.mu() / fc.r ** 2  # w_r - 1 per inclusion
    K = np.zeros((M * nb, M * nb), dtype=complex)
    S = b.self_block(nu, 1.0)
    Wp = b.weights[:, None] * b.P
    for i in range(M):
        K[i * nb:(i + 1) * nb, i * nb:(i + 1) * nb] = S
        for j in range(M):
            if i != j:
                diff = (c[i] + b.nodes)[:, None, :] - (c[j] + b.nodes)[None, :, :]
                G = green_radial(np.hypot(diff[..., 0], diff[..., 1]), nu, warn=False)
                K[i * nb:(i + 1) * nb, j * nb:(j + 1) * nb] = Wp.conj().T @ G @ Wp
    gram = np.tile(b.gram, M)
    K = np.repeat(pot, nb)[:, None] * K / gram[:, None]
    rhs = np.concatenate([pot[i] * (b.P.conj().T @ (b.weights * f.free_resolvent(c[i] + b.nodes, nu))) / b.gram
                          for i in range(M)])
    phi = la.solve(np.eye(M * nb) - lam * K, rhs)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    cols = []
    for i in range(M):
        diff = pts[:, None, :] - (c[i] + b.nodes)[None, :, :]
        G = green_radial(np.hypot(diff[..., 0], diff[..., 1]), nu, warn=False)
        cols.append(G @ Wp)
    u = f.free_resolvent(pts, nu) + lam * np.hstack(cols) @ phi
    return ResolventSamples(pts, u, {})


def pi_resolvent_apply(centers, alphas, nu, f, points) -> ResolventSamples:
    """R_0 f + sum_{l,m} [Q^{-1}]_{ml} (R_0 f)(y_l) G(. - y_m) for finitely many centers."""
    nu = as_spectral(nu).nu
    c = np.asarray(centers, dtype=float).reshape(-1, 2)
    Q = q_matrix_points(alphas, c, nu)
    cond = float(np.linalg.cond(Q))
    if not np.isfinite(cond) or cond > SINGULAR_Q_COND:
        raise SingularQ(f"Q matrix condition number {cond:.3e}")
    coef = la.solve(Q, np.atleast_1d(f.free_resolvent(c, nu)))
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    G = np.column_stack([green_radial(np.hypot(*(pts - y).T), nu, warn=False) for y in c])
    return ResolventSamples(pts, f.free_resolvent(pts, nu) + G @ coef, {"condition": cond})


def bs_pairing(fc: FiniteCrystal, nu, lam: float, f, g, order: str = "standard") -> complex:
    """int ((H - nu)^{-1} f)(x) g(x) dx for Gaussians f, g.

    The correction term int (A Xi) g = sum_y int Xi_y(z) (R_0 g)(y + r z) dz uses
    E applied to g, so no plane quadrature is needed.
    """
    ops = assemble_bs(fc, nu, order)
    free = f.pair_free(g, ops.nu)
    if lam == 0:
        return free
    F = ops.F(lam)
    xi = la.solve(np.eye(len(F)) - F @ ops.C, F @ ops.E_vector(f))
    eg = ops.E_vector(g)
    # int Xi_y (E g)_y over Omega, with the basis Gram matrix (no conjugation)
    b = ops.basis
    Wp = b.weights[:, None] * b.P
    nb = b.size
    total = 0j
    for i in range(fc.size):
        sl = slice(i * nb, (i + 1) * nb)
        total += (Wp @ xi[sl]) @ (b.P @ eg[sl])
    return complex(free + total)

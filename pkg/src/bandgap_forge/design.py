"""Inverse design: from target values to a crystal whose TM gaps contain them."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BadBaseCoupling, InvalidDesignInputs, NoConvergence
from .geometry import CrystalSpec, InclusionShape, Lattice, min_center_separation
from .pointspec import (EdgeSet, PointInteractionModel, band_edges, place_gap, spectrum_pi,
                        threshold)
from .specfun import EULER_GAMMA

# Limit coupling alpha_n of class n in the convention of the Q matrix diagonal
# alpha - (gamma - ln(sqrt(nu)/2i))/2pi:
#     alpha_n = -c_n lambda_n |Omega| / 4pi^2 + C / (2pi |Omega|^2) + COUPLING_SHIFT.
# The constant follows from expanding G_nu(r(x - z)) for small r; see
# tests/test_approx.py for the numerical confirmation.
COUPLING_SHIFT = EULER_GAMMA / math.pi
R_CAP = 0.5


class NegativeContrast(UserWarning):
    """The requested scale r makes some mu_n(1/|ln r|) non-positive."""


# self-energy -------------------------------------------------------------------

def _disk_potential(rho, a):
    """int_{B_a} ln|x - z| dz for |x| = rho <= a."""
    return np.pi * a * a * math.log(a) + 0.5 * np.pi * (rho * rho - a * a)


def _triangle_log_integrals(x: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Signed int over triangle (x, p, q) of ln|z - x| dz, vectorised over points x."""
    e = q - p
    le = math.hypot(e[0], e[1])
    t = e / le
    dxp = p - x
    h = dxp[..., 0] * t[1] - dxp[..., 1] * t[0]  # signed: > 0 when x is left of p -> q
    sign = np.sign(h)
    h = np.abs(h)
    sp = dxp @ t
    sq = sp + le

    def F(s):
        out = np.zeros_like(s)
        ok = h > 0
        hh, ss = h[ok], s[ok]
        out[ok] = 0.5 * (hh * ss * (0.5 * np.log(hh * hh + ss * ss) - 1.5) + hh * hh * np.arctan(ss / hh))
        return out

    return sign * (F(sq) - F(sp))


def polygon_log_potential(x, vertices) -> np.ndarray:
    """u(x) = int_Omega ln|x - z| dz for a counter-clockwise polygon (exact)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(vertices, dtype=float)
    u = np.zeros(x.shape[:-1])
    for i in range(len(v)):
        u += _triangle_log_integrals(x, v[i], v[(i + 1) % len(v)])
    return u


def log_potential(x, shape: InclusionShape) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if shape.kind == "disk":
        rho = np.hypot(x[..., 0], x[..., 1])
        a = shape.radius
        out = np.empty(rho.shape)
        inside = rho <= a
        out[inside] = _disk_potential(rho[inside], a)
        out[~inside] = np.pi * a * a * np.log(rho[~inside])
        return out
    return polygon_log_potential(x, shape.vertices)


def triangulate(vertices) -> list:
    """Ear-clipping triangulation of a simple counter-clockwise polygon."""
    v = [np.asarray(p, dtype=float) for p in vertices]
    idx = list(range(len(v)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3 and guard < 10000:
        guard += 1
        for k in range(len(idx)):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % len(idx)]
            a, b, c = v[i0], v[i1], v[i2]
            if cross(a, b, c) <= 0:
                continue
            ear = True
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = v[j]
                if cross(a, b, p) >= 0 and cross(b, c, p) >= 0 and cross(c, a, p) >= 0:
                    ear = False
                    break
            if ear:
                tris.append((a, b, c))
                idx.pop(k)
                break
    tris.append(tuple(v[i] for i in idx))
    return tris


def triangle_rule(n: int):
    """Collapsed Gauss-Legendre rule on the reference triangle (0,0),(1,0),(0,1)."""
    g, w = np.polynomial.legendre.leggauss(n)
    g = 0.5 * (g + 1)
    w = 0.5 * w
    U, V = np.meshgrid(g, g, indexing="ij")
    WU, WV = np.meshgrid(w, w, indexing="ij")
    xi = U.ravel()
    eta = (V * (1 - U)).ravel()
    wt = (WU * WV * (1 - U)).ravel()
    return np.column_stack([xi, eta]), wt


def _tri_quad(f, a, b, c, rule):
    pts, wt = rule
    J = np.column_stack([b - a, c - a])
    x = a + pts @ J.T
    return abs(np.linalg.det(J)) * float(np.dot(wt, f(x)))


def _adaptive_triangle(f, a, b, c, tol, rule, depth=0, max_depth=14):
    whole = _tri_quad(f, a, b, c, rule)
    ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
    kids = [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
    parts = [_tri_quad(f, *k, rule) for k in kids]
    fine = sum(parts)
    if abs(fine - whole) < tol or depth >= max_depth:
        if abs(fine - whole) >= tol:
            raise NoConvergence("triangle quadrature did not converge", estimate=fine)
        return fine
    return sum(_adaptive_triangle(f, *k, tol / 2, rule, depth + 1, max_depth) for k in kids)


def log_self_energy(shape: InclusionShape, tol: float = 1e-10) -> float:
    """C = int_Omega int_Omega ln|x - z| dx dz.

    The inner integral is done in closed form (interior log potential); the outer
    one by Gauss quadrature, radial for the disk and adaptive on a triangulation
    for polygons.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if shape.kind == "disk":
        a = shape.radius
        g, w = np.polynomial.legendre.leggauss(8)
        rho = 0.5 * a * (g + 1)
        return float(2 * np.pi * 0.5 * a * np.dot(w, rho * _disk_potential(rho, a)))
    rule = triangle_rule(8)
    verts = shape.vertices
    tris = triangulate(verts)
    return float(sum(_adaptive_triangle(lambda x: polygon_log_potential(x, verts), a, b, c,
                                        tol / len(tris), rule) for a, b, c in tris))


# couplings ------------------------------------------------------------------

def coupling_constants(targets, shape: InclusionShape, alpha: float, C: float | None = None) -> np.ndarray:
    """c_n per target such that every class has limit coupling ``alpha``."""
    lam = np.asarray(targets, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("targets must be positive")
    C = log_self_energy(shape) if C is None else C
    A = shape.area
    return 4 * np.pi ** 2 / (lam * A) * (C / (2 * np.pi * A ** 2) + COUPLING_SHIFT - alpha)


def limit_coupling(c, lam, shape: InclusionShape, C: float | None = None):
    """Inverse of :func:`coupling_constants`."""
    C = log_self_energy(shape) if C is None else C
    A = shape.area
    return -np.asarray(c) * np.asarray(lam) * A / (4 * np.pi ** 2) + C / (2 * np.pi * A ** 2) + COUPLING_SHIFT


def mu_eval(n: int, x: float, spec: CrystalSpec) -> float:
    """mu_n(x) = 2 pi x / (lambda_n |Omega|) + c_n x^2."""
    lam = spec.lambdas[n]
    c = spec.coefficients[n]
    return 2 * np.pi * x / (lam * spec.shape.area) + c * x * x


def contrast(spec: CrystalSpec, r: float | None = None) -> np.ndarray:
    """Per-inclusion contrast mu_n(1/|ln r|) / r^2 (so w = 1 + contrast inside)."""
    r = spec.r if r is None else r
    x = 1.0 / abs(math.log(r))
    return np.array([mu_eval(n, x, spec) for n in range(spec.n_inclusions)]) / (r * r)


def r_positivity(spec: CrystalSpec) -> float:
    rmax = R_CAP
    for n in range(spec.n_inclusions):
        c = spec.coefficients[n]
        if c < 0:
            xstar = 2 * np.pi / (spec.lambdas[n] * spec.shape.area * abs(c))
            rmax = min(rmax, math.exp(-1.0 / xstar))
    return rmax


def r_disjoint(spec: CrystalSpec) -> float:
    sep = min_center_separation(spec.lattice, spec.centers_array)
    return sep / (2 * spec.shape.bounding_radius)


def r_max(spec: CrystalSpec) -> float:
    """Largest admissible r (<= 0.5): positive contrasts and disjoint inclusions."""
    return min(r_positivity(spec), r_disjoint(spec))


def inclusion_index(x, spec: CrystalSpec, r: float | None = None) -> np.ndarray:
    """Index of the inclusion containing each point (modulo the lattice), -1 in vacuum."""
    r = spec.r if r is None else r
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, 2)
    out = np.full(len(flat), -1, dtype=int)
    lat = spec.lattice
    offs = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float) @ lat.basis
    R = r * spec.shape.bounding_radius
    for n, y in enumerate(spec.centers_array):
        # nearest image in fractional coordinates, then the 3x3 neighbours
        s = lat.to_fractional(flat - y)
        d0 = lat.to_cartesian(s - np.round(s))
        hit = np.zeros(len(flat), dtype=bool)
        for o in offs:
            d = d0 + o
            near = (~hit) & (np.einsum("ij,ij->i", d, d) <= R * R * (1 + 1e-12))
            if np.any(near):
                hit[near] = spec.shape.contains(d[near] / r)
        out[hit & (out < 0)] = n
    return out.reshape(x.shape[:-1])


def weight_eval(x, spec: CrystalSpec, r: float | None = None):
    """Permittivity w_r(x) = 1 + mu_n(1/|ln r|)/r^2 on inclusion n, 1 elsewhere."""
    r = spec.r if r is None else r
    x = np.asarray(x, dtype=float)
    if spec.n_inclusions == 0 or r <= 0:
        return np.ones(x.shape[:-1]) if x.ndim > 1 else 1.0
    if r >= r_positivity(spec):
        warnings.warn(f"r = {r} is not below the positivity threshold", NegativeContrast, stacklevel=2)
    idx = inclusion_index(x, spec, r)
    vals = np.concatenate([[0.0], contrast(spec, r)])
    w = 1.0 + vals[idx + 1]
    return w if x.ndim > 1 else float(w)


# design pipeline ------------------------------------------------------------------

def design_margin(shape: InclusionShape) -> float:
    """eta = 2 pi / |Omega| + 1."""
    return 2 * np.pi / shape.area + 1.0


@dataclass
class DesignInputs:
    targets: tuple
    shape: InclusionShape = field(default_factory=InclusionShape.disk)
    base_lattice: Lattice = field(default_factory=Lattice.square)
    alpha0: float | None = None
    margin: float | None = None
    centers: tuple | None = None  # fractional coordinates in the base cell
    r: float | None = None


@dataclass
class DesignReport:
    k: float
    alpha0: float
    alpha_k: float
    eta: float
    margin: float
    interval: tuple
    base_edges: EdgeSet
    edges: EdgeSet
    threshold: float
    self_energy: float
    coefficients: tuple
    r_max: float
    r: float

    def as_dict(self) -> dict:
        return {
            "k": self.k, "alpha0": self.alpha0, "alpha_k": self.alpha_k, "eta": self.eta,
            "margin": self.margin, "interval": list(self.interval),
            "base_edges": self.base_edges.as_dict(), "edges": self.edges.as_dict(),
            "threshold": self.threshold, "self_energy": self.self_energy,
            "coefficients": list(self.coefficients), "r_max": self.r_max, "r": self.r,
        }


def default_centers(n: int) -> np.ndarray:
    """Fractional centers: the cell middle for one inclusion, a diagonal spread otherwise."""
    if n == 1:
        return np.array([[0.5, 0.5]])
    t = (np.arange(n) + 0.5) / n
    return np.column_stack([t, t])


def design_crystal(inputs: DesignInputs, tol: float = 1e-10):
    """Run the design recipe; returns (CrystalSpec, DesignReport)."""
    lam = np.asarray(inputs.targets, dtype=float)
    if lam.size == 0 or np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise InvalidDesignInputs("targets must be positive and strictly increasing")
    shape = inputs.shape
    lat0 = inputs.base_lattice
    thr = threshold(lat0)
    alpha0 = thr - 1.0 if inputs.alpha0 is None else float(inputs.alpha0)
    if not alpha0 < thr:
        raise BadBaseCoupling(f"alpha0 = {alpha0} is not below the gap threshold {thr}")
    margin = 0.1 * lam[0] if inputs.margin is None else float(inputs.margin)
    if not margin > 0:
        raise InvalidDesignInputs("margin must be positive")
    eta = design_margin(shape)
    base = PointInteractionModel(alpha0, lat0)
    base_edges = band_edges(base, tol)
    lo, hi = lam[0] - eta - 2 * margin, lam[-1] + eta + 2 * margin
    k, scaled = place_gap(lo, hi, base, edges=base_edges, tol=tol)
    edges = band_edges(scaled, tol)
    C = log_self_energy(shape)
    coeffs = coupling_constants(lam, shape, scaled.alpha, C)
    frac = default_centers(len(lam)) if inputs.centers is None else np.asarray(inputs.centers, dtype=float)
    if frac.shape != (len(lam), 2):
        raise InvalidDesignInputs("need one (s1, s2) center per target")
    centers = scaled.lattice.to_cartesian(frac)
    spec = CrystalSpec(scaled.lattice, centers, lam, coeffs, shape, 0.0)
    rm = r_max(spec)
    r = inputs.r
    if r is None:
        r = min(0.05, 0.5 * rm)
    elif not 0 < r < rm:
        raise InvalidDesignInputs(f"r = {r} must lie in (0, r_max = {rm})")
    spec = spec.with_r(r)
    report = DesignReport(k, alpha0, scaled.alpha, eta, margin, (lo, hi), base_edges, edges, thr, C,
                          tuple(coeffs), rm, r)
    return spec, report


def verify_design(spec: CrystalSpec, report: DesignReport) -> bool:
    """Gap containment of the design interval for the limit operator."""
    sp = spectrum_pi(PointInteractionModel(report.alpha_k, spec.lattice), edges=report.edges)
    lo, hi = report.interval
    return any(g_lo < lo and hi < g_hi for g_lo, g_hi in sp.gaps()[1:])

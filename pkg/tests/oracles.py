"""Independent reference computations used by the tests (not part of the package)."""
from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.special import k0


def k0_series(x: float, terms: int = 60) -> float:
    """K_0 by its ascending series (small and moderate x)."""
    g = 0.5772156649015329
    s_i0, s_k = 0.0, 0.0
    term = 1.0
    harmonic = 0.0
    for k in range(terms):
        if k > 0:
            term *= (x * x / 4) / (k * k)
            harmonic += 1.0 / k
        s_i0 += term
        s_k += term * harmonic
    return -(math.log(x / 2) + g) * s_i0 + s_k


def radial_faces(r: float, R: float, n_in: int = 200, growth: float = 1.02, h_max: float = 0.02):
    """Cell faces on [0, R]: uniform inside [0, r], then geometric up to h_max, then uniform."""
    faces = list(np.linspace(0.0, r, n_in + 1))
    h = r / n_in
    while faces[-1] < R:
        h = min(h * growth, h_max)
        faces.append(faces[-1] + h)
    faces[-1] = R
    return np.asarray(faces)


def radial_mode_solve(faces, m: int, coef, rhs):
    """Finite volumes for -(1/rho)(rho u')' + m^2/rho^2 u - coef u = rhs, u(R) = 0.

    ``coef`` and ``rhs`` are cell values; returns the cell-center solution.
    """
    c = 0.5 * (faces[:-1] + faces[1:])
    n = len(c)
    vol = 0.5 * (faces[1:] ** 2 - faces[:-1] ** 2)
    t = np.zeros(n + 1)  # face transmissibilities (face 0 is the axis: no flux)
    t[1:n] = faces[1:n] / (c[1:] - c[:-1])
    t[n] = faces[n] / (faces[n] - c[-1])
    diag = t[:-1] + t[1:] + (m * m * (faces[1:] - faces[:-1]) / c - coef * vol)
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = -t[1:n]
    ab[1] = diag
    ab[2, :-1] = -t[1:n]
    return solve_banded((1, 1), ab, rhs * vol)


def pde_perturbation(f, nu, lam, contrast, r, points, R=20.0, m_max=8, n_phi=256, refine=1):
    """(u_lam - u_0)(points) for -Lap u - lam contrast 1_{|x|<r} u - nu u = f, inclusion at 0.

    f is any object with ``values``; both solves share the grid so the free part cancels.
    """
    faces = radial_faces(r, R, n_in=200 * refine, growth=1 + 0.02 / refine, h_max=0.02 / refine)
    c = 0.5 * (faces[:-1] + faces[1:])
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    X = c[:, None] * np.cos(phi)[None, :]
    Y = c[:, None] * np.sin(phi)[None, :]
    vals = f.values(np.stack([X, Y], axis=-1))
    modes = np.fft.fft(vals, axis=1) / n_phi  # f_m(rho) for m = index (negative wrap)
    inside = (c < r).astype(float)
    pts = np.asarray(points, dtype=float)
    rho = np.hypot(pts[:, 0], pts[:, 1])
    ang = np.arctan2(pts[:, 1], pts[:, 0])
    out = np.zeros(len(pts), dtype=complex)
    for m in range(-m_max, m_max + 1):
        fm = modes[:, m % n_phi]
        u1 = radial_mode_solve(faces, abs(m), nu + lam * contrast * inside, fm)
        u0 = radial_mode_solve(faces, abs(m), nu + 0 * inside, fm)
        w = u1 - u0
        spl_re = CubicSpline(c, w.real)
        spl_im = CubicSpline(c, w.imag)
        out += (spl_re(rho) + 1j * spl_im(rho)) * np.exp(1j * m * ang)
    return out


def k0_green(rho, nu_neg):
    """G for negative real nu through scipy's K_0."""
    return k0(math.sqrt(-nu_neg) * np.asarray(rho)) / (2 * math.pi)


def g_oracle(E: float, theta, a1, a2, n_dual: int = 100) -> float:
    """g(E, theta) without the taper machinery.

    At E' = min(E, -1) = -kappa^2 the direct-lattice K_0 sum (Poisson summation) gives
        g(E', theta) = sum_{gamma != 0} cos(theta . gamma) K_0(kappa |gamma|) / 2pi - ln(kappa) / 2pi,
    and g(E) - g(E') is the absolutely convergent dual sum
        (1/|cell|) sum_k (E - E') / ((|k+theta|^2 - E)(|k+theta|^2 - E'))
    truncated at |k + theta| <= R with the continuum tail added.
    """
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    th = np.asarray(theta, dtype=float)
    cell = abs(a1[0] * a2[1] - a1[1] * a2[0])
    Er = min(float(E), -1.0)
    kappa = math.sqrt(-Er)
    cell_ = abs(a1[0] * a2[1] - a1[1] * a2[0])
    # |fractional coordinate| <= distance * |b_i| / 2pi = distance * |a_j| / |cell|
    reach = int(45.0 / kappa * max(np.linalg.norm(a1), np.linalg.norm(a2)) / cell_) + 3
    n = np.arange(-reach, reach + 1)
    I, J = np.meshgrid(n, n, indexing="ij")
    P = I[..., None] * a1 + J[..., None] * a2
    d = np.linalg.norm(P, axis=-1)
    m = (d > 0) & (kappa * d < 45.0)
    g_ref = float(np.sum(np.cos(P[m] @ th) * k0(kappa * d[m]))) / (2 * math.pi) - math.log(kappa) / (2 * math.pi)
    if Er == E:
        return g_ref
    # dual difference sum
    b1 = 2 * math.pi / cell * np.array([a2[1], -a2[0]])
    b2 = 2 * math.pi / cell * np.array([-a1[1], a1[0]])
    R = n_dual * min(np.linalg.norm(b1), np.linalg.norm(b2))
    nd = np.arange(-n_dual - 2, n_dual + 3)
    I, J = np.meshgrid(nd, nd, indexing="ij")
    K = I[..., None] * b1 + J[..., None] * b2 + th
    q = np.einsum("...i,...i->...", K, K)
    q = q[q <= R * R]
    s = float(np.sum((E - Er) / ((q - E) * (q - Er)))) / cell
    tail = (E - Er) / (4 * math.pi * R * R) + (E - Er) * (E + Er) / (8 * math.pi * R ** 4)
    return g_ref + s + tail


def pi_band_oracle(alpha: float, theta, a1, a2, branch: int = 0) -> float:
    """Root of g(E, theta) + (gamma + ln 2)/2pi - alpha on the branch below the
    first pole (branch 0) or between the first two distinct poles (branch 1)."""
    from scipy.optimize import brentq

    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    th = np.asarray(theta, dtype=float)
    cell = abs(a1[0] * a2[1] - a1[1] * a2[0])
    b1 = 2 * math.pi / cell * np.array([a2[1], -a2[0]])
    b2 = 2 * math.pi / cell * np.array([-a1[1], a1[0]])
    n = np.arange(-4, 5)
    I, J = np.meshgrid(n, n, indexing="ij")
    K = I[..., None] * b1 + J[..., None] * b2 + th
    poles = np.unique(np.round(np.einsum("...i,...i->...", K, K).ravel(), 10))
    c = (0.5772156649015329 + math.log(2.0)) / (2 * math.pi)

    def f(E):
        return g_oracle(E, th, a1, a2) + c - alpha

    if branch == 0:
        hi = poles[0] - 1e-9 * max(1.0, poles[0])
        lo = min(-1.0, poles[0] - 1.0)
        while f(lo) > 0:
            lo *= 2.0
    else:
        lo = poles[0] + 1e-9 * max(1.0, poles[1])
        hi = poles[1] - 1e-9 * max(1.0, poles[1])
    return brentq(f, lo, hi, xtol=1e-13, rtol=1e-14, maxiter=500)

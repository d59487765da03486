"""Regularised lattice Green's function g(E, theta) and the point-interaction Q matrix.

The dual-lattice sum is evaluated with a Gaussian taper exp(-(|k|^2 - E)/eta) on
each term.  The part of the sum removed by the taper is, up to a remainder of
order exp(-eta a_min^2 / 4) (a_min the shortest lattice vector), equal to the
integral of the same taper against a continuous density, which has the closed
form  pi (gamma - ln eta - Ein(-E/eta))  with Ein the entire exponential integral.
The log-divergent ln R counterterm is absorbed in that closed form, so the
estimate converges exponentially in eta = R^2 instead of like 1/R.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import exp1, expi

from .errors import NearPole, NoConvergence
from .geometry import Lattice
from .specfun import EULER_GAMMA, as_spectral, green_regularized, log_term

POLE_GUARD = 1e-10
_EXP_CUT = 41.0  # terms with exp(-(|k|^2-E)/eta) below e^-41 are dropped


def ein(x: float) -> float:
    """Entire exponential integral Ein(x) = int_0^x (1 - e^-t)/t dt."""
    x = float(x)
    if abs(x) < 1.0:
        return _ein_series(x)
    if x > 0:
        return EULER_GAMMA + math.log(x) + float(exp1(x))
    return EULER_GAMMA + math.log(-x) - float(expi(-x))


def _ein_series(x: float) -> float:
    total = 0.0
    term = 1.0
    for n in range(1, 40):
        term *= x / n  # x^n / n!
        total += (-1) ** (n + 1) * term / n
        if abs(term) < 1e-18:
            break
    return total


def _ein_prime_scaled(E: float, eta: float) -> float:
    """d/dE of -Ein(-E/eta), i.e. (exp(E/eta) - 1)/E, stable near E = 0."""
    if E == 0.0:
        return 1.0 / eta
    return math.expm1(E / eta) / E


def _expm1_ratio(u: np.ndarray) -> np.ndarray:
    """(exp(-u) - 1)/u with the removable singularity at 0 filled in."""
    out = np.full(u.shape, -1.0)
    nz = u != 0
    out[nz] = np.expm1(-u[nz]) / u[nz]
    return out


def _h2(u: np.ndarray) -> np.ndarray:
    """(exp(-u)(1 + u) - 1)/u^2, by series for small |u|."""
    out = np.empty(u.shape)
    small = np.abs(u) < 0.05
    us = u[small]
    out[small] = -0.5 + us / 3 - us ** 2 / 8 + us ** 3 / 30 - us ** 4 / 144
    ub = u[~small]
    out[~small] = (np.expm1(-ub) + ub * np.exp(-ub)) / ub ** 2
    return out


@dataclass(frozen=True)
class GFunEvaluator:
    """Evaluation settings for g(E, theta) on a fixed lattice.

    ``max_radius`` caps sqrt(eta), the taper radius in dual-length units.
    """

    lattice: Lattice
    tolerance: float = 1e-11
    max_radius: float = field(default=None)

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_radius is None:
            object.__setattr__(self, "max_radius", 2000.0 / self.lattice.min_vector_length())

    @property
    def _eta_start(self) -> float:
        return 64.0 / self.lattice.min_vector_length() ** 2

    def _shell_terms(self, E: float, theta, eta: float):
        """Squared lengths |k + theta|^2 carrying non-negligible taper weight."""
        lat = self.lattice
        kmax2 = max(E, 0.0) + _EXP_CUT * eta
        kmax = math.sqrt(kmax2)
        # number of rows needed along each dual direction
        B = lat.dual_basis
        # |s_i| <= kmax * |a_i| / (2 pi)
        n1 = int(kmax * np.linalg.norm(lat.a1) / (2 * np.pi)) + 2
        n2 = int(kmax * np.linalg.norm(lat.a2) / (2 * np.pi)) + 2
        th = np.asarray(theta, dtype=float)
        i = np.arange(-n1, n1 + 1, dtype=float)
        j = np.arange(-n2, n2 + 1, dtype=float)
        I, J = np.meshgrid(i, j, indexing="ij")
        kx = I * B[0, 0] + J * B[1, 0] + th[0]
        ky = I * B[0, 1] + J * B[1, 1] + th[1]
        k2 = (kx * kx + ky * ky).ravel()
        return k2[k2 <= kmax2]

    def _check_pole(self, d: np.ndarray):
        if d.size and np.min(np.abs(d)) <= POLE_GUARD:
            raise NearPole("E lies within 1e-10 of a pole |k + theta|^2")

    def _estimate(self, E: float, theta, eta: float, derivative: bool):
        """Return (smooth part, singular part); only the smooth part depends on eta.

        Terms with |d| < 1 (d = |k+theta|^2 - E) have their bare 1/d (or 1/d^2)
        split off so that nearby poles do not swamp the convergence test.
        """
        d = self._shell_terms(E, theta, eta) - E
        self._check_pole(d)
        bz = self.lattice.bz_area
        near = np.abs(d) < 1.0
        dn, df = d[near], d[~near]
        u = dn / eta
        if derivative:
            sing = float(np.sum(bz / dn ** 2))
            s = float(np.sum(bz * np.exp(-df / eta) * (1.0 / df ** 2 + 1.0 / (eta * df))))
            s += float(np.sum(bz * _h2(u))) / eta ** 2
            tail = math.pi * _ein_prime_scaled(E, eta)
        else:
            sing = float(np.sum(bz / dn))
            s = float(np.sum(bz * np.exp(-df / eta) / df))
            s += float(np.sum(bz * _expm1_ratio(u))) / eta
            tail = math.pi * (EULER_GAMMA - math.log(eta) - ein(-E / eta))
        c = 4 * math.pi ** 2
        return (s + tail) / c, sing / c

    def _converge(self, E: float, theta, derivative: bool) -> float:
        E = float(E)
        eta = max(self._eta_start, -E / 20.0 if E < 0 else E)
        prev, sing = self._estimate(E, theta, eta, derivative)
        while True:
            eta *= 4.0  # radius doubling
            if math.sqrt(eta) > self.max_radius:
                raise NoConvergence("taper radius cap reached", estimate=prev + sing)
            cur, sing = self._estimate(E, theta, eta, derivative)
            if abs(cur - prev) < 0.5 * self.tolerance:
                return cur + sing
            prev = cur

    def g(self, E: float, theta) -> float:
        return self._converge(E, theta, False)

    def dg_dE(self, E: float, theta) -> float:
        return self._converge(E, theta, True)


def g_lattice(E: float, theta, ev: GFunEvaluator) -> float:
    """Regularised lattice sum g(E, theta) (see module docstring)."""
    return ev.g(E, theta)


def dg_dE(E: float, theta, ev: GFunEvaluator) -> float:
    """Derivative of g in E: (1/4 pi^2) sum |BZ| / (|k+theta|^2 - E)^2 > 0."""
    return ev.dg_dE(E, theta)


def poles(lattice: Lattice, theta, emax: float) -> np.ndarray:
    """Sorted distinct values |k + theta|^2 <= emax over the dual lattice."""
    ev = GFunEvaluator(lattice)
    eta = max(emax, 1.0) / _EXP_CUT
    k2 = ev._shell_terms(0.0, theta, eta)
    k2 = np.sort(k2[k2 <= emax])
    if k2.size == 0:
        return k2
    keep = np.concatenate([[True], np.diff(k2) > 1e-12 * max(1.0, emax)])
    return k2[keep]


def first_pole(lattice: Lattice, theta) -> float:
    return float(poles(lattice, theta, 4 * float(np.dot(lattice.b1, lattice.b1) + np.dot(lattice.b2, lattice.b2)))[0])


# Q matrix --------------------------------------------------------------------

@dataclass(frozen=True)
class QMatrix:
    alpha: float
    lattice: Lattice
    nu: complex
    truncation_index: int
    indices: np.ndarray
    entries: np.ndarray


def q_diagonal(alpha: float, nu) -> complex:
    """alpha - (gamma - ln(sqrt(nu)/2i)) / (2 pi)."""
    return complex(alpha - (EULER_GAMMA - log_term(as_spectral(nu).nu)) / (2 * math.pi))


def q_matrix_points(alphas, centers, nu) -> np.ndarray:
    """Q matrix of a finite set of centers with per-center couplings."""
    p = as_spectral(nu)
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    alphas = np.broadcast_to(np.asarray(alphas, dtype=float), (len(centers),))
    diff = centers[:, None, :] - centers[None, :, :]
    Q = -np.asarray(green_regularized(diff, p, warn=False), dtype=complex)
    Q[np.diag_indices(len(centers))] = [q_diagonal(a, p.nu) for a in alphas]
    return Q


def q_matrix(alpha: float, lattice: Lattice, nu, M: int) -> QMatrix:
    """Q_{alpha, Lambda}(nu) on lattice points p1 a1 + p2 a2 with |p_i| <= M."""
    p = as_spectral(nu)
    if p.nu.imag == 0.0:
        raise ValueError("q_matrix needs Im nu != 0")
    if M < 0:
        raise ValueError("M must be >= 0")
    n = np.arange(-M, M + 1)
    i, j = np.meshgrid(n, n, indexing="ij")
    idx = np.column_stack([i.ravel(), j.ravel()])
    pts = idx @ lattice.basis
    return QMatrix(float(alpha), lattice, p.nu, int(M), idx, q_matrix_points(alpha, pts, p))


def truncation_index(lattice: Lattice, nu, tol: float) -> int:
    """Smallest M whose dropped kernel tail sum_{|y| > M a_min} e^{-Im sqrt(nu) |y|} is below tol."""
    p = as_spectral(nu)
    decay = p.sqrt_nu.imag
    amin = lattice.min_vector_length()
    for M in range(0, 10000):
        # ring at distance ~ (M+1) a_min holds about 8 (M+1) points
        tail = sum(8 * (L + 1) * math.exp(-decay * (L + 1) * amin) for L in range(M, M + 200))
        if tail < tol:
            return M
    raise NoConvergence("no truncation index found", estimate=10000)

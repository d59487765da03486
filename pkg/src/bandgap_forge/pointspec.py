"""Spectra of periodic point-interaction Hamiltonians: band edges, gaps, scaling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import BracketFailure, Infeasible, InvalidScale, NoGapToScale
from .geometry import Lattice
from .latticesum import GFunEvaluator, poles
from .specfun import EULER_GAMMA

EDGE_CONSTANT = (EULER_GAMMA + math.log(2.0)) / (2 * math.pi)


@dataclass(frozen=True)
class PointInteractionModel:
    """Coupling alpha on the shifted lattice y + Lambda."""

    alpha: float
    lattice: Lattice
    shift: tuple = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "shift", tuple(float(v) for v in self.shift))


@dataclass(frozen=True)
class EdgeSet:
    E0: float
    E1: float
    E2: float
    E_tilde: float

    def as_dict(self) -> dict:
        return {"E0": self.E0, "E1": self.E1, "E2": self.E2, "E_tilde": self.E_tilde}

    def scaled(self, factor: float) -> "EdgeSet":
        return EdgeSet(self.E0 * factor, self.E1 * factor, self.E2 * factor, self.E_tilde * factor)


@dataclass(frozen=True)
class PointSpectrum:
    """Spectrum as a union of closed intervals (the last one unbounded)."""

    intervals: tuple
    edges: EdgeSet = field(compare=False)

    def contains(self, E: float) -> bool:
        return any(lo <= E <= hi for lo, hi in self.intervals)

    def gaps(self) -> list:
        """Open gaps between consecutive components, plus (-inf, E0)."""
        out = [(-math.inf, self.intervals[0][0])]
        for (_, hi), (lo, _) in zip(self.intervals[:-1], self.intervals[1:]):
            out.append((hi, lo))
        return out


def edge_function(E: float, theta, alpha: float, ev: GFunEvaluator) -> float:
    """g(E, theta) + (gamma + ln 2)/2pi - alpha; increasing between poles."""
    return ev.g(E, theta) + EDGE_CONSTANT - alpha


def threshold(lattice: Lattice, ev: GFunEvaluator | None = None) -> float:
    """Coupling below which E1 < 0: g(0, theta0) + (gamma + ln 2)/2pi."""
    ev = ev or GFunEvaluator(lattice)
    return ev.g(0.0, lattice.theta0) + EDGE_CONSTANT


def _root(f, lo, hi, tol):
    root = brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=400)
    if not abs(f(root)) < tol:
        # f may be too steep for |f| < tol at double precision; accept a bracketing ulp pair
        below, above = np.nextafter(root, -np.inf), np.nextafter(root, np.inf)
        if f(below) * f(above) > 0:
            raise BracketFailure(f"root refinement stalled at {root!r}, |f| = {abs(f(root)):.3g}")
    return float(root)


def _smallest_zero_below(f, pole: float, tol: float) -> float:
    """Zero of an increasing f on (-inf, pole) with f -> -inf at -inf, +inf at pole-."""
    # right end: approach the pole until f > 0
    step = max(1.0, abs(pole)) * 1e-1
    hi = pole - step
    while f(hi) <= 0:
        step *= 0.1
        if step < 1e-9 * max(1.0, abs(pole)):
            raise BracketFailure("no sign change found below the pole")
        hi = pole - step
    # left end: start at -1 (or just below hi) and double the distance
    lo = min(-1.0, hi - 1.0)
    dist = hi - lo
    while f(lo) >= 0:
        dist *= 2.0
        lo = hi - dist
        if dist > 1e30:
            raise BracketFailure("left bracket expansion failed")
    return _root(f, lo, hi, tol)


def _zero_between(f, lo_pole: float, hi_pole: float, tol: float) -> float:
    """Zero of an increasing f on (lo_pole, hi_pole), scanning a geometric grid."""
    width = hi_pole - lo_pole
    offsets = width * np.geomspace(1e-8, 0.5, 60)
    left = lo_pole + offsets
    right = hi_pole - offsets[::-1]
    grid = np.concatenate([left, right[1:]])
    vals = [f(x) for x in grid]
    for i in range(len(grid) - 1):
        if vals[i] < 0 <= vals[i + 1]:
            if vals[i + 1] == 0:
                return float(grid[i + 1])
            return _root(f, grid[i], grid[i + 1], tol)
    raise BracketFailure("no sign change found between the poles")


def band_edges(model: PointInteractionModel, tol: float = 1e-10, ev: GFunEvaluator | None = None) -> EdgeSet:
    """Band edges E0, E1, E2 (and E_tilde) of the point-interaction operator.

    The shift of the model is irrelevant for the spectrum and is ignored.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    lat = model.lattice
    ev = ev or GFunEvaluator(lat, tolerance=min(1e-11, tol / 10))
    a = model.alpha
    zero = np.zeros(2)
    th0 = lat.theta0

    def f0(E):
        return edge_function(E, zero, a, ev)

    def f1(E):
        return edge_function(E, th0, a, ev)

    E0 = _smallest_zero_below(f0, 0.0, tol)
    p1 = float(poles(lat, th0, 4 * float(np.dot(th0, th0)) + 1.0)[0])
    E1 = max(_smallest_zero_below(f1, p1, tol), E0)
    # second pole at theta = 0 is the shortest nonzero dual vector
    pz = poles(lat, zero, 4 * float(np.dot(lat.b_minus, lat.b_minus)) + 1.0)
    E_tilde = _zero_between(f0, 0.0, float(pz[1]), tol)
    E2 = min(E_tilde, float(np.dot(lat.b_minus, lat.b_minus)) / 4.0)
    return EdgeSet(float(E0), float(E1), float(E2), float(E_tilde))


def spectrum_pi(model: PointInteractionModel, tol: float = 1e-10, edges: EdgeSet | None = None) -> PointSpectrum:
    e = edges or band_edges(model, tol)
    if e.E2 <= e.E1:
        return PointSpectrum(((e.E0, math.inf),), e)
    return PointSpectrum(((e.E0, e.E1), (e.E2, math.inf)), e)


def scale_model(model: PointInteractionModel, k: float) -> PointInteractionModel:
    """(alpha - ln k / 2pi, Lambda / k, y / k); its spectrum is k^2 times the original."""
    if not k > 0:
        raise InvalidScale("scale factor must be positive")
    return PointInteractionModel(
        model.alpha - math.log(k) / (2 * math.pi),
        model.lattice.scaled(1.0 / k),
        tuple(np.asarray(model.shift) / k),
    )


def translate_model(model: PointInteractionModel, t) -> PointInteractionModel:
    return PointInteractionModel(model.alpha, model.lattice, tuple(np.asarray(model.shift) + np.asarray(t, dtype=float)))


def place_gap(a: float, b: float, base_model: PointInteractionModel, edges: EdgeSet | None = None,
              granularity: float = 0.01, tol: float = 1e-10):
    """Smallest k on the geometric ladder k_lo (1 + granularity)^j, j >= 1, that puts [a, b]
    strictly inside the scaled gap (k^2 E1, k^2 E2).  Returns (k, scaled model)."""
    if not a < b:
        raise ValueError("place_gap needs a < b")
    e = edges or band_edges(base_model, tol)
    if e.E2 <= e.E1:
        raise NoGapToScale("base model has no gap (E2 <= E1)")
    if a <= 0 and e.E1 >= 0:
        raise Infeasible("a <= 0 cannot lie above k^2 E1 >= 0")
    k2_lo = 0.0
    if b > 0:
        k2_lo = b / e.E2
    if e.E1 < 0 and a < 0:
        k2_lo = max(k2_lo, a / e.E1)
    k2_hi = math.inf
    if e.E1 > 0:
        k2_hi = a / e.E1
    k_lo = math.sqrt(k2_lo) if k2_lo > 0 else 1.0
    k = k_lo * (1 + granularity)
    for _ in range(10000):
        if k * k >= k2_hi:
            break
        if k * k * e.E1 < a and k * k * e.E2 > b:
            return k, scale_model(base_model, k)
        k *= 1 + granularity
    raise Infeasible(f"no scale factor places [{a}, {b}] inside the gap")

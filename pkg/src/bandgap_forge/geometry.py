"""Lattices, Brillouin-zone sampling, inclusion shapes and crystal specifications."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import DegenerateLattice

TWO_PI = 2.0 * np.pi


def dual_lattice(a1, a2):
    """Return the dual basis (b1, b2) with a_m . b_l = 2 pi delta_ml.

    Raises DegenerateLattice when the basis is (numerically) linearly dependent.
    """
    a1 = np.asarray(a1, dtype=float)
    a2 = np.asarray(a2, dtype=float)
    det = a1[0] * a2[1] - a1[1] * a2[0]
    if abs(det) <= 1e-14 * np.linalg.norm(a1) * np.linalg.norm(a2) or det == 0.0:
        raise DegenerateLattice(f"basis vectors {a1} and {a2} are linearly dependent")
    # rows of B solve A B^T = 2 pi I, written out for the 2x2 case
    b1 = TWO_PI / det * np.array([a2[1], -a2[0]])
    b2 = TWO_PI / det * np.array([-a1[1], a1[0]])
    return b1, b2


@dataclass(frozen=True)
class Lattice:
    """Bravais lattice spanned by a1, a2 with its dual data."""

    a1: tuple
    a2: tuple

    def __post_init__(self):
        object.__setattr__(self, "a1", tuple(float(v) for v in self.a1))
        object.__setattr__(self, "a2", tuple(float(v) for v in self.a2))
        dual_lattice(self.a1, self.a2)  # validates

    @classmethod
    def square(cls, side: float = 1.0) -> "Lattice":
        return cls((side, 0.0), (0.0, side))

    @cached_property
    def basis(self) -> np.ndarray:
        """2x2 array whose rows are a1, a2."""
        return np.array([self.a1, self.a2])

    @cached_property
    def dual_basis(self) -> np.ndarray:
        """2x2 array whose rows are b1, b2."""
        return np.array(dual_lattice(self.a1, self.a2))

    @property
    def b1(self) -> np.ndarray:
        return self.dual_basis[0]

    @property
    def b2(self) -> np.ndarray:
        return self.dual_basis[1]

    @property
    def cell_area(self) -> float:
        return float(abs(np.linalg.det(self.basis)))

    @property
    def bz_area(self) -> float:
        return float(abs(np.linalg.det(self.dual_basis)))

    @property
    def b_minus(self) -> np.ndarray:
        b1, b2 = self.dual_basis
        return b1 if np.dot(b1, b1) <= np.dot(b2, b2) else b2

    @property
    def theta0(self) -> np.ndarray:
        return -0.5 * (self.b1 + self.b2)

    def scaled(self, factor: float) -> "Lattice":
        """Lattice with every basis vector multiplied by ``factor``."""
        return Lattice(tuple(factor * np.asarray(self.a1)), tuple(factor * np.asarray(self.a2)))

    def to_fractional(self, x) -> np.ndarray:
        """Coordinates s with x = s1 a1 + s2 a2 (works on arrays of shape (..., 2))."""
        return np.asarray(x, dtype=float) @ self.dual_basis.T / TWO_PI

    def to_cartesian(self, s) -> np.ndarray:
        return np.asarray(s, dtype=float) @ self.basis

    def reduce(self, x) -> np.ndarray:
        """Reduce points into the fundamental cell {s1 a1 + s2 a2 : 0 <= s_i < 1}."""
        s = self.to_fractional(x)
        s = s - np.floor(s)
        s[s >= 1.0] = 0.0
        return self.to_cartesian(s)

    def min_vector_length(self) -> float:
        """Length of a shortest nonzero lattice vector (searched over a small block)."""
        n = np.arange(-3, 4)
        i, j = np.meshgrid(n, n, indexing="ij")
        v = i[..., None] * np.asarray(self.a1) + j[..., None] * np.asarray(self.a2)
        d = np.linalg.norm(v, axis=-1)
        return float(d[d > 0].min())


def brillouin_fractional(m: int) -> np.ndarray:
    """Cell-centred sample coordinates (s1, s2), row-major in (k1, k2)."""
    if m < 1:
        raise ValueError("grid size m must be >= 1")
    s = -0.5 + (np.arange(m) + 0.5) / m
    s1, s2 = np.meshgrid(s, s, indexing="ij")
    return np.column_stack([s1.ravel(), s2.ravel()])


def brillouin_grid(lattice: Lattice, m: int) -> np.ndarray:
    """m*m cell-centred quasi-momenta s1 b1 + s2 b2, shape (m*m, 2)."""
    return brillouin_fractional(m) @ lattice.dual_basis


@dataclass(frozen=True)
class InclusionShape:
    """Reference inclusion Omega containing the origin: a disk or a simple polygon."""

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind == "disk":
            radius = float(np.ravel(self.params)[0])
            if not radius > 0:
                raise ValueError("disk radius must be positive")
            object.__setattr__(self, "params", (radius,))
        elif self.kind == "polygon":
            verts = np.asarray(self.params, dtype=float)
            if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
                raise ValueError("polygon needs at least three (x, y) vertices")
            if _signed_area(verts) < 0:
                verts = verts[::-1]
            object.__setattr__(self, "params", tuple(map(tuple, verts)))
            if not self.area > 0:
                raise ValueError("polygon has zero area")
            if not bool(self.contains(np.zeros(2))):
                raise ValueError("inclusion shape must contain the origin")
        else:
            raise ValueError(f"unknown shape kind {self.kind!r}")

    @classmethod
    def disk(cls, radius: float = 1.0) -> "InclusionShape":
        return cls("disk", (radius,))

    @classmethod
    def polygon(cls, vertices) -> "InclusionShape":
        return cls("polygon", tuple(map(tuple, np.asarray(vertices, dtype=float))))

    @classmethod
    def square(cls, side: float = 1.0) -> "InclusionShape":
        h = side / 2
        return cls.polygon([(-h, -h), (h, -h), (h, h), (-h, h)])

    @property
    def radius(self) -> float:
        return self.params[0]

    @property
    def vertices(self) -> np.ndarray:
        return np.asarray(self.params, dtype=float)

    @property
    def area(self) -> float:
        if self.kind == "disk":
            return float(np.pi * self.radius ** 2)
        return float(_signed_area(self.vertices))

    @property
    def bounding_radius(self) -> float:
        if self.kind == "disk":
            return self.radius
        return float(np.linalg.norm(self.vertices, axis=1).max())

    def contains(self, x) -> np.ndarray:
        """Vectorised containment test for points of shape (..., 2)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "disk":
            return np.einsum("...i,...i->...", x, x) <= self.radius ** 2
        return _in_polygon(x, self.vertices)

    def scaled(self, factor: float) -> "InclusionShape":
        if self.kind == "disk":
            return InclusionShape.disk(self.radius * factor)
        return InclusionShape.polygon(self.vertices * factor)


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _in_polygon(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    # even-odd crossing rule, boundary points may fall either way
    px, py = x[..., 0], x[..., 1]
    inside = np.zeros(px.shape, dtype=bool)
    n = len(v)
    for i in range(n):
        x0, y0 = v[i]
        x1, y1 = v[(i + 1) % n]
        crosses = (y0 > py) != (y1 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (px < xc)
    return inside


@dataclass(frozen=True)
class CrystalSpec:
    """Everything needed to evaluate the permittivity profile w_r.

    Centers are reduced into the fundamental cell on construction. No other
    validation happens here; use :func:`validate_crystal_spec` for a report.
    """

    lattice: Lattice
    centers: tuple
    lambdas: tuple
    coefficients: tuple
    shape: InclusionShape
    r: float
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float)).reshape(-1, 2)
        c = self.lattice.reduce(c) if len(c) else c
        object.__setattr__(self, "centers", tuple(map(tuple, c)))
        object.__setattr__(self, "lambdas", tuple(float(v) for v in np.ravel(self.lambdas)))
        object.__setattr__(self, "coefficients", tuple(float(v) for v in np.ravel(self.coefficients)))
        object.__setattr__(self, "r", float(self.r))

    @property
    def n_inclusions(self) -> int:
        return len(self.centers)

    @property
    def centers_array(self) -> np.ndarray:
        return np.asarray(self.centers, dtype=float).reshape(-1, 2)

    def with_r(self, r: float) -> "CrystalSpec":
        return replace(self, r=float(r))

    @classmethod
    def vacuum(cls, lattice: Lattice | None = None) -> "CrystalSpec":
        """Spec without inclusions, w = 1 everywhere."""
        return cls(lattice or Lattice.square(), (), (), (), InclusionShape.disk(1.0), 0.0)


def _lattice_offsets(lattice: Lattice, reach: int = 1) -> np.ndarray:
    n = np.arange(-reach, reach + 1)
    i, j = np.meshgrid(n, n, indexing="ij")
    return np.column_stack([i.ravel(), j.ravel()]) @ lattice.basis


def min_center_separation(lattice: Lattice, centers: np.ndarray) -> float:
    """Smallest distance between distinct inclusion copies over the 3x3 neighbour block."""
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    if len(centers) == 0:
        return np.inf
    offs = _lattice_offsets(lattice)
    best = np.inf
    for i, yi in enumerate(centers):
        for j, yj in enumerate(centers):
            d = np.linalg.norm(yi - yj + offs, axis=1)
            if i == j:
                d = d[d > 0]
            best = min(best, float(d.min()))
    return best


def validate_crystal_spec(spec: CrystalSpec) -> list[str]:
    """Return the list of violated invariants; an empty list means the crystal is valid."""
    problems = []
    lam = np.asarray(spec.lambdas)
    n = spec.n_inclusions
    if len(lam) != n:
        problems.append(f"{len(lam)} targets given for {n} centers")
    if len(spec.coefficients) != len(lam):
        problems.append(f"{len(spec.coefficients)} coefficients given for {len(lam)} targets")
    if np.any(lam <= 0):
        problems.append("targets must be positive")
    if len(lam) > 1 and np.any(np.diff(lam) <= 0):
        problems.append("targets must be strictly increasing")
    if not spec.r > 0 and n > 0:
        problems.append("scale r must be positive")
    if n:
        s = spec.lattice.to_fractional(spec.centers_array)
        if np.any(s < -1e-12) or np.any(s >= 1 + 1e-12):
            problems.append("centers must lie in the fundamental cell")
        sep = min_center_separation(spec.lattice, spec.centers_array)
        need = 2.0 * spec.r * spec.shape.bounding_radius
        if not sep > need:
            problems.append(f"inclusions overlap: center distance {sep:.6g} <= 2 r R = {need:.6g}")
    return problems


# JSON helpers ---------------------------------------------------------------

def spec_to_dict(spec: CrystalSpec) -> dict:
    return {
        "lattice": {"a1": list(spec.lattice.a1), "a2": list(spec.lattice.a2)},
        "centers": [list(c) for c in spec.centers],
        "lambdas": list(spec.lambdas),
        "coefficients": list(spec.coefficients),
        "shape": {"kind": spec.shape.kind, "params": _shape_params(spec.shape)},
        "r": spec.r,
    }


def _shape_params(shape: InclusionShape):
    if shape.kind == "disk":
        return [shape.radius]
    return [list(v) for v in shape.params]


def shape_from_dict(d: dict) -> InclusionShape:
    kind = d["kind"]
    params = d["params"]
    if kind == "disk":
        return InclusionShape.disk(float(np.ravel(params)[0]))
    return InclusionShape.polygon(params)


_SPEC_KEYS = {"lattice", "centers", "lambdas", "coefficients", "shape", "r", "metadata"}


def spec_from_dict(d: dict) -> CrystalSpec:
    unknown = set(d) - _SPEC_KEYS
    if unknown:
        raise ValueError(f"unknown crystal spec keys: {sorted(unknown)}")
    lat = Lattice(d["lattice"]["a1"], d["lattice"]["a2"])
    return CrystalSpec(
        lattice=lat,
        centers=d["centers"],
        lambdas=d["lambdas"],
        coefficients=d["coefficients"],
        shape=shape_from_dict(d["shape"]),
        r=d["r"],
    )


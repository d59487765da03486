"""Structured period-cell meshes graded towards inclusion boundaries."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MeshTooCoarse
from ..geometry import CrystalSpec, Lattice


@dataclass(frozen=True)
class MeshSpec:
    """Mesh descriptor: base cells per lattice direction and grading levels."""

    n_base: int = 64
    levels: int = 3
    min_cells_across: int = 8

    def coarsened(self) -> "MeshSpec":
        return MeshSpec(max(self.n_base // 2, 2), self.levels, self.min_cells_across)


def _periodic_dist(s, c):
    d = np.abs(s - c) % 1.0
    return np.minimum(d, 1.0 - d)


def graded_edges(n_base: int, features, levels: int) -> np.ndarray:
    """Element boundaries in [0, 1] for one lattice direction.

    ``features`` is a list of (center, half_extent) pairs in fractional units.
    At level l, every interval lying within 2 h_{l-1} of a feature boundary
    (center +- half_extent) is bisected, h_l being the level-l spacing.
    """
    edges = np.linspace(0.0, 1.0, n_base + 1)
    h = 1.0 / n_base
    for _ in range(levels):
        mids = 0.5 * (edges[:-1] + edges[1:])
        split = np.zeros(len(mids), dtype=bool)
        for c, ext in features:
            dist = np.abs(_periodic_dist(mids, c) - ext)
            split |= dist <= 2.0 * h
        new = mids[split]
        edges = np.sort(np.concatenate([edges, new]))
        h *= 0.5
    return edges


@dataclass
class CellMesh:
    lattice: Lattice
    edges1: np.ndarray
    edges2: np.ndarray

    @property
    def n1(self) -> int:
        return len(self.edges1) - 1

    @property
    def n2(self) -> int:
        return len(self.edges2) - 1

    @property
    def n_dofs(self) -> int:
        return 4 * self.n1 * self.n2

    def min_spacing(self) -> float:
        return float(min(np.diff(self.edges1).min(), np.diff(self.edges2).min()))


def inclusion_features(spec: CrystalSpec, r: float):
    """Fractional (center, half extent) per direction for each inclusion."""
    lat = spec.lattice
    R = r * spec.shape.bounding_radius
    # extent of a disk of radius R in s_i is R |b_i| / 2pi
    e1 = R * np.linalg.norm(lat.b1) / (2 * np.pi)
    e2 = R * np.linalg.norm(lat.b2) / (2 * np.pi)
    s = lat.to_fractional(spec.centers_array) if spec.n_inclusions else np.zeros((0, 2))
    return [(float(c[0]), e1) for c in s], [(float(c[1]), e2) for c in s]


def build_mesh(spec: CrystalSpec, r: float, mesh: MeshSpec) -> CellMesh:
    """Graded tensor mesh of the period cell; raises MeshTooCoarse if inclusions are under-resolved."""
    lat = spec.lattice
    if spec.n_inclusions == 0 or r <= 0:
        e = np.linspace(0, 1, mesh.n_base + 1)
        return CellMesh(lat, e, e.copy())
    f1, f2 = inclusion_features(spec, r)
    e1 = graded_edges(mesh.n_base, f1, mesh.levels)
    e2 = graded_edges(mesh.n_base, f2, mesh.levels)
    for feats, edges in ((f1, e1), (f2, e2)):
        for c, ext in feats:
            inside = _periodic_dist(0.5 * (edges[:-1] + edges[1:]), c) <= ext
            if int(inside.sum()) < mesh.min_cells_across:
                raise MeshTooCoarse(
                    f"only {int(inside.sum())} cells across an inclusion, need {mesh.min_cells_across}")
    return CellMesh(lat, e1, e2)

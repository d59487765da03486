"""Biquadratic finite elements on the period cell with Bloch-twisted identification.

Element matrices do not depend on the quasi-momentum.  Each local coupling
between two nodes is tagged by the difference of the lattice translates the
two nodes had to be wrapped by; there are nine such classes, and the fiber
matrix at theta is the sum of the nine class matrices times e^{i theta . t}.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..design import contrast, inclusion_index
from ..geometry import CrystalSpec
from .mesh import CellMesh

_G1, _W1 = np.polynomial.legendre.leggauss(3)
_G1 = 0.5 * (_G1 + 1)
_W1 = 0.5 * _W1


def _q2_1d(t):
    t = np.asarray(t, dtype=float)
    N = np.stack([2 * (t - 0.5) * (t - 1), -4 * t * (t - 1), 2 * t * (t - 0.5)], axis=-1)
    D = np.stack([4 * t - 3, -8 * t + 4, 4 * t - 1], axis=-1)
    return N, D


def _tensor_rule(subcells: int):
    """Points and weights on [0,1]^2: 3x3 Gauss on each of subcells^2 sub-squares."""
    k = np.arange(subcells)
    t = ((k[:, None] + _G1[None, :]) / subcells).ravel()
    w = np.tile(_W1, subcells) / subcells
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    W = np.outer(w, w)
    return T1.ravel(), T2.ravel(), W.ravel()


def _reference(subcells: int):
    """Shape values and gradients of the 9 local functions at the rule points."""
    t1, t2, w = _tensor_rule(subcells)
    N1, D1 = _q2_1d(t1)
    N2, D2 = _q2_1d(t2)
    # local index i = 3 * alpha + beta, alpha along s1
    N = (N1[:, :, None] * N2[:, None, :]).reshape(len(w), 9)
    Dx = (D1[:, :, None] * N2[:, None, :]).reshape(len(w), 9)
    Dy = (N1[:, :, None] * D2[:, None, :]).reshape(len(w), 9)
    return t1, t2, w, N, Dx, Dy


@dataclass
class FiberOperators:
    """Theta-independent pieces of the fiber forms on one mesh.

    ``parts`` maps a name to (positions, classes, values) on a common pattern:
      K1   stiffness with coefficient 1
      Kd   stiffness with coefficient 1/w - 1
      M1   mass with weight 1
      Mw   mass with weight w - 1
    """

    mesh: CellMesh
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    shifts: np.ndarray  # (9, 2) cartesian translates per class
    parts: dict = field(default_factory=dict)
    max_contrast: float = 0.0

    def matrix(self, theta, terms) -> sp.csr_matrix:
        """sum_c e^{i theta . t_c} sum_(coef, name) coef * parts[name][c]."""
        th = np.asarray(theta, dtype=float)
        phase = np.exp(1j * (self.shifts @ th))
        nnz = len(self.indices)
        re = np.zeros(nnz)
        im = np.zeros(nnz)
        for coef, name in terms:
            if coef == 0 or name not in self.parts:
                continue
            pos, cls, vals = self.parts[name]
            w = coef * vals * phase[cls]
            re += np.bincount(pos, weights=w.real, minlength=nnz)
            im += np.bincount(pos, weights=w.imag, minlength=nnz)
        data = re + 1j * im
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


def _dof_tables(mesh: CellMesh):
    n1, n2 = mesh.n1, mesh.n2
    N1, N2 = 2 * n1, 2 * n2
    e1, e2 = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    e1, e2 = e1.ravel(), e2.ravel()
    a = np.repeat(np.arange(3), 3)
    b = np.tile(np.arange(3), 3)
    j1 = 2 * e1[:, None] + a[None, :]
    j2 = 2 * e2[:, None] + b[None, :]
    w1, w2 = j1 // N1, j2 // N2
    dof = (j1 % N1) * N2 + (j2 % N2)
    return e1, e2, dof, w1, w2


def _inclusion_elements(mesh: CellMesh, spec: CrystalSpec, r: float, e1, e2):
    """Elements whose circumcircle reaches some inclusion copy."""
    lat = mesh.lattice
    s0 = np.column_stack([mesh.edges1[e1], mesh.edges2[e2]])
    s1 = np.column_stack([mesh.edges1[e1 + 1], mesh.edges2[e2 + 1]])
    mid = lat.to_cartesian(0.5 * (s0 + s1))
    rad = np.max([np.linalg.norm(lat.to_cartesian(np.column_stack([a, b])) - mid, axis=1)
                  for a, b in ((s0[:, 0], s0[:, 1]), (s1[:, 0], s0[:, 1]),
                               (s0[:, 0], s1[:, 1]), (s1[:, 0], s1[:, 1]))], axis=0)
    R = r * spec.shape.bounding_radius
    hit = np.zeros(len(e1), dtype=bool)
    offs = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float) @ lat.basis
    for y in spec.centers_array:
        for o in offs:
            hit |= np.linalg.norm(mid - (y + o), axis=1) <= R + rad
    return np.nonzero(hit)[0]


def assemble_operators(mesh: CellMesh, spec: CrystalSpec, r: float, subcells: int = 8) -> FiberOperators:
    """All theta-independent class matrices for the TM, TE and auxiliary forms."""
    lat = mesh.lattice
    e1, e2, dof, w1, w2 = _dof_tables(mesh)
    n_el = len(e1)
    n = mesh.n_dofs
    d1 = np.diff(mesh.edges1)[e1]
    d2 = np.diff(mesh.edges2)[e2]
    Ac = lat.basis.T  # columns a1, a2
    g = np.linalg.inv(Ac.T @ Ac)
    detA = abs(np.linalg.det(Ac))
    jac = detA * d1 * d2

    _, _, wq, N, Dx, Dy = _reference(1)
    T11 = np.einsum("q,qi,qj->ij", wq, Dx, Dx)
    T22 = np.einsum("q,qi,qj->ij", wq, Dy, Dy)
    T12 = np.einsum("q,qi,qj->ij", wq, Dx, Dy)
    M0 = np.einsum("q,qi,qj->ij", wq, N, N)

    c11 = jac * g[0, 0] / (d1 * d1)
    c22 = jac * g[1, 1] / (d2 * d2)
    c12 = jac * g[0, 1] / (d1 * d2)
    K1 = (c11[:, None, None] * T11 + c22[:, None, None] * T22
          + c12[:, None, None] * (T12 + T12.T))
    M1 = jac[:, None, None] * M0
    locals_ = {"K1": (np.arange(n_el), K1), "M1": (np.arange(n_el), M1)}

    max_c = 0.0
    if spec.n_inclusions and r > 0:
        sel = _inclusion_elements(mesh, spec, r, e1, e2)
        if len(sel):
            t1, t2, wf, Nf, Dxf, Dyf = _reference(subcells)
            s = np.stack([mesh.edges1[e1[sel]][:, None] + d1[sel][:, None] * t1[None, :],
                          mesh.edges2[e2[sel]][:, None] + d2[sel][:, None] * t2[None, :]], axis=-1)
            x = lat.to_cartesian(s)
            idx = inclusion_index(x, spec, r)
            cvals = np.concatenate([[0.0], contrast(spec, r)])
            phi = cvals[idx + 1]  # w - 1
            psi = 1.0 / (1.0 + phi) - 1.0  # 1/w - 1
            max_c = float(cvals.max())
            jw = jac[sel][:, None] * wf[None, :]
            Mw = np.einsum("eq,qi,qj->eij", jw * phi, Nf, Nf)
            pw = jw * psi
            A11 = np.einsum("eq,qi,qj->eij", pw, Dxf, Dxf)
            A22 = np.einsum("eq,qi,qj->eij", pw, Dyf, Dyf)
            A12 = np.einsum("eq,qi,qj->eij", pw, Dxf, Dyf)
            sd1, sd2 = d1[sel], d2[sel]
            Kd = (A11 * (g[0, 0] / (sd1 * sd1))[:, None, None]
                  + A22 * (g[1, 1] / (sd2 * sd2))[:, None, None]
                  + (A12 + A12.transpose(0, 2, 1)) * (g[0, 1] / (sd1 * sd2))[:, None, None])
            locals_["Mw"] = (sel, Mw)
            locals_["Kd"] = (sel, Kd)

    # common sparsity pattern over all elements and classes
    rows = np.repeat(dof, 9, axis=1).reshape(n_el, 9, 9)
    cols = np.tile(dof, (1, 9)).reshape(n_el, 9, 9)
    cls = ((w1[:, None, :] - w1[:, :, None]) + 1) * 3 + ((w2[:, None, :] - w2[:, :, None]) + 1)
    keys_all = rows.astype(np.int64) * n + cols
    pattern = np.unique(keys_all)
    indptr = np.concatenate([[0], np.cumsum(np.bincount(pattern // n, minlength=n))])
    indices = (pattern % n).astype(np.int32)

    parts = {}
    for name, (els, vals) in locals_.items():
        pos = np.searchsorted(pattern, keys_all[els].ravel())
        c = cls[els].ravel()
        # merge duplicates of (position, class) and drop them into compact arrays
        key = pos.astype(np.int64) * 9 + c
        uk, inv = np.unique(key, return_inverse=True)
        v = np.bincount(inv, weights=vals.ravel())
        parts[name] = ((uk // 9).astype(np.int64), (uk % 9).astype(np.int8), v)
    d = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)
    shifts = d @ lat.basis
    return FiberOperators(mesh, n, indptr.astype(np.int32), indices, shifts, parts, max_c)

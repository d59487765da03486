"""Discrete bases on the reference inclusion Omega.

Each basis carries
  nodes, weights   a quadrature rule on Omega (for smooth kernels),
  P                node values of the basis functions (n_nodes, n_basis),
  gram             the diagonal Gram matrix of the basis,
  const            coefficients of the constant function 1,
and builds the Galerkin matrix of the self-interaction kernel G_nu(s |x - z|).

Disks use radial panels of Lagrange polynomials times Fourier modes; the
self-interaction is separated by the Graf addition theorem, so the log
singularity never meets a quadrature rule.  Polygons use piecewise constants
on triangles with the logarithmic part of the kernel integrated exactly.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import hankel1, jv

from ..design import polygon_log_potential, triangle_rule, triangulate
from ..geometry import InclusionShape
from ..specfun import green_radial, green_small_limit, sqrt_branch


def _gauss(n: int, a: float, b: float):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w


def _lagrange(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """L[i, k] = l_k(x_i) for the Lagrange basis on ``nodes``."""
    n = len(nodes)
    L = np.ones((len(x), n))
    for k in range(n):
        for j in range(n):
            if j != k:
                L[:, k] *= (x - nodes[j]) / (nodes[k] - nodes[j])
    return L


class PolarBasis:
    """l_k(rho) e^{i m phi} on a disk: radial Lagrange panels, |m| <= m_max."""

    kind = "polar"

    def __init__(self, radius: float, panels=(0.0, 0.5, 1.0), order: int = 8,
                 m_max: int = 4, n_phi: int | None = None, fine: int = 24):
        self.radius = float(radius)
        self.edges = np.asarray(panels, dtype=float) * self.radius
        self.order = int(order)
        self.m_max = int(m_max)
        self.n_phi = int(n_phi) if n_phi is not None else 4 * self.m_max + 4
        self.fine = int(fine)
        rho, wr, pan = [], [], []
        for p in range(len(self.edges) - 1):
            x, w = _gauss(self.order, self.edges[p], self.edges[p + 1])
            rho.append(x)
            wr.append(w)
            pan.append(np.full(self.order, p))
        self.rho = np.concatenate(rho)
        self.w_rho = np.concatenate(wr)
        self.panel = np.concatenate(pan)
        self.modes = np.arange(-self.m_max, self.m_max + 1)
        nr, nm = len(self.rho), len(self.modes)
        self.phi = 2 * np.pi * np.arange(self.n_phi) / self.n_phi
        R, PH = np.meshgrid(self.rho, self.phi)  # node q = l * nr + k
        self.nodes = np.column_stack([(R * np.cos(PH)).ravel(), (R * np.sin(PH)).ravel()])
        self.weights = np.tile(self.w_rho * self.rho, self.n_phi) * (2 * np.pi / self.n_phi)
        # coefficient a = mode_index * nr + k
        E = np.exp(1j * np.outer(self.phi, self.modes))  # (n_phi, nm)
        self.P = np.einsum("lm,kj->lkmj", E, np.eye(nr)).reshape(self.n_phi * nr, nm * nr)
        self.gram = np.tile(2 * np.pi * self.w_rho * self.rho, nm)
        self.const = np.zeros(nm * nr, dtype=complex)
        self.const[self.m_max * nr:(self.m_max + 1) * nr] = 1.0
        self.area = np.pi * self.radius ** 2

    @property
    def size(self) -> int:
        return len(self.gram)

    def _radial_integrals(self, m: int, kappa: complex) -> np.ndarray:
        """I[k, j] = int int l_k(rho) l_j(s) H_m(kappa rho_>) J_m(kappa rho_<) s ds rho drho."""
        nr = len(self.rho)
        I = np.zeros((nr, nr), dtype=complex)
        npan = len(self.edges) - 1
        hint, jint, fine = [], [], []
        for p in range(npan):
            a, b = self.edges[p], self.edges[p + 1]
            x, w = _gauss(self.fine, a, b)
            sel = self.panel == p
            L = _lagrange(self.rho[sel], x)  # (fine, order)
            H = hankel1(m, kappa * x)
            J = jv(m, kappa * x)
            hint.append((L * (w * x * H)[:, None]).sum(0))
            jint.append((L * (w * x * J)[:, None]).sum(0))
            fine.append((x, w, L, H, J))
        for p in range(npan):
            rows = np.nonzero(self.panel == p)[0]
            x, w, L, H, J = fine[p]
            a, b = self.edges[p], self.edges[p + 1]
            for q in range(npan):
                cols = np.nonzero(self.panel == q)[0]
                if q < p:
                    I[np.ix_(rows, cols)] = np.outer(hint[p], jint[q])
                elif q > p:
                    I[np.ix_(rows, cols)] = np.outer(jint[p], hint[q])
            # same panel: split the inner integral at the outer node
            t, wt = np.polynomial.legendre.leggauss(self.fine)
            t = 0.5 * (t + 1)
            wt = 0.5 * wt
            lo = a + (x - a)[:, None] * t[None, :]  # (fine, fine) nodes on [a, x]
            hi = x[:, None] + (b - x)[:, None] * t[None, :]
            wlo = (x - a)[:, None] * wt[None, :]
            whi = (b - x)[:, None] * wt[None, :]
            Llo = _lagrange(self.rho[rows], lo.ravel()).reshape(self.fine, self.fine, -1)
            Lhi = _lagrange(self.rho[rows], hi.ravel()).reshape(self.fine, self.fine, -1)
            inner_j = np.einsum("tu,tuj->tj", wlo * lo * jv(m, kappa * lo), Llo)
            inner_h = np.einsum("tu,tuj->tj", whi * hi * hankel1(m, kappa * hi), Lhi)
            u = H[:, None] * inner_j + J[:, None] * inner_h  # (fine, order)
            I[np.ix_(rows, rows)] = (L * (w * x)[:, None]).T @ u
        return I

    def self_block(self, nu, scale: float) -> np.ndarray:
        """Galerkin matrix of int_Omega G_nu(scale |x - z|) . dz on the basis."""
        kappa = sqrt_branch(nu) * scale
        nr = len(self.rho)
        out = np.zeros((self.size, self.size), dtype=complex)
        cache = {}
        for i, m in enumerate(self.modes):
            am = abs(int(m))
            if am not in cache:
                cache[am] = (1j / 4) * (2 * np.pi) ** 2 * self._radial_integrals(am, kappa)
            sl = slice(i * nr, (i + 1) * nr)
            out[sl, sl] = cache[am]
        return out


class TriangleBasis:
    """Piecewise constants on a uniformly refined triangulation of a polygon."""

    kind = "triangles"

    def __init__(self, vertices, levels: int = 2, rule: int = 4):
        tris = [tuple(np.asarray(t, dtype=float)) for t in triangulate(np.asarray(vertices, dtype=float))]
        for _ in range(levels):
            nxt = []
            for a, b, c in tris:
                ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
                nxt += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
            tris = nxt
        self.triangles = np.array([np.stack(t) for t in tris])  # (n, 3, 2)
        pts, wts = triangle_rule(rule)
        nodes, weights, owner = [], [], []
        for i, (a, b, c) in enumerate(self.triangles):
            J = abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
            nodes.append(a + pts[:, :1] * (b - a) + pts[:, 1:2] * (c - a))
            weights.append(wts * J)
            owner.append(np.full(len(wts), i))
        self.nodes = np.concatenate(nodes)
        self.weights = np.concatenate(weights)
        self.owner = np.concatenate(owner)
        n = len(self.triangles)
        self.P = np.zeros((len(self.nodes), n), dtype=complex)
        self.P[np.arange(len(self.nodes)), self.owner] = 1.0
        self.gram = np.bincount(self.owner, weights=self.weights, minlength=n)
        self.const = np.ones(n, dtype=complex)
        self.area = float(self.gram.sum())

    @property
    def size(self) -> int:
        return len(self.gram)

    def self_block(self, nu, scale: float) -> np.ndarray:
        """Galerkin matrix of int_Omega G_nu(scale |x - z|) . dz on the basis.

        G(s rho) = S(s rho) - ln(s rho) / 2pi with S continuous; the smooth part
        uses the product rule, the log part the exact triangle potentials.
        """
        n = self.size
        x = self.nodes
        d = np.hypot(x[:, None, 0] - x[None, :, 0], x[:, None, 1] - x[None, :, 1]) * scale
        S = np.full(d.shape, green_small_limit(nu), dtype=complex)
        nz = d > 0
        S[nz] = green_radial(d[nz], nu, warn=False) + np.log(d[nz]) / (2 * np.pi)
        Wm = self.weights[:, None] * self.P.real  # (nodes, n)
        smooth = Wm.T @ S @ Wm
        U = np.column_stack([polygon_log_potential(x, t) for t in self.triangles])  # (nodes, n)
        logpart = Wm.T @ U + np.outer(self.gram, self.gram) * math.log(scale)
        return smooth - logpart / (2 * np.pi)


def make_basis(shape: InclusionShape, resolution: str = "standard"):
    """Default basis for a shape at 'coarse', 'standard' or 'fine' resolution."""
    if resolution not in ("coarse", "standard", "fine"):
        raise ValueError("resolution must be coarse, standard or fine")
    if shape.kind == "disk":
        cfg = {"coarse": dict(order=6, m_max=2), "standard": dict(order=8, m_max=4),
               "fine": dict(order=12, m_max=6)}[resolution]
        return PolarBasis(shape.radius, **cfg)
    levels = {"coarse": 1, "standard": 2, "fine": 3}[resolution]
    return TriangleBasis(shape.vertices, levels=levels)

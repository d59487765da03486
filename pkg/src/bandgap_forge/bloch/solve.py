"""Fiber pencils and generalized Hermitian eigensolves."""
from __future__ import annotations

import gc
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as sla

from ..errors import SolverFailure
from ..geometry import CrystalSpec
from .assembly import FiberOperators, assemble_operators
from .mesh import MeshSpec, build_mesh

DENSE_LIMIT = 4000
RESIDUAL_TOL = 1e-8
KINDS = ("TM", "TE", "AUX")


@dataclass(frozen=True)
class FiberProblem:
    """One Bloch fiber: kind in {TM, TE, AUX}, quasi-momentum, crystal and mesh.

    ``lam`` is the spectral parameter of the auxiliary family and is ignored otherwise.
    """

    kind: str
    theta: tuple
    spec: CrystalSpec
    r: float
    mesh: MeshSpec = field(default_factory=MeshSpec)
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))


@lru_cache(maxsize=2)
def fiber_operators(spec: CrystalSpec, r: float, mesh: MeshSpec) -> FiberOperators:
    return assemble_operators(build_mesh(spec, r, mesh), spec, r)


def pencil(ops: FiberOperators, kind: str, theta, lam: float = 0.0):
    """Discrete (A, M) for the requested fiber."""
    if kind == "TM":
        return ops.matrix(theta, [(1.0, "K1")]), ops.matrix(theta, [(1.0, "M1"), (1.0, "Mw")])
    if kind == "TE":
        return ops.matrix(theta, [(1.0, "K1"), (1.0, "Kd")]), ops.matrix(theta, [(1.0, "M1")])
    if kind == "AUX":
        return ops.matrix(theta, [(1.0, "K1"), (-float(lam), "Mw")]), ops.matrix(theta, [(1.0, "M1")])
    raise ValueError(kind)


def assemble_fiber(problem: FiberProblem):
    ops = fiber_operators(problem.spec, problem.r, problem.mesh)
    return pencil(ops, problem.kind, problem.theta, problem.lam)


@dataclass
class EigResult:
    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    below: int | None = None  # eigenvalues strictly below the shift, if known


def _normalise(vecs: np.ndarray, M) -> np.ndarray:
    out = np.empty_like(vecs)
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        v = v / np.sqrt(np.real(np.vdot(v, M @ v)))
        k = int(np.argmax(np.abs(v)))
        out[:, j] = v * (abs(v[k]) / v[k])
    return out


def _residuals(A, M, vals, vecs) -> np.ndarray:
    R = A @ vecs - (M @ vecs) * vals[None, :]
    return np.linalg.norm(R, axis=0)


def _order(vals, vecs):
    # sort by value; near-ties fall back on a deterministic key from the vector
    key = np.round(vals, 10)
    sig = np.array([np.real(vecs[:, j]).sum() for j in range(vecs.shape[1])])
    idx = np.lexsort((sig, key))
    return vals[idx], vecs[:, idx]


def _factor(S):
    """LU of a Hermitian matrix with symmetric ordering and diagonal pivots.

    When no off-diagonal pivoting occurs the factorization is L D L^H up to
    scaling, so the signs of diag(U) give the inertia.
    """
    lu = sla.splu(S.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options=dict(SymmetricMode=True))
    below = None
    if np.array_equal(lu.perm_r, lu.perm_c):
        below = int(np.sum(lu.U.diagonal().real < 0))
    return lu, below


def solve_near(A, M, sigma: float, count: int) -> EigResult:
    """The ``count`` eigenvalues of A u = l M u closest to sigma."""
    n = A.shape[0]
    count = min(count, n - 1)
    if n < DENSE_LIMIT:
        Ad, Md = A.toarray(), M.toarray()
        vals, vecs = la.eigh(Ad, Md)
        below = int(np.sum(vals < sigma))
        pick = np.sort(np.argsort(np.abs(vals - sigma), kind="stable")[:count])
        vals, vecs = vals[pick], vecs[:, pick]
    else:
        lu, below = _factor(A - sigma * M)
        op = sla.LinearOperator(A.shape, matvec=lu.solve, dtype=complex)
        v0 = np.ones(n, dtype=complex) + 1j * np.linspace(0.0, 1.0, n)
        try:
            vals, vecs = sla.eigsh(A, k=count, M=M, sigma=sigma, OPinv=op, v0=v0,
                                   ncv=max(2 * count + 1, 20), tol=0.0, maxiter=5000)
        except sla.ArpackError as exc:  # pragma: no cover - depends on ARPACK breakdown
            raise SolverFailure(f"ARPACK failed: {exc}", {"n": n, "sigma": sigma, "count": count}) from exc
        finally:
            # the factor is held in a reference cycle through the operator; free it now
            del op, lu
            gc.collect()
        vals = np.real(vals)
    vecs = _normalise(np.asarray(vecs, dtype=complex), M)
    vals, vecs = _order(np.asarray(vals, dtype=float), vecs)
    res = _residuals(A, M, vals, vecs)
    if np.any(res > RESIDUAL_TOL):
        raise SolverFailure("eigenpair residual above tolerance",
                            {"residuals": res.tolist(), "sigma": sigma, "n": n})
    return EigResult(vals, vecs, res, below)


def lower_bound(kind: str, ops: FiberOperators, lam: float = 0.0) -> float:
    """A value below the fiber spectrum, used as the shift for the smallest eigenvalues."""
    lat = ops.mesh.lattice
    base = -0.01 * min(float(np.dot(lat.b1, lat.b1)), float(np.dot(lat.b2, lat.b2)))
    if kind == "AUX":
        return min(0.0, -float(lam) * ops.max_contrast) + base
    return base


def fiber_eigs(problem: FiberProblem, count: int) -> EigResult:
    """Smallest ``count`` eigenvalues of the fiber, sorted, with residual checks."""
    if count < 1:
        raise ValueError("count must be >= 1")
    ops = fiber_operators(problem.spec, problem.r, problem.mesh)
    A, M = pencil(ops, problem.kind, problem.theta, problem.lam)
    return solve_near(A, M, lower_bound(problem.kind, ops, problem.lam), count)

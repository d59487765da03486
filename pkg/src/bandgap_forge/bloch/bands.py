"""Brillouin-zone sweeps: band sets, gaps, the TM gap certificate and the TE overlap check."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..design import design_margin, r_max
from ..errors import CertificateFailed, PreconditionError, SolverFailure
from ..geometry import CrystalSpec, brillouin_fractional
from ..parallel import parallel_map
from .solve import FiberProblem, fiber_eigs, fiber_operators, pencil, solve_near
from .mesh import MeshSpec


def theta_partners(m: int) -> np.ndarray:
    """Index of -theta for each midpoint-grid sample (row-major (k1, k2))."""
    k1, k2 = np.divmod(np.arange(m * m), m)
    return (m - 1 - k1) * m + (m - 1 - k2)


def canonical_indices(m: int) -> np.ndarray:
    """One representative per {theta, -theta} pair; the fibers are complex conjugates."""
    idx = np.arange(m * m)
    return idx[idx <= theta_partners(m)]


def _expand(values: list, m: int) -> list:
    """Fill the full grid from canonical results using theta -> -theta."""
    canon = canonical_indices(m)
    partner = theta_partners(m)
    full = [None] * (m * m)
    for i, v in zip(canon, values):
        full[i] = v
        full[partner[i]] = v
    return full


@dataclass
class BandFunction:
    index: int
    values: np.ndarray
    errors: np.ndarray


@dataclass
class BandSet:
    """Per-band ranges over the sampled Brillouin zone with mesh-halving error bars."""

    kind: str
    grid: int
    mesh: MeshSpec
    r: float
    lam: float
    fractional: np.ndarray
    thetas: np.ndarray
    values: np.ndarray  # (n_theta, n_bands), finer mesh
    errors: np.ndarray  # |fine - coarse|

    @property
    def n_bands(self) -> int:
        return self.values.shape[1]

    @property
    def intervals(self) -> list:
        return [(float(self.values[:, n].min()), float(self.values[:, n].max())) for n in range(self.n_bands)]

    @property
    def band_errors(self) -> np.ndarray:
        return self.errors.max(axis=0)

    def inflated(self) -> list:
        e = self.band_errors
        return [(lo - e[n], hi + e[n]) for n, (lo, hi) in enumerate(self.intervals)]

    def bands(self) -> list:
        return [BandFunction(n + 1, self.values[:, n].copy(), self.errors[:, n].copy())
                for n in range(self.n_bands)]


def _grid(spec: CrystalSpec, m: int):
    frac = brillouin_fractional(m)
    return frac, frac @ spec.lattice.dual_basis


def _smallest(args):
    kind, theta, spec, r, mesh, lam, count = args
    return fiber_eigs(FiberProblem(kind, theta, spec, r, mesh, lam), count).values


def band_set(spec: CrystalSpec, r: float, kind: str, m: int = 9, n_max: int = 12,
             mesh: MeshSpec = MeshSpec(), lam: float = 0.0, jobs: int | None = 1) -> BandSet:
    """Lowest ``n_max`` band functions on the m x m grid, error bars from the half-resolution mesh."""
    frac, thetas = _grid(spec, m)
    canon = canonical_indices(m)
    per_mesh = []
    for msh in (mesh, mesh.coarsened()):
        fiber_operators(spec, r, msh)  # assemble once before forking
        tasks = [(kind, tuple(thetas[i]), spec, r, msh, lam, n_max) for i in canon]
        per_mesh.append(np.array(_expand(parallel_map(_smallest, tasks, jobs), m)))
    fine, coarse = per_mesh
    return BandSet(kind, m, mesh, r, lam, frac, thetas, fine, np.abs(fine - coarse))


def find_gaps(bandset: BandSet, lo: float, hi: float) -> list:
    """Maximal open subintervals of (lo, hi) avoiding every error-inflated band."""
    if not lo < hi:
        raise ValueError("window needs lo < hi")
    return gaps_from_intervals(bandset.inflated(), lo, hi)


def gaps_from_intervals(intervals, lo: float, hi: float) -> list:
    pieces = sorted((a, b) for a, b in intervals if b > lo and a < hi)
    gaps = []
    cursor = lo
    for a, b in pieces:
        if a > cursor:
            gaps.append((cursor, a))
        cursor = max(cursor, b)
    if cursor < hi:
        gaps.append((cursor, hi))
    return gaps


# distance of a point to a sampled fiber spectrum --------------------------------

@dataclass
class SpectralDistance:
    """Distance from ``sigma`` to the union over the theta grid of fiber spectra."""

    kind: str
    sigma: float
    lam: float
    raw: np.ndarray  # per-theta distance on the finer mesh
    error: np.ndarray  # per-theta |fine - coarse| of the nearest eigenvalue
    below: list  # eigenvalue counts below sigma (finer mesh)
    coarse_raw: np.ndarray

    @property
    def in_gap(self) -> bool:
        return None not in self.below and len(set(self.below)) == 1

    @property
    def margin(self) -> float:
        """Certified distance: worst per-theta distance minus its error bar (0 inside a band)."""
        if not self.in_gap:
            return 0.0
        return float(np.min(self.raw - self.error))

    @property
    def coarse_margin(self) -> float:
        return float(np.min(self.coarse_raw)) if self.in_gap else 0.0

    def as_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma, "lam": self.lam, "in_gap": self.in_gap,
                "margin": self.margin, "raw_min": float(self.raw.min()),
                "error_max": float(self.error.max()), "coarse_margin": self.coarse_margin,
                "count_below": sorted(set(b for b in self.below if b is not None))}


def _nearest(args):
    kind, theta, spec, r, mesh, lam, sigma, count = args
    ops = fiber_operators(spec, r, mesh)
    A, M = pencil(ops, kind, theta, lam)
    res = solve_near(A, M, sigma, count)
    j = int(np.argmin(np.abs(res.values - sigma)))
    return float(res.values[j]), res.below


def spectral_distance(spec: CrystalSpec, r: float, kind: str, sigma: float, m: int = 9,
                      mesh: MeshSpec = MeshSpec(), lam: float = 0.0, count: int = 6,
                      jobs: int | None = 1) -> SpectralDistance:
    frac, thetas = _grid(spec, m)
    canon = canonical_indices(m)
    out = []
    for msh in (mesh, mesh.coarsened()):
        fiber_operators(spec, r, msh)
        tasks = [(kind, tuple(thetas[i]), spec, r, msh, lam, sigma, count) for i in canon]
        out.append(_expand(parallel_map(_nearest, tasks, jobs), m))
    fine, coarse = out
    near_f = np.array([v for v, _ in fine])
    near_c = np.array([v for v, _ in coarse])
    below = [b for _, b in fine]
    if any(b is None for b in below):
        raise SolverFailure("inertia unavailable: pivoting occurred in the shifted factorization")
    return SpectralDistance(kind, sigma, lam, np.abs(near_f - sigma), np.abs(near_f - near_c), below,
                            np.abs(near_c - sigma))


# certificate --------------------------------------------------------------------

@dataclass
class TargetCertificate:
    lam: float
    r: float
    tm: SpectralDistance
    aux: SpectralDistance
    tm_required: float
    aux_required: float
    eta: float

    @property
    def tm_passed(self) -> bool:
        return self.tm.in_gap and self.tm.margin >= self.tm_required

    @property
    def aux_passed(self) -> bool:
        return self.aux.in_gap and self.aux.margin >= self.aux_required

    @property
    def tm_trend(self) -> bool:
        """Coarse-mesh check of the same TM margin (informational)."""
        return self.tm.coarse_margin >= self.tm_required

    @property
    def passed(self) -> bool:
        return self.tm_passed and self.aux_passed

    def as_dict(self) -> dict:
        return {"lam": self.lam, "r": self.r, "eta": self.eta, "passed": self.passed,
                "tm_passed": self.tm_passed, "aux_passed": self.aux_passed, "tm_trend": self.tm_trend,
                "tm_required": self.tm_required, "aux_required": self.aux_required,
                "tm": self.tm.as_dict(), "aux": self.aux.as_dict()}


@dataclass
class Certificate:
    r: float
    grid: int
    mesh: MeshSpec
    targets: list = field(default_factory=list)
    reason: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.targets) and all(t.passed for t in self.targets)

    def as_dict(self) -> dict:
        return {"r": self.r, "grid": self.grid, "mesh": {"n_base": self.mesh.n_base, "levels": self.mesh.levels},
                "passed": self.passed, "reason": self.reason, "targets": [t.as_dict() for t in self.targets]}


def tm_gap_certificate(spec: CrystalSpec, r: float, lam=None, m: int = 9, mesh: MeshSpec = MeshSpec(),
                       aux_slack: float = 1.0, jobs: int | None = 1, raise_on_failure: bool = True,
                       n_max: int = 12) -> Certificate:
    """Certify that each target lies in a TM gap.

    Check (i): the TM fiber spectra over the grid stay at distance >= lambda_1 r^2 |ln r|
    from the target after subtracting error bars.  Check (ii): the auxiliary fibers at
    that target keep distance >= eta - aux_slack, eta = 2pi/|Omega| + 1.
    """
    if spec.n_inclusions and not 0 < r < r_max(spec):
        raise PreconditionError(f"r = {r} must lie in (0, r_max = {r_max(spec)})")
    targets = list(spec.lambdas) if lam is None else list(np.atleast_1d(lam).astype(float))
    cert = Certificate(r, m, mesh)
    if not targets:
        # without inclusions the TM operator is -Laplace with spectrum [0, inf): no gap to certify
        cert.reason = "no gap (no inclusions, the TM spectrum is [0, inf))"
        if raise_on_failure:
            raise CertificateFailed(cert.reason, cert)
        return cert
    eta = design_margin(spec.shape)
    lam1 = min(spec.lambdas) if spec.lambdas else min(targets)
    width = lam1 * r * r * abs(math.log(r)) if r > 0 else 0.0
    for t in targets:
        tm = spectral_distance(spec, r, "TM", t, m, mesh, jobs=jobs)
        aux = spectral_distance(spec, r, "AUX", t, m, mesh, lam=t, jobs=jobs)
        cert.targets.append(TargetCertificate(t, r, tm, aux, width, eta - aux_slack, eta))
    if not cert.passed:
        bad = [tc for tc in cert.targets if not tc.passed]
        if any(not tc.tm.in_gap for tc in bad):
            cert.reason = "no gap"
        else:
            cert.reason = "margin below requirement"
        if raise_on_failure:
            raise CertificateFailed(
                cert.reason + ": " + ", ".join(
                    f"lam={tc.lam:g} tm_margin={tc.tm.margin:.6g} aux_margin={tc.aux.margin:.6g}" for tc in bad),
                cert)
    return cert


# TE overlap ------------------------------------------------------------------------

@dataclass
class OverlapReport:
    bandset: BandSet
    n0: int
    overlaps: list  # (n, b_n, a_{n+1}, ok)
    covered: tuple
    gaps: list

    @property
    def ok(self) -> bool:
        return all(o[3] for o in self.overlaps) and not self.gaps

    def as_dict(self) -> dict:
        return {"n0": self.n0, "ok": self.ok, "covered": list(self.covered),
                "overlaps": [{"n": n, "b_n": b, "a_next": a, "ok": ok} for n, b, a, ok in self.overlaps],
                "gaps": [list(g) for g in self.gaps],
                "intervals": [list(iv) for iv in self.bandset.intervals],
                "errors": self.bandset.band_errors.tolist()}


def te_overlap_check(spec: CrystalSpec, r: float, n0: int = 4, m: int = 9, mesh: MeshSpec = MeshSpec(),
                     jobs: int | None = 1) -> OverlapReport:
    """Check b_n > a_{n+1} (with error bars) for n < n0 and report the covered interval [0, b_{n0}]."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    bs = band_set(spec, r, "TE", m, n0 + 1, mesh, jobs=jobs)
    iv = bs.intervals
    e = bs.band_errors
    overlaps = []
    for n in range(n0 - 1):
        ok = (iv[n][1] - e[n]) > (iv[n + 1][0] + e[n + 1])
        overlaps.append((n + 1, iv[n][1], iv[n + 1][0], bool(ok)))
    top = iv[n0 - 1][1]
    gaps = find_gaps(bs, 0.0, top)
    return OverlapReport(bs, n0, overlaps, (0.0, top), gaps)

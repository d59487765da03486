import numpy as np
import pytest

from bandgap_forge.bloch import (FiberProblem, MeshSpec, assemble_fiber, band_set, build_mesh, fiber_eigs,
                                 find_gaps, gaps_from_intervals, solve_near, te_overlap_check, tm_gap_certificate)
from bandgap_forge.errors import CertificateFailed, MeshTooCoarse, PreconditionError
from bandgap_forge.geometry import CrystalSpec, Lattice

VAC = CrystalSpec.vacuum(Lattice.square())
PI2 = np.pi ** 2


def test_vacuum_fibers():
    m = MeshSpec(32, 0)
    v0 = fiber_eigs(FiberProblem("TM", (0.0, 0.0), VAC, 0.0, m), 6).values
    assert abs(v0[0]) < 1e-9
    assert np.allclose(v0[1:5], 4 * PI2, rtol=1e-2)
    th0 = tuple(Lattice.square().theta0)
    v1 = fiber_eigs(FiberProblem("TM", th0, VAC, 0.0, m), 4).values
    assert np.allclose(v1, 2 * PI2, rtol=1e-2)
    te = fiber_eigs(FiberProblem("TE", th0, VAC, 0.0, m), 4).values
    assert np.allclose(te, v1, rtol=1e-12)


def test_vacuum_second_order():
    errs = []
    for n in (8, 16, 32):
        v = fiber_eigs(FiberProblem("TM", (0.0, 0.0), VAC, 0.0, MeshSpec(n, 0)), 2).values
        errs.append(abs(v[1] - 4 * PI2))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_pencil_hermitian_and_periodic(designed):
    spec, _ = designed
    mesh = MeshSpec(32)
    th = np.array([1.3, -2.1])
    for kind in ("TM", "TE", "AUX"):
        A, M = assemble_fiber(FiberProblem(kind, tuple(th), spec, 0.1, mesh, lam=1.0))
        assert abs(A - A.getH()).max() < 1e-10 * abs(A).max()
        assert abs(M - M.getH()).max() < 1e-12 * abs(M).max()
    a = fiber_eigs(FiberProblem("TM", tuple(th), spec, 0.1, mesh), 4).values
    b = fiber_eigs(FiberProblem("TM", tuple(th + spec.lattice.b1), spec, 0.1, mesh), 4).values
    c = fiber_eigs(FiberProblem("TM", tuple(-th), spec, 0.1, mesh), 4).values
    assert np.allclose(a, b, rtol=1e-8) and np.allclose(a, c, rtol=1e-8)


def test_aux_fixed_point(designed):
    spec, _ = designed
    mesh = MeshSpec(32)
    th = (0.9, 0.4)
    tm = fiber_eigs(FiberProblem("TM", th, spec, 0.1, mesh), 3).values
    for lam in tm:
        A, M = assemble_fiber(FiberProblem("AUX", th, spec, 0.1, mesh, lam=lam))
        vals = solve_near(A, M, lam, 1).values
        assert abs(vals[0] - lam) <= 1e-8 * lam


def test_band_set_and_gaps(designed):
    spec, _ = designed
    bs = band_set(spec, 0.1, "TM", m=3, n_max=3, mesh=MeshSpec(32))
    assert bs.values.shape == (9, 3) and np.all(bs.errors >= 0)
    assert np.all(np.diff(bs.values, axis=1) >= -1e-12)
    gaps = find_gaps(bs, 0.0, bs.intervals[-1][1])
    # the designed target lies in a gap of the sampled spectrum
    assert any(a < 1.0 < b for a, b in gaps)
    assert gaps_from_intervals([(0, 1), (0.5, 2), (3, 4)], -1, 5) == [(-1, 0), (2, 3), (4, 5)]
    with pytest.raises(ValueError):
        find_gaps(bs, 2.0, 1.0)


def test_certificate_vacuum_and_preconditions(designed):
    with pytest.raises(CertificateFailed, match="no gap"):
        tm_gap_certificate(VAC, 0.0, m=2, mesh=MeshSpec(16))
    spec, report = designed
    with pytest.raises(PreconditionError):
        tm_gap_certificate(spec, report.r_max * 1.01, m=2)


def test_overlap_vacuum():
    # even m misses theta = 0 and small m under-samples the band extremes; m = 9 resolves both
    rep = te_overlap_check(VAC, 0.0, n0=3, m=9, mesh=MeshSpec(16, 0))
    assert rep.gaps == [] and rep.ok
    assert rep.covered[0] == 0.0


def test_mesh_too_coarse(designed):
    spec, _ = designed
    with pytest.raises(MeshTooCoarse):
        build_mesh(spec, 0.001, MeshSpec(8, 0))

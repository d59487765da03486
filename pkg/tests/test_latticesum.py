import math

import numpy as np
import pytest

from bandgap_forge.errors import NearPole, NoConvergence
from bandgap_forge.geometry import Lattice
from bandgap_forge.latticesum import (GFunEvaluator, ein, first_pole, poles, q_diagonal, q_matrix,
                                      q_matrix_points, truncation_index)
from bandgap_forge.specfun import EULER_GAMMA
from oracles import g_oracle

LATTICES = [Lattice.square(), Lattice((1.0, 0.0), (0.3, 1.2)), Lattice((0.7, 0.1), (-0.2, 0.9))]
POINTS = [(-1.0, (0.3, -0.7)), (2.5, (1.0, 0.2)), (-40.0, (0.0, 0.0)), (-0.2, (1.0, 1.0)), (7.0, (3.0, 3.0))]


@pytest.mark.parametrize("lat", LATTICES, ids=["square", "oblique", "skew"])
def test_g_matches_independent_oracle(lat):
    ev = GFunEvaluator(lat)
    for E, th in POINTS:
        if min(abs(poles(lat, th, 60.0) - E)) < 0.05:
            continue
        assert ev.g(E, th) == pytest.approx(g_oracle(E, th, lat.a1, lat.a2), abs=1e-8)


def test_dg_dE_positive_and_matches_difference_quotient():
    lat = LATTICES[1]
    ev = GFunEvaluator(lat)
    for E, th in POINTS[:3]:
        h = 1e-4
        fd = (g_oracle(E + h, th, lat.a1, lat.a2) - g_oracle(E - h, th, lat.a1, lat.a2)) / (2 * h)
        d = ev.dg_dE(E, th)
        assert d > 0
        assert d == pytest.approx(fd, rel=1e-6)


def test_theta_periodic_and_even():
    lat = LATTICES[2]
    ev = GFunEvaluator(lat)
    th = np.array([0.4, -0.9])
    v = ev.g(-0.7, th)
    assert ev.g(-0.7, th + lat.b1 - 2 * lat.b2) == pytest.approx(v, abs=1e-10)
    assert ev.g(-0.7, -th) == pytest.approx(v, abs=1e-10)


def test_pole_guard_and_cap():
    lat = Lattice.square()
    th = np.array([0.5, 0.0])
    with pytest.raises(NearPole):
        GFunEvaluator(lat).g(0.25, th)
    with pytest.raises(NoConvergence):
        GFunEvaluator(lat, tolerance=1e-15, max_radius=10.0).g(-1.0, th)


def test_poles():
    lat = Lattice.square()
    p = poles(lat, (0.0, 0.0), 40.0)
    assert np.allclose(p, [0.0, 4 * np.pi ** 2])
    assert first_pole(lat, lat.theta0) == pytest.approx(2 * np.pi ** 2)


def test_ein_series_and_large_argument():
    # Ein(x) = int_0^x (1 - e^{-t}) / t dt
    from scipy.integrate import quad
    for x in (-3.0, -0.01, 0.5, 30.0):
        ref = quad(lambda t: -math.expm1(-t) / t if t else 1.0, 0.0, x, epsabs=1e-14, epsrel=1e-13)[0]
        assert ein(x) == pytest.approx(ref, rel=1e-11, abs=1e-14)


def test_q_matrix():
    assert q_diagonal(0.0, -4.0) == pytest.approx(-EULER_GAMMA / (2 * np.pi))
    lat = Lattice.square()
    Q = q_matrix(0.3, lat, 1 + 2j, 1)
    assert Q.entries.shape == (9, 9)
    assert np.allclose(Q.entries, Q.entries.T)
    Qc = q_matrix(0.3, lat, 1 - 2j, 1)
    assert np.allclose(Qc.entries, np.conj(Q.entries))
    with pytest.raises(ValueError):
        q_matrix(0.3, lat, -1.0, 1)
    Qp = q_matrix_points([0.1, 0.2], [(0, 0), (1, 0)], 2j)
    assert Qp[0, 0] == pytest.approx(q_diagonal(0.1, 2j))


def test_truncation_index_monotone():
    lat = Lattice.square()
    Ms = [truncation_index(lat, 4j, tol) for tol in (1e-2, 1e-6, 1e-10)]
    assert Ms == sorted(Ms) and Ms[-1] > Ms[0]
    assert truncation_index(lat, 100j, 1e-6) <= Ms[1]

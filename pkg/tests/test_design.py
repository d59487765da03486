import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from bandgap_forge.design import (DesignInputs, coupling_constants, contrast, design_crystal, inclusion_index,
                                  limit_coupling, log_potential, log_self_energy, polygon_log_potential, r_max,
                                  verify_design, weight_eval)
from bandgap_forge.errors import BadBaseCoupling, InvalidDesignInputs
from bandgap_forge.geometry import InclusionShape, Lattice

TRIANGLE = InclusionShape.polygon([(-0.5, -0.4), (0.7, -0.3), (0.1, 0.8)])


def unit_square_self_energy() -> float:
    # pair-distance density of the unit square: 4 (1 - u)(1 - v) on [0, 1]^2
    val, _ = dblquad(lambda v, u: 4 * (1 - u) * (1 - v) * 0.5 * math.log(u * u + v * v + 1e-300),
                     0, 1, 0, 1, epsabs=1e-12, epsrel=1e-12)
    return val


def monte_carlo_self_energy(shape, n=400_000, seed=7):
    rng = np.random.default_rng(seed)
    R = shape.bounding_radius
    pts = []
    while sum(len(p) for p in pts) < 2 * n:
        x = rng.uniform(-R, R, size=(4 * n, 2))
        pts.append(x[shape.contains(x)])
    x = np.concatenate(pts)[:2 * n]
    s = np.log(np.linalg.norm(x[:n] - x[n:], axis=1))
    return shape.area ** 2 * s.mean(), shape.area ** 2 * s.std() / math.sqrt(n)


def test_disk_self_energy():
    assert log_self_energy(InclusionShape.disk()) == pytest.approx(-math.pi ** 2 / 4, abs=1e-10)


def test_square_self_energy_against_distance_density():
    assert log_self_energy(InclusionShape.square(1.0)) == pytest.approx(unit_square_self_energy(), abs=1e-8)


def test_triangle_self_energy_monte_carlo():
    mc, se = monte_carlo_self_energy(TRIANGLE)
    assert abs(log_self_energy(TRIANGLE) - mc) < 5 * se


@pytest.mark.parametrize("shape", [InclusionShape.disk(0.8), InclusionShape.square(1.3), TRIANGLE],
                         ids=["disk", "square", "triangle"])
def test_self_energy_scaling(shape):
    C = log_self_energy(shape)
    for a in (0.5, 2.0):
        Ca = log_self_energy(shape.scaled(a))
        assert Ca == pytest.approx(a ** 4 * (C + shape.area ** 2 * math.log(a)), abs=1e-8)


def test_polygon_potential_against_quadrature():
    verts = InclusionShape.square(1.0).vertices
    x = np.array([0.2, -0.1])
    ref, _ = dblquad(lambda v, u: 0.5 * math.log((u - x[0]) ** 2 + (v - x[1]) ** 2),
                     -0.5, 0.5, -0.5, 0.5, epsabs=1e-11)
    assert polygon_log_potential(x[None, :], verts)[0] == pytest.approx(ref, abs=1e-8)
    # disk potential branch agrees with a fine polygon approximation of the disk
    t = np.linspace(0, 2 * np.pi, 2001)[:-1]
    poly = np.column_stack([np.cos(t), np.sin(t)])
    a = log_potential(x[None, :], InclusionShape.disk())[0]
    assert a == pytest.approx(polygon_log_potential(x[None, :], poly)[0], abs=1e-5)


def test_coupling_round_trip():
    shape = InclusionShape.square(0.7)
    lam = np.array([1.0, 2.5])
    c = coupling_constants(lam, shape, -0.4)
    assert np.allclose(limit_coupling(c, lam, shape), -0.4)


def test_design_default(designed):
    spec, report = designed
    assert verify_design(spec, report)
    lo, hi = report.interval
    assert report.edges.E1 < lo < 1.0 < hi < report.edges.E2
    assert 0 < spec.r < report.r_max == pytest.approx(r_max(spec))
    assert limit_coupling(spec.coefficients[0], 1.0, spec.shape) == pytest.approx(report.alpha_k)
    assert np.all(contrast(spec) > 0)
    y = spec.centers_array[0]
    assert weight_eval(y, spec) == pytest.approx(1 + contrast(spec)[0])
    assert weight_eval(y + np.array([0.5 * spec.lattice.a1[0], 0.0]), spec) == 1.0
    # periodic membership
    assert int(inclusion_index((y + spec.lattice.a1 + spec.lattice.a2)[None, :], spec)[0]) == 0


def test_design_two_targets():
    spec, report = design_crystal(DesignInputs(targets=(1.0, 1.5), shape=InclusionShape.square(1.0)))
    assert spec.n_inclusions == 2
    assert verify_design(spec, report)
    assert np.allclose(limit_coupling(np.array(spec.coefficients), np.array(spec.lambdas), spec.shape),
                       report.alpha_k)


def test_design_errors():
    with pytest.raises(InvalidDesignInputs):
        design_crystal(DesignInputs(targets=(2.0, 1.0)))
    with pytest.raises(BadBaseCoupling):
        design_crystal(DesignInputs(targets=(1.0,), alpha0=1.0))
    with pytest.raises(InvalidDesignInputs):
        design_crystal(DesignInputs(targets=(1.0,), r=0.9))

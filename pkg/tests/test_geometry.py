import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bandgap_forge.errors import DegenerateLattice
from bandgap_forge.geometry import (CrystalSpec, InclusionShape, Lattice, brillouin_fractional, brillouin_grid,
                                    dual_lattice, spec_from_dict, spec_to_dict, validate_crystal_spec)

coord = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(coord, coord, coord, coord)
def test_dual_identity(a, b, c, d):
    A = np.array([[a, b], [c, d]])
    if abs(np.linalg.det(A)) < 1e-3:
        return
    b1, b2 = dual_lattice(A[0], A[1])
    G = A @ np.array([b1, b2]).T
    assert np.allclose(G, 2 * np.pi * np.eye(2), rtol=0, atol=1e-12 * 2 * np.pi * max(1, np.abs(A).max() * 10))


def test_degenerate_lattice():
    with pytest.raises(DegenerateLattice):
        Lattice((1.0, 2.0), (2.0, 4.0))


def test_square_lattice_quantities():
    lat = Lattice.square(2.0)
    assert lat.cell_area == pytest.approx(4.0)
    assert lat.bz_area == pytest.approx(np.pi ** 2)
    assert np.allclose(np.abs(lat.theta0), [np.pi / 2, np.pi / 2])


def test_reduce_into_cell():
    lat = Lattice((1.0, 0.0), (0.4, 0.8))
    x = np.array([[3.7, -2.2], [-0.1, 0.05]])
    s = lat.to_fractional(lat.reduce(x))
    assert np.all((s >= 0) & (s < 1))
    # differs from the input by a lattice vector
    k = lat.to_fractional(x - lat.reduce(x))
    assert np.allclose(k, np.round(k))


def test_midpoint_grid():
    for m in (1, 4, 9):
        s = brillouin_fractional(m)
        assert s.shape == (m * m, 2)
        assert np.all(np.abs(s) < 0.5)
        # symmetric under theta -> -theta
        assert np.allclose(np.sort(s, axis=0), np.sort(-s, axis=0))
    lat = Lattice.square()
    assert np.allclose(brillouin_grid(lat, 1), 0.0)


def test_shapes():
    assert InclusionShape.disk(2.0).area == pytest.approx(4 * np.pi)
    sq = InclusionShape.square(2.0)
    assert sq.area == pytest.approx(4.0)
    assert sq.bounding_radius == pytest.approx(np.sqrt(2))
    # clockwise input is reoriented
    cw = InclusionShape.polygon([(-1, -1), (-1, 1), (1, 1), (1, -1)])
    assert cw.area == pytest.approx(4.0)
    assert bool(sq.contains(np.array([0.9, -0.9])))
    assert not bool(sq.contains(np.array([1.1, 0.0])))
    with pytest.raises(ValueError):
        InclusionShape.polygon([(1, 1), (2, 1), (2, 2)])  # origin outside


def test_spec_roundtrip_and_validation():
    lat = Lattice.square()
    spec = CrystalSpec(lat, [(0.5, 0.5)], [1.0], [2.0], InclusionShape.disk(), 0.1)
    assert validate_crystal_spec(spec) == []
    again = spec_from_dict(spec_to_dict(spec))
    assert again == spec
    with pytest.raises(ValueError):
        spec_from_dict({**spec_to_dict(spec), "colour": "red"})
    bad = CrystalSpec(lat, [(0.5, 0.5), (0.55, 0.5)], [1.0, 2.0], [1.0, 1.0], InclusionShape.disk(), 0.1)
    assert any("overlap" in p for p in validate_crystal_spec(bad))
    bad = CrystalSpec(lat, [(0.5, 0.5), (0.2, 0.2)], [2.0, 1.0], [1.0, 1.0], InclusionShape.disk(), 0.05)
    assert any("increasing" in p for p in validate_crystal_spec(bad))
    # centers are reduced into the cell
    assert CrystalSpec(lat, [(1.25, -0.75)], [1.0], [1.0], InclusionShape.disk(), 0.1).centers == ((0.25, 0.25),)

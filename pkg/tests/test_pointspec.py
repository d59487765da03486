import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bandgap_forge.errors import InvalidScale, NoGapToScale
from bandgap_forge.geometry import Lattice
from bandgap_forge.pointspec import (PointInteractionModel, band_edges, place_gap, scale_model, spectrum_pi,
                                     threshold, translate_model)
from oracles import pi_band_oracle


@settings(max_examples=12, deadline=None)
@given(st.floats(-0.6, 0.8), st.floats(0.6, 1.6), st.floats(-0.4, 0.4))
def test_edge_signs(alpha, aspect, shear):
    lat = Lattice((1.0, 0.0), (shear, aspect))
    e = band_edges(PointInteractionModel(alpha, lat))
    assert e.E0 < 0 < e.E2
    assert e.E0 <= e.E1


def test_threshold_sides_square():
    lat = Lattice.square()
    thr = threshold(lat)
    below = band_edges(PointInteractionModel(thr - 0.5, lat))
    above = band_edges(PointInteractionModel(thr + 0.5, lat))
    assert below.E1 < 0 < above.E1
    assert band_edges(PointInteractionModel(thr, lat), tol=1e-12).E1 == pytest.approx(0.0, abs=1e-8)


def test_edges_against_oracle():
    lat = Lattice((1.0, 0.0), (0.2, 1.1))
    for alpha in (-0.3, 0.2):
        e = band_edges(PointInteractionModel(alpha, lat))
        assert e.E0 == pytest.approx(pi_band_oracle(alpha, (0, 0), lat.a1, lat.a2), rel=1e-8, abs=1e-8)
        assert e.E1 == pytest.approx(pi_band_oracle(alpha, lat.theta0, lat.a1, lat.a2), rel=1e-8, abs=1e-8)
        assert e.E_tilde == pytest.approx(pi_band_oracle(alpha, (0, 0), lat.a1, lat.a2, 1), rel=1e-8)


@pytest.mark.parametrize("k", [0.5, 2.0, 3.0])
def test_scale_covariance(k):
    lat = Lattice((1.0, 0.0), (0.3, 0.9))
    m = PointInteractionModel(-0.1, lat)
    e = band_edges(m)
    es = band_edges(scale_model(m, k))
    for a, b in zip((es.E0, es.E1, es.E2), (e.E0, e.E1, e.E2)):
        assert a == pytest.approx(k * k * b, rel=1e-8)
    with pytest.raises(InvalidScale):
        scale_model(m, -1.0)


def test_translation_invariance():
    m = PointInteractionModel(0.05, Lattice.square())
    assert band_edges(translate_model(m, (0.3, 0.1))) == band_edges(m)


def test_spectrum_and_gap_placement():
    lat = Lattice.square()
    thr = threshold(lat)
    m = PointInteractionModel(thr - 0.3, lat)
    sp = spectrum_pi(m)
    assert len(sp.intervals) == 2
    gaps = sp.gaps()
    (g0, g1) = gaps[-1]
    assert not sp.contains(0.5 * (g0 + g1)) and sp.contains(g1 + 1.0)
    k, scaled = place_gap(3.0, 5.0, m)
    e = band_edges(scaled)
    assert e.E1 < 3.0 and 5.0 < e.E2
    # first rung of the ladder above k_lo = sqrt(b / E2), where the gap edge touches b
    assert k == pytest.approx(math.sqrt(5.0 / sp.edges.E2) * 1.01, rel=1e-12)
    with pytest.raises(NoGapToScale):
        place_gap(3.0, 5.0, PointInteractionModel(thr + 0.5, lat))

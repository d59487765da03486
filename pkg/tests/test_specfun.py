import math
import warnings

import numpy as np
import pytest

from bandgap_forge.errors import InvalidSpectralParameter, SingularArgument
from bandgap_forge.specfun import (EULER_GAMMA, AccuracyWarning, green_free, green_radial, green_regularized,
                                   green_small_limit, log_term, sqrt_branch)
from oracles import k0_series


def test_sqrt_branch():
    for nu in (2j, -1 + 0.1j, -1 - 0.1j, -4.0, 3 + 1e-3j, 3 - 1e-3j):
        s = sqrt_branch(nu)
        assert s.imag > 0
        assert s * s == pytest.approx(nu)


@pytest.mark.parametrize("rho", [0.01, 0.3, 1.0, 2.5])
def test_negative_real_matches_k0_series(rho):
    # nu = -4: G = K_0(2 rho) / 2pi
    assert green_radial(rho, -4.0) == pytest.approx(k0_series(2 * rho, terms=80) / (2 * math.pi), rel=1e-12)


def test_negative_real_matches_k0_asymptotics():
    # large argument: K_0(x) ~ sqrt(pi / 2x) e^{-x} (1 - 1/8x + 9/128x^2 - 225/3072x^3)
    x = 40.0
    ref = math.sqrt(math.pi / (2 * x)) * math.exp(-x) * (1 - 1 / (8 * x) + 9 / (128 * x ** 2) - 225 / (3072 * x ** 3))
    assert green_radial(x / 2, -4.0, warn=False) == pytest.approx(ref / (2 * math.pi), rel=1e-7)


def test_hankel_route_continuous_with_k0_route():
    rho = np.array([0.2, 1.0, 3.0])
    a = green_radial(rho, -1.0)
    b = green_radial(rho, -1.0 + 1e-12j)
    assert np.allclose(a, b.real, rtol=1e-9)
    assert np.all(np.abs(b.imag) < 1e-9)


def test_helmholtz_equation():
    nu = -0.5 + 1.5j
    x0 = np.array([0.7, 0.4])
    h = 1e-3
    c = green_free(x0, nu)
    lap = sum(green_free(x0 + s * h * e, nu) for e in np.eye(2) for s in (1, -1)) - 4 * c
    assert abs(-lap / h ** 2 - nu * c) < 1e-5


def test_small_argument_limit():
    nu = 2j
    for rho in (1e-4, 1e-6):
        val = green_radial(rho, nu, warn=False) + math.log(rho) / (2 * math.pi)
        assert abs(val - green_small_limit(nu)) < 10 * rho
    # explicit constant at nu = -4: -(gamma + ln 1)/2pi
    assert green_small_limit(-4.0) == pytest.approx(-EULER_GAMMA / (2 * math.pi))
    assert log_term(-4.0) == pytest.approx(0.0)


def test_conjugation_symmetry():
    rho = np.array([0.3, 2.0])
    assert np.allclose(green_radial(rho, 1 - 2j), np.conj(green_radial(rho, 1 + 2j)))


def test_errors_and_warnings():
    with pytest.raises(InvalidSpectralParameter):
        green_radial(1.0, 2.0)
    with pytest.raises(SingularArgument):
        green_radial(0.0, 1j)
    with pytest.warns(AccuracyWarning):
        green_radial(1e-10, 1j)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        green_radial(1.0, 1j)
    out = green_regularized(np.array([[0.0, 0.0], [1.0, 0.0]]), -1.0)
    assert out[0] == 0 and out[1] > 0

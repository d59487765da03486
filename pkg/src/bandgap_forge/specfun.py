"""Free two-dimensional Helmholtz kernel with a fixed branch convention."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import hankel1, k0

from .errors import InvalidSpectralParameter, SingularArgument

EULER_GAMMA = 0.57721566490153286060651209008240243


class AccuracyWarning(UserWarning):
    """Kernel argument outside the range where accuracy is guaranteed."""


@dataclass(frozen=True)
class SpectralParameter:
    """Spectral parameter nu off the half line [0, inf)."""

    nu: complex

    def __post_init__(self):
        nu = complex(self.nu)
        if nu.imag == 0.0 and nu.real >= 0.0:
            raise InvalidSpectralParameter(f"nu = {nu} lies on [0, inf)")
        object.__setattr__(self, "nu", nu)

    @property
    def sqrt_nu(self) -> complex:
        return sqrt_branch(self.nu)

    @property
    def is_negative_real(self) -> bool:
        return self.nu.imag == 0.0 and self.nu.real < 0.0

    def conjugate(self) -> "SpectralParameter":
        return SpectralParameter(self.nu.conjugate())


def as_spectral(nu) -> SpectralParameter:
    return nu if isinstance(nu, SpectralParameter) else SpectralParameter(nu)


def sqrt_branch(nu) -> complex:
    """Square root of nu with positive imaginary part."""
    s = np.sqrt(complex(nu))
    if s.imag < 0 or (s.imag == 0 and s.real > 0):
        s = -s
    return complex(s)


def log_term(nu) -> complex:
    """ln(sqrt(nu) / 2i) with the principal logarithm."""
    return complex(np.log(sqrt_branch(nu) / 2j))


def green_radial(rho, nu, warn: bool = True):
    """G_nu as a function of the distance rho > 0 (vectorised).

    Real arithmetic through K0 for negative real nu, Hankel H0^(1) otherwise.
    """
    p = as_spectral(nu)
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise SingularArgument("kernel is singular at x = 0")
    if warn:
        z = abs(p.sqrt_nu) * rho
        if np.any((z < 1e-8) | (z > 50)):
            warnings.warn("kernel argument outside [1e-8, 50], accuracy not guaranteed",
                          AccuracyWarning, stacklevel=2)
    if p.is_negative_real:
        return k0(np.sqrt(-p.nu.real) * rho) / (2 * np.pi)
    return 0.25j * hankel1(0, p.sqrt_nu * rho)


def green_free(x, nu, warn: bool = True):
    """(i/4) H0^(1)(sqrt(nu) |x|) for x of shape (..., 2)."""
    x = np.asarray(x, dtype=float)
    return green_radial(np.hypot(x[..., 0], x[..., 1]), nu, warn=warn)


def green_regularized(x, nu, warn: bool = True):
    """Same kernel with the singular value at x = 0 replaced by 0."""
    x = np.asarray(x, dtype=float)
    rho = np.hypot(x[..., 0], x[..., 1])
    p = as_spectral(nu)
    dtype = float if p.is_negative_real else complex
    out = np.zeros(rho.shape, dtype=dtype)
    nz = rho > 0
    if np.any(nz):
        out[nz] = green_radial(rho[nz], p, warn=warn)
    return out if out.ndim else out[()]


def green_small_limit(nu) -> complex:
    """lim_{x -> 0} G_nu(x) + ln|x| / (2 pi)."""
    return -(EULER_GAMMA + log_term(nu)) / (2 * np.pi)

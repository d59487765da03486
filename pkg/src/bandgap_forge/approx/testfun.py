"""Test functions for resolvent applications and their free resolvents."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import j0

from ..specfun import as_spectral, green_regularized


def gaussian_free_resolvent(d, nu, width: float) -> np.ndarray:
    """(R_0(nu) f)(x) for the unit-mass Gaussian of standard deviation ``width``
    at distance d from its center:

        (1/2pi) int_0^inf exp(-width^2 k^2 / 2) J_0(k d) k / (k^2 - nu) dk

    by composite Gauss-Legendre on [0, k_max] with panels short enough to resolve
    both the oscillation of J_0 and the resonance near k^2 = Re nu.
    """
    nu = as_spectral(nu).nu
    d = np.atleast_1d(np.asarray(d, dtype=float))
    kmax = math.sqrt(2 * 45.0) / width
    dmax = float(d.max()) if d.size else 0.0
    h = min(math.pi / max(dmax, 1e-3), kmax / 32)
    if nu.real > 0:
        h = min(h, max(abs(nu.imag) / (2 * math.sqrt(nu.real)), 1e-4))
    n_pan = int(math.ceil(kmax / h))
    t, w = np.polynomial.legendre.leggauss(20)
    edges = np.linspace(0.0, kmax, n_pan + 1)
    k = (0.5 * (edges[1:] - edges[:-1])[:, None] * (t[None, :] + 1) + edges[:-1, None]).ravel()
    wk = (0.5 * (edges[1:] - edges[:-1])[:, None] * w[None, :]).ravel()
    base = wk * np.exp(-0.5 * width * width * k * k) * k / (k * k - nu) / (2 * math.pi)
    out = np.empty(d.shape, dtype=complex)
    for s in range(0, len(d), 256):
        out[s:s + 256] = j0(np.outer(d[s:s + 256], k)) @ base
    return out


@dataclass(frozen=True)
class Gaussian:
    """amplitude * exp(-|x - c|^2 / 2 width^2) / (2 pi width^2): unit mass times amplitude."""

    center: tuple
    width: float = 0.3
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if not self.width > 0:
            raise ValueError("width must be positive")

    def values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r2 = np.sum((x - np.asarray(self.center)) ** 2, axis=-1)
        return self.amplitude * np.exp(-0.5 * r2 / self.width ** 2) / (2 * math.pi * self.width ** 2)

    def free_resolvent(self, x, nu) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = np.hypot(x[..., 0] - self.center[0], x[..., 1] - self.center[1])
        return self.amplitude * gaussian_free_resolvent(d.ravel(), nu, self.width).reshape(d.shape)

    def translated(self, t) -> "Gaussian":
        return Gaussian(tuple(np.asarray(self.center) + np.asarray(t, dtype=float)), self.width, self.amplitude)

    def pair_free(self, other: "Gaussian", nu) -> complex:
        """int (R_0(nu) self)(x) other(x) dx: a Gaussian of the summed variance."""
        d = math.dist(self.center, other.center)
        s = math.hypot(self.width, other.width)
        return complex(self.amplitude * other.amplitude * gaussian_free_resolvent([d], nu, s)[0])


@dataclass(frozen=True)
class SampledFunction:
    """f given by samples on a quadrature rule: int f phi ~ sum w_j f_j phi(p_j)."""

    points: np.ndarray
    weights: np.ndarray
    samples: np.ndarray

    def values(self, x):
        raise NotImplementedError("sampled functions are only known on their rule")

    def free_resolvent(self, x, nu) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, 2)
        diff = flat[:, None, :] - np.asarray(self.points)[None, :, :]
        G = green_regularized(diff, nu, warn=False)
        out = G @ (np.asarray(self.weights) * np.asarray(self.samples))
        return out.reshape(x.shape[:-1])

    def translated(self, t) -> "SampledFunction":
        return SampledFunction(np.asarray(self.points) + np.asarray(t, dtype=float),
                               self.weights, self.samples)

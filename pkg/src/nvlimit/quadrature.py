"""Quadrature rules used by the retarded-integral and Kirchhoff evaluators.

Spheres use a product rule: Gauss-Legendre in cos(theta) crossed with a
uniform (trapezoidal, periodic) grid in phi.  The rule with ``n_theta``
polar nodes integrates spherical harmonics exactly up to degree
``2*n_theta - 1``; the ``degree`` argument below is to be read that way.
Weights carry the full surface measure, i.e. they sum to 4*pi.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .errors import ConfigurationError

MIN_SPHERE_DEGREE = 5


@lru_cache(maxsize=256)
def _gl_cached(n):
    x, w = roots_legendre(int(n))
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n, a=0.0, b=1.0):
    """Gauss-Legendre nodes/weights mapped to the interval [a, b]."""
    x, w = _gl_cached(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@lru_cache(maxsize=64)
def _sphere_rule_cached(degree):
    n_theta = max(2, (degree + 1 + 1) // 2)   # 2*n_theta - 1 >= degree
    n_phi = max(4, 2 * n_theta)
    mu, wmu = roots_legendre(n_theta)         # mu = cos(theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    mu2 = np.repeat(mu, n_phi)
    phi2 = np.tile(phi, n_theta)
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - mu2 * mu2))
    pts = np.stack(
        [sin_t * np.cos(phi2), sin_t * np.sin(phi2), mu2], axis=1
    )
    wts = np.repeat(wmu, n_phi) * wphi
    pts.setflags(write=False)
    wts.setflags(write=False)
    return pts, wts


def sphere_rule(degree):
    """Unit-sphere quadrature exact for spherical harmonics up to ``degree``.

    Returns (points, weights) with points of shape (m, 3) and
    weights summing to 4*pi.
    """
    if degree < MIN_SPHERE_DEGREE:
        raise ConfigurationError(
            f"sphere quadrature degree {degree} below minimum {MIN_SPHERE_DEGREE}"
        )
    return _sphere_rule_cached(int(degree))


@dataclass(frozen=True)
class QuadSpec:
    """Resolution knobs for the nested light-cone / momentum quadratures."""

    n_radial: int = 32
    sphere_degree: int = 29
    n_momentum: int = 8       # Gauss points per momentum axis

    def doubled(self):
        return QuadSpec(2 * self.n_radial, 2 * self.sphere_degree + 1,
                        2 * self.n_momentum)

    def validate(self):
        if self.n_radial < 2 or self.n_momentum < 2:
            raise ConfigurationError("quadrature orders below minimum (2)")
        if self.sphere_degree < MIN_SPHERE_DEGREE:
            raise ConfigurationError("sphere degree below minimum")
        return self


def momentum_box_rule(center, radius, n):
    """Tensor Gauss rule on the cube circumscribing a momentum-support ball.

    Returns (points (n^3, 3), weights (n^3,)).  The integrand is expected
    to vanish smoothly outside the inscribed ball, so the cube rule is
    spectrally accurate for the compact profiles used here.
    """
    center = np.asarray(center, dtype=float)
    axes = []
    wts = []
    for k in range(3):
        x, w = gauss_legendre(n, center[k] - radius, center[k] + radius)
        axes.append(x)
        wts.append(w)
    PX, PY, PZ = np.meshgrid(*axes, indexing="ij")
    WX, WY, WZ = np.meshgrid(*wts, indexing="ij")
    pts = np.stack([PX.ravel(), PY.ravel(), PZ.ravel()], axis=1)
    return pts, (WX * WY * WZ).ravel()


def refine_until(fn, spec, rtol, max_doublings=2):
    """Evaluate ``fn(spec)`` and verify convergence by order doubling.

    Returns the refined value; raises AccuracyError when the doubling
    change stays above ``rtol`` relative after ``max_doublings`` rounds.
    """
    from .errors import AccuracyError

    coarse = fn(spec)
    for _ in range(max_doublings):
        spec = spec.doubled()
        fine = fn(spec)
        scale = max(abs(fine), abs(coarse), 1e-300)
        if abs(fine - coarse) <= rtol * scale:
            return fine
        coarse = fine
    raise AccuracyError(
        f"quadrature not converged: last doubling change {abs(fine - coarse):.3e} "
        f"exceeds rtol={rtol:.1e}"
    )

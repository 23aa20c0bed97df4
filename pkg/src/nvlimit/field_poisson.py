"""Free-space Newtonian potential via Hockney-Eastwood zero-padded convolution.

The potential solved here is U = -(G_kernel) * rho (attractive sign), so the
discrete Laplacian of U reproduces 4*pi*rho and U -> 0 at infinity, which is
the isolated-system boundary condition.

Two Green kernels are available:

* "lattice" (default): the free-space lattice Green's function of the same
  7-point Laplacian the wave solver uses, so Lap_h U = 4*pi*rho holds to
  quadrature accuracy and the quasi-static limit of the wave run and the
  Poisson reference share one discrete operator.  Computed from
  g(n) = int_0^inf e^{-6t} I_{n1}(2t) I_{n2}(2t) I_{n3}(2t) dt, which decays
  to 1/(4*pi*|n|), i.e. the kernel still carries the physical 1/r tail.
* "1/r": tabulated 1/r with the r=0 value replaced by the cell-averaged
  1/r integral (the textbook regularization; second-order consistent).
"""

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft
from scipy.special import erf, ive, roots_legendre

from .errors import ConfigurationError, RejectedInputError, SupportViolationError
from .grids import Grid3, GridSpec, gradient
from .transfer import deposit_cic

# integral of 1/|u| over the unit cube centered at the origin
CELL_AVG_INV_R = 2.380077363979553


def lattice_green_table(nmax):
    """g(i,j,k) on [0..nmax]^3 with Lap_1 g = -delta and g -> 1/(4*pi*r).

    Gauss-Legendre in log t over [1e-10, 4e6] plus the analytic erf tail of
    the (4*pi*t)^{-3/2} exp(-r^2/4t) asymptote.
    """
    T = 4.0e6
    u, wu = roots_legendre(1200)
    lo, hi = np.log(1e-10), np.log(T)
    uu = lo + 0.5 * (hi - lo) * (u + 1.0)
    ww = 0.5 * (hi - lo) * wu
    t = np.exp(uu)
    orders = np.arange(nmax + 1)
    tab = ive(orders[:, None], 2.0 * t[None, :])
    g = np.einsum("q,aq,bq,cq->abc", ww * t, tab, tab, tab, optimize=True)
    I, J, K = np.meshgrid(orders, orders, orders, indexing="ij")
    a = (I * I + J * J + K * K).astype(float) / 4.0
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = (4.0 * np.pi) ** -1.5 * np.sqrt(np.pi) * erf(np.sqrt(a / T)) / np.sqrt(a)
    tail[0, 0, 0] = (4.0 * np.pi) ** -1.5 * 2.0 / np.sqrt(T)
    return g + tail


@dataclass
class NewtonianField:
    """Gridded Newtonian potential and its centered-difference gradient."""

    spec: GridSpec
    U: np.ndarray
    gradU: list
    t: float = 0.0


class FreeSpacePoisson:
    """Caches the padded Green-kernel transform for one grid geometry."""

    def __init__(self, spec, kernel="lattice"):
        self.spec = spec
        self.kernel = kernel
        n, h = spec.n, spec.h
        m = 2 * n
        idx = np.minimum(np.arange(m), m - np.arange(m))
        IX, IY, IZ = np.meshgrid(idx, idx, idx, indexing="ij")
        if kernel == "lattice":
            kern = (4.0 * np.pi / h) * lattice_green_table(n)[IX, IY, IZ]
        elif kernel == "1/r":
            r = h * np.sqrt((IX * IX + IY * IY + IZ * IZ).astype(float))
            kern = np.empty_like(r)
            nz = r > 0
            kern[nz] = 1.0 / r[nz]
            kern[~nz] = CELL_AVG_INV_R / h
        else:
            raise ConfigurationError(f"unknown Poisson kernel {kernel!r}")
        self._kern_hat = sfft.rfftn(kern, workers=1)
        self._m = m

    def potential(self, rho):
        """U = -(1/r) * rho for a density array on this solver's grid."""
        n, h = self.spec.n, self.spec.h
        pad = np.zeros((self._m,) * 3)
        pad[:n, :n, :n] = rho
        conv = sfft.irfftn(sfft.rfftn(pad, workers=1) * self._kern_hat,
                           s=(self._m,) * 3, workers=1)
        return -(h ** 3) * conv[:n, :n, :n]


_SOLVERS = {}


def _solver_for(spec, kernel):
    key = (spec.n, spec.h, spec.origin, kernel)
    if key not in _SOLVERS:
        _SOLVERS[key] = FreeSpacePoisson(spec, kernel)
    return _SOLVERS[key]


def poisson_solve(rho, t=0.0, kernel="lattice"):
    """Solve the isolated-system Poisson problem for a Grid3 density.

    Returns a NewtonianField with U <= 0 wherever rho >= 0 and gradU by
    second-order centered differences.
    """
    spec = rho.spec
    data = rho.data
    if data.min() < -1e-9 * max(data.max(), 1e-300):
        raise RejectedInputError("density must be nonnegative")
    _check_support_inside(spec, data)
    U = _solver_for(spec, kernel).potential(data)
    return NewtonianField(spec=spec, U=U, gradU=gradient(U, spec.h), t=t)


def _check_support_inside(spec, data):
    n = spec.n
    shell = np.concatenate([
        data[0].ravel(), data[n - 1].ravel(),
        data[:, 0].ravel(), data[:, n - 1].ravel(),
        data[:, :, 0].ravel(), data[:, :, n - 1].ravel(),
    ])
    if np.any(shell != 0.0):
        raise SupportViolationError("source mass touches the grid boundary")


def deposit_density(ens, spec):
    """Plain-weight CIC density rho = integral of f dp (no relativistic factor)."""
    return Grid3(spec, deposit_cic(spec, ens.x if ens.n else None, ens.w))


def gsharp_from_fin(ens, spec):
    """Newtonian potential of the initial ensemble: the wave field's datum.

    Returns the grid of -(1/|x|) * rho_in; the caller scales by 1/c^2.
    """
    rho = deposit_density(ens, spec)
    if ens.n == 0:
        return Grid3(spec, np.zeros(spec.shape))
    return Grid3(spec, poisson_solve(rho).U)

"""Cell-centered cubic grids and the raw-float64 snapshot format.

A snapshot is a pair of files: ``<base>.f64`` holding the field data as
little-endian IEEE-754 float64 in row-major (C) order, and ``<base>.json``
holding the sidecar metadata {n, h, origin, t, c}.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, RejectedInputError

MIN_GRID_N = 8


@dataclass(frozen=True)
class GridSpec:
    """Geometry of an n^3 cell-centered cube: node i sits at origin + i*h."""

    n: int
    h: float
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.n < MIN_GRID_N:
            raise ConfigurationError(f"grid n={self.n} below minimum {MIN_GRID_N}")
        if not (self.h > 0.0):
            raise ConfigurationError("grid spacing must be positive")
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))

    @classmethod
    def centered(cls, n, half_width):
        """Cube [-W, W]^3 with n cells per axis, nodes at cell centers."""
        h = 2.0 * half_width / n
        return cls(n=n, h=h, origin=(-half_width + 0.5 * h,) * 3)

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    def axis(self, k):
        return self.origin[k] + self.h * np.arange(self.n)

    def nodes(self):
        """All node coordinates, shape (n, n, n, 3)."""
        ax = [self.axis(k) for k in range(3)]
        X, Y, Z = np.meshgrid(*ax, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    def contains(self, pts, margin_cells=0):
        """True where pts lie in the interpolable region minus margin."""
        pts = np.asarray(pts, dtype=float)
        lo = np.asarray(self.origin) + margin_cells * self.h
        hi = np.asarray(self.origin) + (self.n - 1 - margin_cells) * self.h
        return np.all((pts >= lo) & (pts <= hi), axis=-1)


@dataclass
class Grid3:
    """A scalar field sampled on a GridSpec."""

    spec: GridSpec
    data: np.ndarray = None

    def __post_init__(self):
        if self.data is None:
            self.data = np.zeros(self.spec.shape)
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != self.spec.shape:
            raise ConfigurationError(
                f"grid data shape {self.data.shape} != {self.spec.shape}"
            )

    def copy(self):
        return Grid3(self.spec, self.data.copy())

    def check_finite(self):
        if not np.all(np.isfinite(self.data)):
            raise RejectedInputError("grid holds non-finite values")
        return self


def laplacian(data, h):
    """7-point Laplacian; returns an array of the same shape, zero on faces."""
    out = np.zeros_like(data)
    inv_h2 = 1.0 / (h * h)
    c = data[1:-1, 1:-1, 1:-1]
    out[1:-1, 1:-1, 1:-1] = (
        data[2:, 1:-1, 1:-1] + data[:-2, 1:-1, 1:-1]
        + data[1:-1, 2:, 1:-1] + data[1:-1, :-2, 1:-1]
        + data[1:-1, 1:-1, 2:] + data[1:-1, 1:-1, :-2]
        - 6.0 * c
    ) * inv_h2
    return out


def laplacian_periodic(data, h):
    out = -6.0 * data.copy()
    for ax in range(3):
        out += np.roll(data, 1, axis=ax) + np.roll(data, -1, axis=ax)
    return out / (h * h)


def gradient(data, h):
    """Centered-difference gradient (one-sided on faces); list of 3 arrays."""
    return list(np.gradient(data, h, edge_order=2))


def save_snapshot(base_path, grid, t, c):
    """Write <base>.f64 (little-endian, row-major) and <base>.json sidecar."""
    data = np.ascontiguousarray(grid.data, dtype="<f8")
    with open(base_path + ".f64", "wb") as f:
        f.write(data.tobytes(order="C"))
    sidecar = {
        "n": grid.spec.n,
        "h": grid.spec.h,
        "origin": list(grid.spec.origin),
        "t": float(t),
        "c": float(c),
    }
    with open(base_path + ".json", "w") as f:
        json.dump(sidecar, f, indent=1, sort_keys=True)
        f.write("\n")


def load_snapshot(base_path):
    """Read a snapshot pair; returns (Grid3, t, c)."""
    with open(base_path + ".json") as f:
        meta = json.load(f)
    n = int(meta["n"])
    raw = np.fromfile(base_path + ".f64", dtype="<f8")
    if raw.size != n ** 3:
        raise ConfigurationError(
            f"snapshot payload {raw.size} values, expected {n ** 3}"
        )
    spec = GridSpec(n=n, h=float(meta["h"]), origin=tuple(meta["origin"]))
    grid = Grid3(spec, raw.reshape(spec.shape).astype(float))
    return grid, float(meta["t"]), float(meta["c"])

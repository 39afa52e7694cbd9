"""Direction grids on the unit sphere with quadrature weights.

Azimuth is measured counter-clockwise from +x towards +y, elevation from the
horizontal plane towards +z.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import lebedev_rule

from .errors import ConfigError

FOUR_PI = 4.0 * np.pi

# degrees of precision available from scipy's Lebedev tables
# rules 13, 25 and 27 carry negative weights and are skipped
LEBEDEV_DEGREES = (3, 5, 7, 9, 11, 15, 17, 19, 21, 23, 29, 31, 35,
                   41, 47, 53, 59, 65, 71, 77, 83, 89, 95, 101, 107, 113, 119,
                   125, 131)


def cart2sph(x, y, z):
    """Cartesian -> (azimuth in [0, 2pi), elevation, radius)."""
    x, y, z = np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)
    r = np.sqrt(x * x + y * y + z * z)
    rho = np.hypot(x, y)
    azi = np.mod(np.arctan2(y, x), 2 * np.pi)
    # the pole carries azimuth 0 by convention
    azi = np.where(rho <= 1e-12 * np.maximum(r, 1e-300), 0.0, azi)
    ele = np.arctan2(z, rho)
    return azi, ele, r


def sph2cart(azi, ele, r=1.0):
    azi, ele = np.asarray(azi, float), np.asarray(ele, float)
    return (r * np.cos(ele) * np.cos(azi),
            r * np.cos(ele) * np.sin(azi),
            r * np.sin(ele))


@dataclass(frozen=True, eq=False)
class DirectionGrid:
    """Set of directions with quadrature weights summing to 4*pi."""

    azimuths: np.ndarray
    elevations: np.ndarray
    weights: np.ndarray
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        azi = np.mod(np.atleast_1d(np.asarray(self.azimuths, float)), 2 * np.pi)
        ele = np.atleast_1d(np.asarray(self.elevations, float))
        w = np.atleast_1d(np.asarray(self.weights, float))
        if not (azi.ndim == ele.ndim == w.ndim == 1):
            raise ConfigError("grid arrays must be one-dimensional")
        if not (len(azi) == len(ele) == len(w)) or len(azi) == 0:
            raise ConfigError("azimuths, elevations and weights must have equal, "
                              "nonzero length")
        if np.any(np.abs(ele) > np.pi / 2 + 1e-12):
            raise ConfigError("elevations must lie in [-pi/2, pi/2]")
        if np.any(w <= 0):
            raise ConfigError("quadrature weights must be strictly positive")
        if abs(w.sum() - FOUR_PI) > 1e-6 * FOUR_PI:
            raise ConfigError(f"quadrature weights sum to {w.sum():.9g}, "
                              "expected 4*pi")
        for name, arr in (("azimuths", azi), ("elevations", ele), ("weights", w)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_dirs(self) -> int:
        return len(self.weights)

    def __len__(self):
        return self.n_dirs

    def cartesian(self) -> np.ndarray:
        """Unit vectors, shape (n_dirs, 3)."""
        return np.stack(sph2cart(self.azimuths, self.elevations), axis=-1)

    def rotated(self, rotation: np.ndarray) -> "DirectionGrid":
        """Grid with every direction mapped through a 3x3 rotation."""
        xyz = self.cartesian() @ np.asarray(rotation, float).T
        azi, ele, _ = cart2sph(*xyz.T)
        return DirectionGrid(azi, ele, self.weights, name=self.name + "-rot")

    def nearest(self, azi, ele) -> np.ndarray:
        """Index of the grid direction with the largest dot product.

        Ties resolve to the lower index.
        """
        q = np.stack(sph2cart(np.atleast_1d(azi), np.atleast_1d(ele)), axis=-1)
        return np.argmax(q @ self.cartesian().T, axis=-1)

    # constructors -----------------------------------------------------------

    @classmethod
    def from_cartesian(cls, xyz, weights=None, name="custom") -> "DirectionGrid":
        xyz = np.atleast_2d(np.asarray(xyz, float))
        azi, ele, _ = cart2sph(xyz[:, 0], xyz[:, 1], xyz[:, 2])
        if weights is None:
            weights = np.full(len(azi), FOUR_PI / len(azi))
        return cls(azi, ele, weights, name=name)

    @classmethod
    def single(cls, azimuth=0.0, elevation=0.0) -> "DirectionGrid":
        return cls([azimuth], [elevation], [FOUR_PI], name="single")

    @classmethod
    def lebedev(cls, degree: int) -> "DirectionGrid":
        """Smallest Lebedev rule integrating polynomials up to ``degree`` exactly."""
        for d in LEBEDEV_DEGREES:
            if d >= degree:
                xyz, w = lebedev_rule(d)
                return cls.from_cartesian(xyz.T, w, name=f"lebedev{xyz.shape[1]}")
        raise ConfigError(f"no Lebedev rule of degree >= {degree}")

    @classmethod
    def for_order(cls, order: int) -> "DirectionGrid":
        """Lebedev grid exact for products of two order-``order`` harmonics."""
        return cls.lebedev(max(2 * order, 1))

    @classmethod
    def gauss(cls, order: int) -> "DirectionGrid":
        """Gauss-Legendre x equiangular grid, exact to degree 2*order."""
        n_ele = order + 1
        n_azi = 2 * order + 2
        x, wx = np.polynomial.legendre.leggauss(n_ele)
        ele = np.arcsin(x)
        azi = np.arange(n_azi) * 2 * np.pi / n_azi
        A, E = np.meshgrid(azi, ele)
        W = np.outer(wx, np.full(n_azi, 2 * np.pi / n_azi))
        return cls(A.ravel(), E.ravel(), W.ravel(), name=f"gauss{order}")

    @classmethod
    def fibonacci(cls, n: int) -> "DirectionGrid":
        i = np.arange(n) + 0.5
        z = 1 - 2 * i / n
        azi = np.mod(np.pi * (1 + 5 ** 0.5) * i, 2 * np.pi)
        return cls(azi, np.arcsin(z), np.full(n, FOUR_PI / n), name=f"fibonacci{n}")

    @classmethod
    def em32(cls) -> "DirectionGrid":
        """32 capsules on icosahedron + dodecahedron vertices."""
        phi = (1 + 5 ** 0.5) / 2
        pts = []
        for a in (-1, 1):
            for b in (-phi, phi):
                pts += [(0, a, b), (a, b, 0), (b, 0, a)]
        for a in (-1, 1):
            for b in (-1, 1):
                for c in (-1, 1):
                    pts.append((a, b, c))
        for a in (-1 / phi, 1 / phi):
            for b in (-phi, phi):
                pts += [(0, a, b), (a, b, 0), (b, 0, a)]
        xyz = np.array(pts, float)
        xyz /= np.linalg.norm(xyz, axis=1, keepdims=True)
        return cls.from_cartesian(xyz, name="em32")

    @classmethod
    def capsules(cls, n: int) -> "DirectionGrid":
        return cls.em32() if n == 32 else cls.fibonacci(n)

    def same_directions(self, other: "DirectionGrid", tol=1e-9) -> bool:
        if self.n_dirs != other.n_dirs:
            return False
        return bool(np.max(np.abs(self.cartesian() - other.cartesian())) <= tol)

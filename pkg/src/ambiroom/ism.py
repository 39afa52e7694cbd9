"""Shoebox image-source method.

Images live on the mirror lattice indexed by integers (i, j, k); along an
axis of length L the image with index i sits at ``i*L + x`` for even i and
``i*L + L - x`` for odd i, and has hit the walls of that axis |i| times.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GeometryError
from .grids import cart2sph

__all__ = ["RoomSpec", "ImageSources", "ImageSource", "compute_images", "image_arrays",
           "image_direction", "lattice_indices"]


@dataclass(frozen=True)
class RoomSpec:
    """Shoebox room.

    ``absorption`` is an energy absorption coefficient, either one value or six
    in wall order (x=0, x=Lx, y=0, y=Ly, z=0, z=Lz).  The pressure
    reflection coefficient of a wall is ``sqrt(1 - absorption)``.
    """

    dimensions: tuple
    absorption: object = 0.4
    max_ism_order: int = 5
    fs: float = 48000.0
    c: float = 343.0
    walls: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dims = tuple(float(d) for d in np.ravel(self.dimensions))
        if len(dims) != 3 or min(dims) <= 0:
            raise GeometryError(f"room dimensions must be three positive lengths, got {dims}")
        alpha = np.broadcast_to(np.asarray(self.absorption, float), (6,)).copy() \
            if np.ndim(self.absorption) == 0 else np.asarray(self.absorption, float)
        if alpha.shape != (6,):
            raise ConfigError("absorption must be a scalar or six values")
        if np.any(alpha < 0) or np.any(alpha >= 1):
            raise ConfigError("absorption must lie in [0, 1)")
        if int(self.max_ism_order) != self.max_ism_order or self.max_ism_order < 0:
            raise ConfigError("max_ism_order must be a nonnegative integer")
        if self.fs <= 0 or self.c <= 0:
            raise ConfigError("fs and c must be positive")
        object.__setattr__(self, "dimensions", dims)
        object.__setattr__(self, "max_ism_order", int(self.max_ism_order))
        walls = np.sqrt(1.0 - alpha)
        walls.setflags(write=False)
        object.__setattr__(self, "walls", walls)

    def check_inside(self, position, what="point") -> np.ndarray:
        p = np.asarray(position, float)
        if p.shape != (3,):
            raise GeometryError(f"{what} must be a 3-vector")
        L = np.asarray(self.dimensions)
        if np.any(p <= 0) or np.any(p >= L):
            raise GeometryError(f"{what} {p.tolist()} is not strictly inside the room {list(L)}")
        return p


@dataclass(frozen=True)
class ImageSource:
    position: np.ndarray
    reflection_order: int
    amplitude: float
    distance: float
    delay_samples: float


@dataclass(frozen=True, eq=False)
class ImageSources:
    """Structure-of-arrays view of all images of one source."""

    positions: np.ndarray       # (n, 3)
    indices: np.ndarray         # (n, 3) lattice indices
    reflection_orders: np.ndarray
    amplitudes: np.ndarray
    distances: np.ndarray
    delays: np.ndarray          # fractional samples
    receiver: np.ndarray

    def __len__(self):
        return len(self.amplitudes)

    def __getitem__(self, i) -> ImageSource:
        return ImageSource(self.positions[i], int(self.reflection_orders[i]),
                           float(self.amplitudes[i]), float(self.distances[i]),
                           float(self.delays[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def directions(self):
        """Arrival (azimuth, elevation) of every image at the receiver."""
        d = self.positions - self.receiver
        azi, ele, _ = cart2sph(d[:, 0], d[:, 1], d[:, 2])
        return azi, ele


_lattice_cache: dict = {}


def lattice_indices(max_order: int) -> np.ndarray:
    """All (i, j, k) with |i|+|j|+|k| <= max_order, in lexicographic order."""
    if max_order not in _lattice_cache:
        r = np.arange(-max_order, max_order + 1)
        ijk = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
        ijk = ijk[np.abs(ijk).sum(axis=1) <= max_order]
        ijk.setflags(write=False)
        _lattice_cache[max_order] = ijk
    return _lattice_cache[max_order]


def image_arrays(room: RoomSpec, sources, receiver):
    """Vectorised core of :func:`compute_images` for several sources.

    Returns (positions, amplitudes, distances, delays) with a leading
    source axis; image order is the shared lexicographic lattice order.
    """
    src = np.stack([room.check_inside(s, "source") for s in np.reshape(sources, (-1, 3))])
    rcv = room.check_inside(receiver, "receiver")
    ijk = lattice_indices(room.max_ism_order)
    L = np.asarray(room.dimensions)
    odd = (ijk % 2).astype(bool)
    pos = ijk * L + np.where(odd, L - src[:, None, :], src[:, None, :])
    dist = np.linalg.norm(pos - rcv, axis=-1)
    amps = _lattice_gains(room)[None, :] / dist
    return pos, amps, dist, dist * (room.fs / room.c)


def _lattice_gains(room: RoomSpec) -> np.ndarray:
    ijk = lattice_indices(room.max_ism_order)
    # hits on the lower (coordinate 0) and upper wall of each axis
    upper = np.where(ijk > 0, (ijk + 1) // 2, (-ijk) // 2)
    lower = np.abs(ijk) - upper
    beta = room.walls.reshape(3, 2)
    return np.prod(beta[:, 0] ** lower * beta[:, 1] ** upper, axis=1)


def compute_images(room: RoomSpec, source, receiver) -> ImageSources:
    pos, amps, dist, delays = image_arrays(room, source, receiver)
    ijk = lattice_indices(room.max_ism_order)
    return ImageSources(
        positions=pos[0],
        indices=ijk,
        reflection_orders=np.abs(ijk).sum(axis=1),
        amplitudes=amps[0],
        distances=dist[0],
        delays=delays[0],
        receiver=np.asarray(receiver, float),
    )


def image_direction(img, receiver):
    """(azimuth, elevation) of an image as seen from ``receiver``."""
    pos = img.position if isinstance(img, ImageSource) else np.asarray(img, float)
    d = np.asarray(pos, float) - np.asarray(receiver, float)
    if np.linalg.norm(d) == 0:
        raise GeometryError("image coincides with the receiver")
    azi, ele, _ = cart2sph(*d)
    return float(azi), float(ele)

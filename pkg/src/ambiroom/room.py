"""Ambisonic room impulse responses from image sources."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .convolution import fft_convolve
from .errors import ConfigError, IncompleteSceneError
from .grids import cart2sph
from .ism import RoomSpec, image_arrays
from .sh import n_coeffs, sh_matrix
from .signal import Domain, SpatialSignal

__all__ = ["KERNEL_LENGTH", "fractional_delay_kernel", "Scene", "compute_arir",
           "compute_amb", "Room"]

KERNEL_LENGTH = 32


def kernel_centre(length: int) -> int:
    return length // 2 - 1


def fractional_delay_kernel(delay, length: int = KERNEL_LENGTH):
    """Hann-windowed sinc fractional delay.

    Returns ``(taps, offset)``: ``taps`` has shape (..., length) and tap k
    belongs at sample ``offset + k - kernel_centre(length)``, where the
    integer ``offset`` is the whole part of ``delay``.  Integer delays give a
    single unit tap at the centre, i.e. at sample ``offset``.  Taps are
    normalised to unit DC gain.
    """
    delay = np.asarray(delay, float)
    if np.any(delay < 0):
        raise ConfigError("delays must be nonnegative")
    whole = np.floor(delay)
    frac = delay - whole
    k = np.arange(length) - kernel_centre(length)
    t = k - frac[..., None]
    exact = frac[..., None] == 0
    # sin(pi (k - f)) = -(-1)^k sin(pi f): one transcendental per delay
    alt = np.where(k % 2 == 0, -1.0, 1.0)
    num = alt * np.sin(np.pi * frac)[..., None]
    sinc = num / (np.pi * np.where(exact, 1.0, t))
    # Hann window centred on the fractional position, expanded the same way
    ang = 2 * np.pi / length
    cw, sw = np.cos(ang * frac)[..., None], np.sin(ang * frac)[..., None]
    win = 0.5 * (1 + np.cos(ang * k) * cw + np.sin(ang * k) * sw)
    win = np.where(np.abs(t) < length / 2, win, 0.0)
    taps = sinc * win
    taps /= np.where(exact, 1.0, taps.sum(axis=-1, keepdims=True))
    taps = np.where(exact, (k == 0).astype(float), taps)
    return taps, whole.astype(np.int64)


@dataclass
class Scene:
    room: RoomSpec
    receiver: np.ndarray
    sources: list = field(default_factory=list)   # [(position, signal or None)]
    sh_order: int = 3
    kernel_length: int = KERNEL_LENGTH

    def __post_init__(self):
        self.receiver = self.room.check_inside(self.receiver, "receiver")
        if self.sh_order < 0:
            raise ConfigError("sh_order must be nonnegative")

    def add_source(self, position, signal=None):
        pos = self.room.check_inside(position, "source")
        if signal is not None:
            signal = np.asarray(signal, float)
            if signal.ndim != 1:
                raise ConfigError("dry signals must be one-dimensional")
        self.sources.append((pos, signal))
        return self


def compute_arir(scene: Scene, sh_order: int | None = None,
                 mixed: bool = False) -> SpatialSignal:
    """ARIRs of all sources, SH/TIME domain.

    Shape (n_sources, (N+1)**2, T), or (1, (N+1)**2, T) with ``mixed=True``
    where all sources are summed into one response.  Every image adds
    ``a_i * Y(dir_i) * kernel(delay_i)``; all images of all sources are
    accumulated by one sparse product.  Kernel taps that would land before
    t=0 are dropped.
    """
    if not scene.sources:
        raise IncompleteSceneError("scene has no sources")
    order = scene.sh_order if sh_order is None else sh_order
    pos, amps, _, delays = image_arrays(scene.room, [p for p, _ in scene.sources],
                                        scene.receiver)
    n_src, n_img = amps.shape
    L = scene.kernel_length
    T = int(np.ceil(delays.max())) + L + 1

    d = (pos - scene.receiver).reshape(-1, 3)
    azi, ele, _ = cart2sph(d[:, 0], d[:, 1], d[:, 2])
    taps, offset = fractional_delay_kernel(delays.ravel(), L)
    cols = offset[:, None] + (np.arange(L) - kernel_centre(L))
    keep = (cols >= 0) & (taps != 0)
    rows = np.broadcast_to(np.arange(n_src * n_img)[:, None], cols.shape)
    n_out = 1 if mixed else n_src
    if not mixed:
        cols = cols + (np.arange(n_src).repeat(n_img) * T)[:, None]
    S = sparse.csr_matrix((taps[keep], (rows[keep], cols[keep])),
                          shape=(n_src * n_img, n_out * T))
    weighted = sh_matrix(order, azi, ele) * amps.reshape(-1, 1)   # (images, C)
    arir = np.asarray(S.T @ weighted)                              # (n_out*T, C)
    arir = arir.reshape(n_out, T, n_coeffs(order)).transpose(0, 2, 1)
    return SpatialSignal(np.ascontiguousarray(arir), scene.room.fs, Domain.TIME,
                         Domain.SH, sh_order=order)


def compute_amb(scene: Scene, sh_order: int | None = None,
                arir: SpatialSignal | None = None) -> SpatialSignal:
    """Ambisonic scene: each source's dry signal through its ARIR, summed."""
    missing = [i for i, (_, s) in enumerate(scene.sources) if s is None]
    if missing:
        raise IncompleteSceneError(f"sources {missing} have no dry signal")
    if arir is None:
        arir = compute_arir(scene, sh_order)
    T = arir.n_frames
    n_dry = max(len(s) for _, s in scene.sources)
    out = np.zeros((arir.n_spatial, T + n_dry - 1))
    for k, (_, dry) in enumerate(scene.sources):
        y = fft_convolve(arir.data[k], dry[None, :])
        out[:, :y.shape[-1]] += y
    return SpatialSignal(out[None], arir.fs, Domain.TIME, Domain.SH,
                         sh_order=arir.sh_order)


class Room:
    """Convenience builder mirroring the quick-start workflow.

    >>> room = Room(dimensions=[6, 5, 3], absorption=0.4, max_ism_order=5,
    ...             sh_order=3, fs=48000)
    >>> room.add_source([4, 4, 1.5])
    >>> room.set_receiver([2, 2, 1.5])
    >>> room.compute_arir().data.shape[:2]
    (1, 16)
    """

    def __init__(self, dimensions, absorption=0.4, max_ism_order=5, sh_order=3,
                 fs=48000, c=343.0, kernel_length=KERNEL_LENGTH):
        self.spec = RoomSpec(tuple(dimensions), absorption, max_ism_order, fs, c)
        self.sh_order = int(sh_order)
        self.kernel_length = kernel_length
        self.receiver = None
        self._sources = []

    def add_source(self, position, signal=None):
        pos = self.spec.check_inside(position, "source")
        self._sources.append((pos, None if signal is None else np.asarray(signal, float)))

    def set_receiver(self, position):
        self.receiver = self.spec.check_inside(position, "receiver")

    @property
    def scene(self) -> Scene:
        if self.receiver is None:
            raise IncompleteSceneError("receiver not set")
        return Scene(self.spec, self.receiver, list(self._sources), self.sh_order,
                     self.kernel_length)

    def compute_arir(self, mixed: bool = False) -> SpatialSignal:
        return compute_arir(self.scene, mixed=mixed)

    def compute_amb(self) -> SpatialSignal:
        return compute_amb(self.scene)

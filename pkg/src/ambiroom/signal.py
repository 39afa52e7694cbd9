"""SpatialSignal: a (channels, spatial, frames) tensor with domain flags.

Conversions are lazy and in place: ``to_freq`` on a signal already in the
frequency domain does nothing, and every conversion returns ``self`` so calls
chain.  The frequency domain keeps only the nonnegative bins of a real FFT of
length ``nfft`` (smallest power of two >= the signal length unless given).
"""
from __future__ import annotations

import copy
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import DimensionError, FormatError, MalformedSignalError
from .grids import DirectionGrid
from .sh import n_coeffs, order_from_channels, sh_analysis, sh_synthesis, _check_grid

__all__ = ["Domain", "SpatialSignal", "next_pow2", "spectrum_weights",
           "transform_counts", "reset_transform_counts", "write_wav", "read_wav"]


class Domain(str, Enum):
    TIME = "time"
    FREQ = "freq"
    SPACE = "space"
    SH = "sh"


# forward/inverse FFTs performed by SpatialSignal conversions
transform_counts = {"forward": 0, "inverse": 0}


def reset_transform_counts():
    transform_counts["forward"] = 0
    transform_counts["inverse"] = 0


def next_pow2(n: int) -> int:
    return 1 << max(int(n) - 1, 0).bit_length()


def spectrum_weights(nfft: int) -> np.ndarray:
    """Multiplicity of each stored bin in the full two-sided spectrum."""
    w = np.full(nfft // 2 + 1, 2.0)
    w[0] = 1.0
    if nfft % 2 == 0:
        w[-1] = 1.0
    return w


def _domain(value, allowed):
    d = Domain(value)
    if d not in allowed:
        raise DimensionError(f"{d.value!r} is not one of {[a.value for a in allowed]}")
    return d


class SpatialSignal:
    """Multichannel spatial audio in one of four domain states.

    Parameters
    ----------
    data : array, shape (n_channels, n_spatial, n_frames)
        Samples (TIME) or nonnegative FFT bins (FREQ).
    fs : float
        Sample rate in Hz.
    time_domain, space_domain : Domain or str
    sh_order : int, optional
        Required when ``space_domain`` is SH; inferred from ``n_spatial`` if omitted.
    grid : DirectionGrid, optional
        Directions of the spatial axis when ``space_domain`` is SPACE.
    nfft, n_samples : int, optional
        Transform length and original signal length; ``nfft`` is mandatory
        for FREQ data.
    """

    def __init__(self, data, fs, time_domain=Domain.TIME, space_domain=Domain.SH,
                 sh_order=None, grid=None, nfft=None, n_samples=None):
        data = np.asarray(data)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3:
            raise MalformedSignalError(f"expected a 3-axis tensor, got shape {data.shape}")
        self.data = data
        self.fs = float(fs)
        self.time_domain = _domain(time_domain, (Domain.TIME, Domain.FREQ))
        self.space_domain = _domain(space_domain, (Domain.SPACE, Domain.SH))
        self.grid = grid
        self.nfft = None if nfft is None else int(nfft)
        if self.space_domain is Domain.SH:
            if sh_order is None:
                sh_order = order_from_channels(data.shape[1])
            if n_coeffs(sh_order) != data.shape[1]:
                raise DimensionError(f"order {sh_order} needs {n_coeffs(sh_order)} "
                                     f"SH channels, data has {data.shape[1]}")
        self.sh_order = sh_order
        if self.time_domain is Domain.FREQ:
            if self.nfft is None:
                raise MalformedSignalError("frequency-domain data needs its nfft")
            if data.shape[-1] != self.nfft // 2 + 1:
                raise MalformedSignalError(f"{data.shape[-1]} bins do not match "
                                           f"nfft={self.nfft}")
            self.n_samples = self.nfft if n_samples is None else int(n_samples)
        else:
            self.n_samples = data.shape[-1]

    # shape helpers -----------------------------------------------------------

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_spatial(self) -> int:
        return self.data.shape[1]

    @property
    def n_frames(self) -> int:
        return self.data.shape[2]

    @property
    def freqs(self) -> np.ndarray:
        if self.time_domain is not Domain.FREQ:
            raise MalformedSignalError("frequency axis only exists in the FREQ domain")
        return np.fft.rfftfreq(self.nfft, 1 / self.fs)

    def copy(self) -> "SpatialSignal":
        new = copy.copy(self)
        new.data = self.data.copy()
        return new

    clone = copy

    def __repr__(self):
        order = f", N={self.sh_order}" if self.space_domain is Domain.SH else ""
        return (f"SpatialSignal({self.n_channels}x{self.n_spatial}x{self.n_frames}, "
                f"{self.space_domain.value}/{self.time_domain.value}{order}, fs={self.fs:g})")

    # time <-> frequency ----------------------------------------------------

    def to_freq(self, nfft: int | None = None) -> "SpatialSignal":
        if self.time_domain is Domain.FREQ:
            if nfft is None or nfft == self.nfft:
                return self
            self.to_time()
        n = self.data.shape[-1]
        nfft = next_pow2(n) if nfft is None else int(nfft)
        if nfft < n:
            raise DimensionError(f"nfft={nfft} shorter than the signal ({n})")
        self.data = np.fft.rfft(self.data, n=nfft, axis=-1)
        transform_counts["forward"] += 1
        self.nfft = nfft
        self.n_samples = n
        self.time_domain = Domain.FREQ
        return self

    def to_time(self) -> "SpatialSignal":
        if self.time_domain is Domain.TIME:
            return self
        if not self.nfft:
            raise MalformedSignalError("cannot invert a spectrum without its nfft")
        x = np.fft.irfft(self.data, n=self.nfft, axis=-1)
        transform_counts["inverse"] += 1
        self.data = x[..., :self.n_samples]
        self.time_domain = Domain.TIME
        return self

    # space <-> SH ---------------------------------------------------------------

    def to_sh(self, order: int | None = None, grid: DirectionGrid | None = None):
        if self.space_domain is Domain.SH:
            if order is not None and order != self.sh_order:
                raise DimensionError(f"signal is already order {self.sh_order}")
            return self
        grid = grid or self.grid
        if grid is None:
            raise DimensionError("SPACE -> SH needs a direction grid")
        if order is None:
            raise DimensionError("SPACE -> SH needs a target order")
        _check_grid(grid, order)
        self.data = sh_analysis(self.data, grid, order, axis=1)
        self.space_domain = Domain.SH
        self.sh_order = order
        self.grid = grid
        return self

    def to_space(self, grid: DirectionGrid | None = None) -> "SpatialSignal":
        if self.space_domain is Domain.SPACE:
            if grid is not None and self.grid is not None and grid is not self.grid:
                raise DimensionError("signal is already sampled on another grid")
            return self
        grid = grid or self.grid
        if grid is None:
            raise DimensionError("SH -> SPACE needs a target grid")
        self.data = sh_synthesis(self.data, grid, axis=1)
        self.space_domain = Domain.SPACE
        self.grid = grid
        return self

    # quick-start spelling
    toTime = to_time
    toFreq = to_freq
    toSH = to_sh
    toSpace = to_space

    # io ----------------------------------------------------------------------

    def to_wav(self, path) -> None:
        write_wav(path, self)


def transform_time_freq(sig: SpatialSignal, target) -> SpatialSignal:
    target = Domain(target)
    return sig.to_freq() if target is Domain.FREQ else sig.to_time()


def transform_space_sh(sig: SpatialSignal, target, order=None, grid=None) -> SpatialSignal:
    target = Domain(target)
    return sig.to_sh(order, grid) if target is Domain.SH else sig.to_space(grid)


def write_wav(path, sig: SpatialSignal) -> None:
    """32-bit float WAV, one file channel per (spatial, channel) pair.

    Interleaving is spatial-major: file channel ``s * n_channels + c``
    holds spatial index ``s`` of signal channel ``c``.
    """
    if sig.time_domain is not Domain.TIME:
        raise MalformedSignalError("only time-domain signals can be written")
    frames = np.transpose(sig.data, (1, 0, 2)).reshape(-1, sig.n_frames)
    wavfile.write(str(Path(path)), int(round(sig.fs)), frames.T.astype("<f4"))


def read_wav(path, n_channels=1, space_domain=Domain.SPACE, sh_order=None,
             grid=None) -> SpatialSignal:
    """Inverse of :func:`write_wav`; mono files read as (1, 1, T)."""
    try:
        fs, x = wavfile.read(str(Path(path)))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if x.dtype.kind in "iu":
        x = x.astype(float) / float(np.iinfo(x.dtype).max)
    x = np.asarray(x, float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] % n_channels:
        raise FormatError(f"{x.shape[1]} file channels not divisible by {n_channels}")
    data = x.T.reshape(x.shape[1] // n_channels, n_channels, -1).transpose(1, 0, 2)
    return SpatialSignal(np.ascontiguousarray(data), fs, Domain.TIME, space_domain,
                         sh_order=sh_order, grid=grid)

"""HRTF sets, SH projection (least squares and MagLS) and the binary container.

Container layout, little-endian::

    "SHRM" | u32 version=1 | u32 fs | u32 n_dirs | u32 taps
    f64 azimuths[n_dirs] | f64 elevations[n_dirs] | f64 weights[n_dirs]
    f32 irs[n_dirs][2][taps]        (left ear first)
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.signal import resample_poly

from .errors import ConfigError, DimensionError, FormatError
from .grids import DirectionGrid
from .sh import _check_grid, n_coeffs, sh_matrix
from .signal import next_pow2

__all__ = ["HrtfSet", "ShHrtf", "load_hrtf", "dump_hrtf", "load_file", "save_file",
           "resample_hrtf", "project_ls", "magls", "magls_hrtf", "ls_hrtf",
           "default_crossover", "MAGIC", "VERSION"]

MAGIC = b"SHRM"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")

# crossover frequencies of the published MagLS configurations
DEFAULT_CROSSOVER = {1: 1200.0, 3: 2000.0, 5: 3500.0, 7: 4800.0, 9: 5000.0}


def default_crossover(order: int, c: float = 343.0, head_radius: float = 0.085) -> float:
    """MagLS crossover for ``order``: table value, else N c / (2 pi a) clamped."""
    if order in DEFAULT_CROSSOVER:
        return DEFAULT_CROSSOVER[order]
    return float(np.clip(order * c / (2 * np.pi * head_radius), 1200.0, 5000.0))


@dataclass(eq=False)
class HrtfSet:
    """Measured (or synthetic) HRIRs on a direction grid.

    ``irs`` has shape (n_dirs, 2, taps); ear 0 is the left ear.
    """

    grid: DirectionGrid
    irs: np.ndarray
    fs: float

    def __post_init__(self):
        self.irs = np.asarray(self.irs, float)
        if self.irs.ndim != 3 or self.irs.shape[1] != 2:
            raise DimensionError(f"irs must have shape (n_dirs, 2, taps), got {self.irs.shape}")
        if self.irs.shape[0] != self.grid.n_dirs:
            raise DimensionError(f"{self.irs.shape[0]} HRIRs for {self.grid.n_dirs} directions")
        if self.irs.shape[2] == 0:
            raise DimensionError("HRIRs must have at least one tap")
        if self.fs <= 0:
            raise ConfigError("fs must be positive")

    @property
    def n_dirs(self) -> int:
        return self.grid.n_dirs

    @property
    def taps(self) -> int:
        return self.irs.shape[2]

    def resample(self, desired_fs: float) -> "HrtfSet":
        """Resample in place (quick-start spelling); returns self."""
        new = resample_hrtf(self, desired_fs)
        self.irs, self.fs = new.irs, new.fs
        return self

    def spectra(self, nfft: int | None = None) -> np.ndarray:
        nfft = nfft or next_pow2(self.taps)
        return np.fft.rfft(self.irs, n=nfft, axis=-1)


@dataclass(eq=False)
class ShHrtf:
    """SH-domain HRTF coefficients, shape ((N+1)**2, 2, nfft//2 + 1)."""

    coeffs: np.ndarray
    order: int
    fs: float
    nfft: int
    mode: str = "ls"
    fc: float | None = None

    def __post_init__(self):
        if self.coeffs.shape[0] != n_coeffs(self.order) or self.coeffs.shape[1] != 2:
            raise DimensionError(f"coefficients of shape {self.coeffs.shape} do not "
                                 f"match order {self.order}")
        if self.coeffs.shape[2] != self.nfft // 2 + 1:
            raise DimensionError("coefficient bins do not match nfft")

    @property
    def freqs(self) -> np.ndarray:
        return np.fft.rfftfreq(self.nfft, 1 / self.fs)

    def truncate(self, order: int) -> "ShHrtf":
        if order > self.order:
            raise DimensionError(f"cannot raise an order-{self.order} HRTF to order {order}")
        if order == self.order:
            return self
        return ShHrtf(self.coeffs[:n_coeffs(order)], order, self.fs, self.nfft,
                      self.mode, self.fc)

    def filters(self) -> np.ndarray:
        """Time-domain SH filters, shape ((N+1)**2, 2, nfft)."""
        return np.fft.irfft(self.coeffs, n=self.nfft, axis=-1)

    def synthesize(self, grid: DirectionGrid) -> np.ndarray:
        """HRTF spectra at arbitrary directions, shape (n_dirs, 2, bins)."""
        Y = sh_matrix(self.order, grid.azimuths, grid.elevations)
        return np.einsum("pc,ceb->peb", Y, self.coeffs)


# ---------------------------------------------------------------------------
# container

def dump_hrtf(hrtf: HrtfSet) -> bytes:
    g = hrtf.grid
    if float(hrtf.fs) != int(hrtf.fs):
        raise FormatError("the container stores integer sample rates only")
    parts = [
        _HEADER.pack(MAGIC, VERSION, int(hrtf.fs), g.n_dirs, hrtf.taps),
        np.asarray(g.azimuths, "<f8").tobytes(),
        np.asarray(g.elevations, "<f8").tobytes(),
        np.asarray(g.weights, "<f8").tobytes(),
        np.asarray(hrtf.irs, "<f4").tobytes(),
    ]
    return b"".join(parts)


def load_hrtf(blob: bytes) -> HrtfSet:
    """Parse a container; raises FormatError naming the failing byte offset."""
    blob = bytes(blob)
    if len(blob) < _HEADER.size:
        raise FormatError("truncated header", offset=len(blob))
    magic, version, fs, n_dirs, taps = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    if fs == 0:
        raise FormatError("zero sample rate", offset=8)
    if n_dirs == 0:
        raise FormatError("zero directions", offset=12)
    if taps == 0:
        raise FormatError("zero taps", offset=16)
    off = _HEADER.size
    arrays = []
    for name, dtype, count in (("azimuths", "<f8", n_dirs), ("elevations", "<f8", n_dirs),
                               ("weights", "<f8", n_dirs), ("irs", "<f4", n_dirs * 2 * taps)):
        size = np.dtype(dtype).itemsize * count
        if off + size > len(blob):
            raise FormatError(f"truncated {name} payload", offset=len(blob))
        arrays.append(np.frombuffer(blob, dtype, count, off).astype(float))
        off += size
    if off != len(blob):
        raise FormatError(f"{len(blob) - off} trailing bytes", offset=off)
    azi, ele, w, irs = arrays
    if not np.all(np.isfinite(irs)):
        raise FormatError("non-finite HRIR samples", offset=_HEADER.size + 24 * n_dirs)
    try:
        grid = DirectionGrid(azi, ele, w)
    except ConfigError as exc:
        raise FormatError(f"invalid grid: {exc}", offset=_HEADER.size) from exc
    return HrtfSet(grid, irs.reshape(n_dirs, 2, taps), float(fs))


def save_file(path, hrtf: HrtfSet) -> None:
    Path(path).write_bytes(dump_hrtf(hrtf))


def load_file(path) -> HrtfSet:
    return load_hrtf(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# processing

def resample_hrtf(hrtf: HrtfSet, desired_fs: float) -> HrtfSet:
    """Band-limited polyphase resampling of every HRIR."""
    if desired_fs <= 0:
        raise ConfigError("desired_fs must be positive")
    if desired_fs == hrtf.fs:
        return HrtfSet(hrtf.grid, hrtf.irs.copy(), hrtf.fs)
    ratio = Fraction(desired_fs / hrtf.fs).limit_denominator(10000)
    irs = resample_poly(hrtf.irs, ratio.numerator, ratio.denominator, axis=-1)
    taps = int(np.ceil(hrtf.taps * desired_fs / hrtf.fs))
    return HrtfSet(hrtf.grid, irs[..., :taps], float(desired_fs))


class _WeightedLS:
    """Weighted least squares ``min_h sum_p w_p |y_p^T h - t_p|^2`` on a grid."""

    def __init__(self, grid: DirectionGrid, order: int):
        _check_grid(grid, order)
        self.Y = sh_matrix(order, grid.azimuths, grid.elevations)
        self.Yw = self.Y * grid.weights[:, None]
        self.gram = cho_factor(self.Y.T @ self.Yw)

    def solve(self, target):
        """``target`` has the direction axis first."""
        rhs = np.tensordot(self.Yw.T, target, axes=(1, 0))
        shape = rhs.shape
        return cho_solve(self.gram, rhs.reshape(shape[0], -1)).reshape(shape)


def _check_nfft(hrtf, nfft):
    nfft = nfft or next_pow2(hrtf.taps)
    if nfft < hrtf.taps:
        raise ConfigError(f"nfft={nfft} shorter than the HRIRs ({hrtf.taps} taps)")
    return nfft


def project_ls(hrtf: HrtfSet, order: int, nfft: int | None = None) -> ShHrtf:
    """Least-squares SH coefficients of the HRTF at every bin.

    In the real SH basis a plane wave from ``p`` has coefficients ``Y(p)``,
    so decoding ``sum_nm H_nm A_nm`` reproduces ``H(p)`` with the plain
    projection; the conjugate-symmetric (-1)^m reindexing needed for complex
    harmonics is the identity here.
    """
    nfft = _check_nfft(hrtf, nfft)
    solver = _WeightedLS(hrtf.grid, order)
    coeffs = solver.solve(hrtf.spectra(nfft))
    return ShHrtf(coeffs, order, hrtf.fs, nfft, "ls")


def magls(hrtf: HrtfSet, order: int, fc: float | None = None,
          nfft: int | None = None) -> ShHrtf:
    """Magnitude least-squares SH HRTF.

    Bins up to ``fc`` equal the LS projection.  Above it, bins are solved in
    ascending order: the phase at each direction is taken from the previous
    bin's solution, combined with the measured magnitude, and the
    weighted-LS fit of that target becomes the new solution.
    """
    nfft = _check_nfft(hrtf, nfft)
    fc = default_crossover(order) if fc is None else float(fc)
    if not 0 < fc < hrtf.fs / 2:
        raise ConfigError(f"crossover {fc} Hz outside (0, fs/2)")
    solver = _WeightedLS(hrtf.grid, order)
    H = hrtf.spectra(nfft)
    coeffs = solver.solve(H)
    freqs = np.fft.rfftfreq(nfft, 1 / hrtf.fs)
    mag = np.abs(H)
    for k in np.flatnonzero(freqs > fc):
        if k == 0:
            continue
        phase = np.angle(solver.Y @ coeffs[:, :, k - 1])
        coeffs[:, :, k] = solver.solve(mag[:, :, k] * np.exp(1j * phase))
    return ShHrtf(coeffs, order, hrtf.fs, nfft, "magls", fc)


def magls_hrtf(hrtf: HrtfSet, sh_order: int, fc: float | None = None,
               nfft: int | None = None) -> ShHrtf:
    return magls(hrtf, sh_order, fc, nfft)


def ls_hrtf(hrtf: HrtfSet, sh_order: int, nfft: int | None = None) -> ShHrtf:
    return project_ls(hrtf, sh_order, nfft)

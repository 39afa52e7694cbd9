"""Quality metrics and a nearest-neighbour baseline renderer."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .grids import cart2sph
from .hrtf import HrtfSet
from .ism import image_arrays
from .room import Scene, compute_arir, fractional_delay_kernel, kernel_centre
from .signal import Domain, SpatialSignal, next_pow2

__all__ = ["octave_smooth", "lsd", "LsdReport", "nn_baseline_render", "sh_interp_render",
           "render_brir", "plane_wave_arir", "MAG_FLOOR"]

MAG_FLOOR = 1e-12


def octave_smooth(mag, freqs, fraction: float = 1 / 6) -> np.ndarray:
    """Fractional-octave smoothing along the last axis.

    Each bin becomes the power mean ``sqrt(mean |X|^2)`` of all bins whose
    frequency lies within +-fraction/2 octave of its own.  The DC bin is
    left as is.
    """
    mag = np.asarray(mag)
    freqs = np.asarray(freqs, float)
    if mag.shape[-1] != len(freqs):
        raise DimensionError("one frequency per bin expected")
    if np.any(np.diff(freqs) <= 0):
        raise ConfigError("frequencies must be strictly ascending")
    half = 2.0 ** (fraction / 2)
    lo = np.searchsorted(freqs, freqs / half, side="left")
    hi = np.searchsorted(freqs, freqs * half, side="right")
    dc = freqs <= 0
    lo[dc] = np.flatnonzero(dc)
    hi[dc] = lo[dc] + 1
    power = np.abs(mag) ** 2
    csum = np.concatenate([np.zeros(mag.shape[:-1] + (1,)), np.cumsum(power, axis=-1)], axis=-1)
    return np.sqrt((csum[..., hi] - csum[..., lo]) / (hi - lo))


@dataclass(frozen=True)
class LsdReport:
    lsd_left: float
    lsd_right: float
    lsd_avg: float
    f_lo: float
    f_hi: float
    smoothing: float
    # order of operations, recorded so numbers stay interpretable
    method: str = "smooth each spectrum, then difference"

    def as_dict(self):
        return asdict(self)


def _as_pair(x):
    if isinstance(x, SpatialSignal):
        if x.time_domain is not Domain.TIME:
            raise DimensionError("pass time-domain signals or raw spectra")
        x = x.data
    x = np.asarray(x)
    x = x.reshape(-1, x.shape[-1])
    if x.shape[0] != 2:
        raise DimensionError(f"expected two ears, got {x.shape[0]} channels")
    return x


def lsd(h_hat, h_ref, fs: float, f_lo: float = 200.0, f_hi: float = 20000.0,
        fraction: float = 1 / 6, spectra: bool = False, nfft: int | None = None) -> LsdReport:
    """Log-spectral distance between two binaural responses.

    Inputs are (2, T) impulse responses (or 2-ear SpatialSignals), or
    (2, n_bins) rfft spectra when ``spectra`` is true.  Both are smoothed,
    floored at 1e-12 and compared in dB; the RMS runs over the bins inside
    ``[f_lo, f_hi]``.
    """
    a, b = _as_pair(h_hat), _as_pair(h_ref)
    if spectra:
        if a.shape != b.shape:
            raise DimensionError("spectra must have the same number of bins")
        n = nfft or 2 * (a.shape[-1] - 1)
        A, B = a, b
    else:
        n = nfft or next_pow2(max(a.shape[-1], b.shape[-1]))
        A, B = np.fft.rfft(a, n=n), np.fft.rfft(b, n=n)
    freqs = np.fft.rfftfreq(n, 1 / fs)
    if len(freqs) != A.shape[-1]:
        raise DimensionError("nfft does not match the number of bins")
    sa = np.maximum(octave_smooth(np.abs(A), freqs, fraction), MAG_FLOOR)
    sb = np.maximum(octave_smooth(np.abs(B), freqs, fraction), MAG_FLOOR)
    band = (freqs >= f_lo) & (freqs <= f_hi)
    if not np.any(band):
        raise ConfigError(f"no bins between {f_lo} and {f_hi} Hz")
    eps = 20 * np.log10(sa[:, band]) - 20 * np.log10(sb[:, band])
    left, right = np.sqrt(np.mean(eps ** 2, axis=-1))
    return LsdReport(float(left), float(right), float((left + right) / 2), f_lo, f_hi, fraction)


def _image_geometry(scene: Scene, rotation=None):
    """Per-image (azimuth, elevation, amplitude, delay), flattened over sources.

    ``rotation`` is the listener's head orientation; arrival directions are
    expressed in head coordinates by applying its transpose.
    """
    pos, amps, _, delays = image_arrays(scene.room, [p for p, _ in scene.sources],
                                        scene.receiver)
    d = (pos - scene.receiver).reshape(-1, 3)
    if rotation is not None:
        d = d @ np.asarray(rotation, float)
    azi, ele, _ = cart2sph(d[:, 0], d[:, 1], d[:, 2])
    return azi, ele, amps.ravel(), delays.ravel()


def nn_baseline_render(scene: Scene, hrtf: HrtfSet, rotation=None) -> SpatialSignal:
    """BRIR from image sources with nearest-neighbour HRIR selection.

    Each image contributes its amplitude times the HRIR pair of the closest
    measured direction, delayed by the image's (fractional) propagation
    delay.  All sources are summed.
    """
    if hrtf.fs != scene.room.fs:
        raise ConfigError(f"HRTF at {hrtf.fs:g} Hz, room at {scene.room.fs:g} Hz")
    azi, ele, amps, delays = _image_geometry(scene, rotation)
    nearest = hrtf.grid.nearest(azi, ele)

    L = scene.kernel_length
    seg_len = L + hrtf.taps - 1
    nfft = next_pow2(seg_len)
    taps, offset = fractional_delay_kernel(delays, L)
    # each image: delay kernel * its HRIR pair, scaled by the image amplitude
    K = np.fft.rfft(taps * amps[:, None], n=nfft)
    Hs = np.fft.rfft(hrtf.irs[nearest], n=nfft)
    seg = np.fft.irfft(K[:, None, :] * Hs, n=nfft)[..., :seg_len]
    start = offset - kernel_centre(L)
    idx = start[:, None] + np.arange(seg_len)
    n_out = int(idx.max()) + 1
    keep = idx >= 0
    brir = np.stack([np.bincount(idx[keep], weights=seg[:, e][keep], minlength=n_out)
                     for e in range(2)])
    return SpatialSignal(brir[None], scene.room.fs, Domain.TIME, Domain.SPACE)


def sh_interp_render(scene: Scene, sh_hrtf, rotation=None) -> SpatialSignal:
    """BRIR with the HRTF interpolated per image from its SH coefficients.

    Every image gets ``sum_c H_c(f) Y_c(direction)`` with its delay applied
    as a phase ramp; the spectra are summed and inverted once.  Output
    length matches the SH path (ARIR length + filter length - 1).
    """
    from .sh import sh_matrix

    if sh_hrtf.fs != scene.room.fs:
        raise ConfigError(f"HRTF at {sh_hrtf.fs:g} Hz, room at {scene.room.fs:g} Hz")
    azi, ele, amps, delays = _image_geometry(scene, rotation)
    T = int(np.ceil(delays.max())) + scene.kernel_length + 1
    n_out = T + sh_hrtf.nfft - 1
    nfft = next_pow2(n_out)
    filt = np.fft.rfft(sh_hrtf.filters(), n=nfft, axis=-1)          # (C, 2, F)
    freqs = np.fft.rfftfreq(nfft)
    Y = sh_matrix(sh_hrtf.order, azi, ele) * amps[:, None]           # (I, C)
    phase = np.exp(-2j * np.pi * np.outer(delays, freqs))             # (I, F)
    # sum_i Y[i, c] e^{-j w d_i}, then through the SH filters
    mix = Y.T @ phase                                                  # (C, F)
    brir = np.fft.irfft(np.einsum("cef,cf->ef", filt, mix), n=nfft)[:, :n_out]
    return SpatialSignal(brir[None], scene.room.fs, Domain.TIME, Domain.SPACE)


def render_brir(scene: Scene, decoder, mixed: bool = True) -> SpatialSignal:
    """SH-path BRIR: one (mixed) ARIR for all sources, decoded once."""
    arir = compute_arir(scene, sh_order=decoder.sh_order, mixed=mixed)
    return decoder.process(arir)


def plane_wave_arir(order: int, azimuth: float, elevation: float, fs: float,
                    length: int = 1) -> SpatialSignal:
    """Anechoic ARIR of a unit plane wave: ``Y(direction) * delta(t)``."""
    from .sh import sh_matrix

    data = np.zeros((1, (order + 1) ** 2, length))
    data[0, :, 0] = sh_matrix(order, [azimuth], [elevation])[0]
    return SpatialSignal(data, fs, Domain.TIME, Domain.SH, sh_order=order)

"""Analytic rigid-sphere HRTFs for dataset-free testing.

The ears are two antipodal points on a rigid sphere (left ear on +y).  The
pressure at an ear for a unit plane wave from direction ``s`` is the modal
sum ``sum_n i^n (2n+1) R_n(ka) P_n(cos theta)`` with ``R_n`` the rigid-sphere
radial term, i.e. the same radial machinery the array simulator uses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array import RIGID, PLANE_WAVE, ArraySpec, radial_coefficient
from .errors import ConfigError, GeometryError
from .grids import DirectionGrid, sph2cart
from .hrtf import HrtfSet

__all__ = ["SyntheticHrtf", "generate_synthetic_hrtf", "woodworth_itd"]


@dataclass(frozen=True)
class SyntheticHrtf:
    """Generator parameters.

    ``delay`` is the bulk delay in samples that keeps the responses causal;
    ``taper_from`` is the frequency above which the spectrum is rolled off
    with a half-cosine to zero at Nyquist, which limits ringing from the
    hard band edge.
    """

    radius: float = 0.0875
    grid_degree: int = 89          # 2702 directions
    taps: int = 256
    fs: float = 48000.0
    c: float = 343.0
    delay: float = 32.0
    taper_from: float = 20000.0

    def grid(self) -> DirectionGrid:
        return DirectionGrid.lebedev(self.grid_degree)


def _legendre_series(order: int, x: np.ndarray):
    """Yield P_0(x), P_1(x), ..., P_order(x)."""
    p_prev, p = np.ones_like(x), x
    yield p_prev
    if order >= 1:
        yield p
    for n in range(1, order):
        p_prev, p = p, ((2 * n + 1) * x * p - n * p_prev) / (n + 1)
        yield p


def ear_spectra(params: SyntheticHrtf, grid: DirectionGrid, freqs) -> np.ndarray:
    """Ear pressure (before delay and taper), shape (n_dirs, 2, n_bins)."""
    freqs = np.asarray(freqs, float)
    ka_max = 2 * np.pi * freqs.max() * params.radius / params.c
    order = int(np.ceil(ka_max)) + 20
    spec = ArraySpec(DirectionGrid.single(), params.radius, RIGID, PLANE_WAVE, order,
                     params.fs, params.c, mask=False)
    b = radial_coefficient(spec, freqs).b / (4 * np.pi)        # i^n R_n, (bins, N+1)
    src = grid.cartesian()
    ears = np.array([[0.0, 1.0, 0.0], [0.0, -1.0, 0.0]])
    cos = np.clip(src @ ears.T, -1.0, 1.0)                    # (D, 2)
    out = np.zeros(cos.shape + (len(freqs),), complex)
    for n, P in enumerate(_legendre_series(order, cos)):
        out += (2 * n + 1) * P[..., None] * b[:, n]
    return out


def generate_synthetic_hrtf(params: SyntheticHrtf | None = None, grid: DirectionGrid | None = None,
                            **overrides) -> HrtfSet:
    """Rigid-sphere HRIRs on ``grid`` (default: Lebedev, 2702 directions)."""
    params = params or SyntheticHrtf()
    if overrides:
        params = SyntheticHrtf(**{**params.__dict__, **overrides})
    if not params.radius > 0:
        raise GeometryError("head radius must be positive")
    if params.taps < 2 or not 0 <= params.delay < params.taps:
        raise ConfigError("need taps >= 2 and 0 <= delay < taps")
    grid = grid or params.grid()
    nfft = params.taps
    freqs = np.fft.rfftfreq(nfft, 1 / params.fs)
    H = ear_spectra(params, grid, freqs)
    H = H * np.exp(-2j * np.pi * freqs * params.delay / params.fs)
    nyq = params.fs / 2
    if params.taper_from < nyq:
        t = np.clip((freqs - params.taper_from) / (nyq - params.taper_from), 0, 1)
        H = H * (0.5 * (1 + np.cos(np.pi * t)))
    irs = np.fft.irfft(H, n=nfft, axis=-1)
    return HrtfSet(grid, irs, params.fs)


def woodworth_itd(azimuth, radius: float = 0.0875, c: float = 343.0):
    """Interaural time difference r (theta + sin theta) / c for a lateral angle."""
    theta = np.arcsin(np.clip(np.sin(azimuth), -1, 1))
    return radius * (theta + np.sin(theta)) / c

"""FFT convolution with an overlap-add fast path.

Overlap-add is chosen when ``8 * n_filter < n_signal``; otherwise the whole
result comes from one transform long enough for the linear convolution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .errors import ConfigError, DimensionError
from .signal import Domain, SpatialSignal, next_pow2

__all__ = ["ConvPlan", "plan_convolution", "fft_convolve", "mimo_convolve",
           "convolve", "op_counts", "reset_op_counts"]

OLA = "ola"
DIRECT = "direct"

op_counts = {"fft": 0, "ifft": 0, "products": 0}


def reset_op_counts():
    for k in op_counts:
        op_counts[k] = 0


@dataclass(frozen=True)
class ConvPlan:
    mode: str
    block: int
    nfft: int
    n_signal: int
    n_filter: int

    @property
    def n_out(self) -> int:
        return self.n_signal + self.n_filter - 1


def plan_convolution(n_signal: int, n_filter: int, mode: str | None = None) -> ConvPlan:
    """Pick DIRECT or OLA for the given lengths (``mode`` forces a choice)."""
    if mode is None:
        mode = OLA if n_filter * 8 < n_signal else DIRECT
    if mode == OLA:
        block = 4 * next_pow2(n_filter)
        return ConvPlan(OLA, block, sfft.next_fast_len(block + n_filter - 1, real=True),
                        n_signal, n_filter)
    if mode != DIRECT:
        raise ConfigError(f"unknown convolution mode {mode!r}")
    n = n_signal + n_filter - 1
    return ConvPlan(DIRECT, n_signal, sfft.next_fast_len(n, real=True), n_signal, n_filter)


def _rfft(x, n):
    op_counts["fft"] += 1
    return sfft.rfft(x, n=n, axis=-1)


def _irfft(X, n):
    op_counts["ifft"] += 1
    return sfft.irfft(X, n=n, axis=-1)


def _apply(x, h, plan: ConvPlan, product):
    """Run ``plan`` on signal ``x`` with filter ``h``.

    ``product(X, H)`` combines spectra; X carries the bin axis last, and in
    OLA mode one extra block axis just before it.
    """
    if plan.mode == DIRECT:
        Y = product(_rfft(x, plan.nfft), _rfft(h, plan.nfft))
        op_counts["products"] += 1
        return _irfft(Y, plan.nfft)[..., :plan.n_out]

    B, nfft = plan.block, plan.nfft
    n_blocks = -(-plan.n_signal // B)
    pad = n_blocks * B - plan.n_signal
    xb = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(0, pad)])
    xb = xb.reshape(x.shape[:-1] + (n_blocks, B))
    H = _rfft(h, nfft)[..., None, :]
    Y = product(_rfft(xb, nfft), H)
    op_counts["products"] += 1
    y = _irfft(Y, nfft)
    # nfft <= 2 * block, so each block spills only into its successor
    tail = nfft - B
    out = np.zeros(y.shape[:-2] + (n_blocks + 1, B))
    out[..., :n_blocks, :] = y[..., :B]
    out[..., 1:, :tail] += y[..., B:]
    out = out.reshape(y.shape[:-2] + (-1,))
    return out[..., :plan.n_out]


def fft_convolve(x, h, mode: str | None = None) -> np.ndarray:
    """Full linear convolution along the last axis, leading axes broadcast."""
    x = np.asarray(x, float)
    h = np.asarray(h, float)
    if x.shape[-1] < h.shape[-1]:
        x, h = h, x
    lead = np.broadcast_shapes(x.shape[:-1], h.shape[:-1])
    x = np.broadcast_to(x, lead + x.shape[-1:])
    plan = plan_convolution(x.shape[-1], h.shape[-1], mode)
    return _apply(x, h, plan, lambda X, H: X * H)


def mimo_convolve(x, h, mode: str | None = None) -> np.ndarray:
    """Filter-and-sum: ``y[..., o, :] = sum_i x[..., i, :] * h[o, i, :]``.

    ``x`` has shape (..., n_in, T), ``h`` (n_out, n_in, L); result
    (..., n_out, T + L - 1).
    """
    x = np.asarray(x, float)
    h = np.asarray(h, float)
    if x.shape[-2] != h.shape[1]:
        raise DimensionError(f"signal has {x.shape[-2]} inputs, filter expects {h.shape[1]}")
    plan = plan_convolution(x.shape[-1], h.shape[-1], mode)
    if plan.mode == OLA:
        # X: (..., i, b, f)  H: (o, i, 1, f)
        return _apply(x, h, plan, lambda X, H: np.einsum("...ibf,oief->...obf", X, H))
    return _apply(x, h, plan, lambda X, H: np.einsum("...if,oif->...of", X, H))


def convolve(signal: SpatialSignal, fir, mode: str | None = None) -> SpatialSignal:
    """Convolve every channel of a time-domain signal with ``fir``.

    ``fir`` is either one filter (L,) or one per (channel, spatial) pair.
    """
    was_freq = signal.time_domain is Domain.FREQ
    sig = signal.copy().to_time() if was_freq else signal
    y = fft_convolve(sig.data, fir, mode)
    out = SpatialSignal(y, sig.fs, Domain.TIME, sig.space_domain, sig.sh_order, sig.grid)
    return out

"""Composable SH-domain processors.

Every processor maps a :class:`SpatialSignal` to a new one and exposes its
frequency response as a kernel of shape (n_bins, n_out, n_in).  Processors
come in two flavours:

* FIR processors (``fir_length > 0``, the binaural decoder) perform linear
  convolution, so their output is ``fir_length - 1`` samples longer.
* Analytic processors (array decoder, ASM, BSM, rotation) are defined
  directly on the frequency grid of the signal's own transform.  Their time
  output spans the full transform length, which makes sequential and
  chained application agree exactly.

:class:`ProcessorChain` multiplies the kernels of its members and applies
the product with one forward and one inverse transform.
"""
from __future__ import annotations

import numpy as np

from .array import ArraySpec, asm_filters, bsm_filters, design_grid, modal_matrix, \
    steering_matrix, DEFAULT_LAMBDA
from .convolution import mimo_convolve
from .errors import ChainError, ConfigError, DimensionError
from .hrtf import HrtfSet, ShHrtf, project_ls
from .sh import WignerDMatrix, n_coeffs, wigner_d_matrix
from .signal import Domain, SpatialSignal, next_pow2

__all__ = ["Processor", "BinauralDecoder", "ArrayDecoder", "ASM", "ASMEncoder", "BSM",
           "SHRotation", "ProcessorChain", "binaural_decode", "array_decode", "chain"]


class Processor:
    """Base class.  Subclasses set the contract attributes and ``_kernel``."""

    in_space: Domain = Domain.SH
    out_space: Domain = Domain.SH
    n_in: int | None = None
    n_out: int | None = None
    fir_length: int = 0
    fs: float | None = None
    out_grid = None

    def __init__(self):
        self._cache: dict = {}

    @property
    def out_order(self):
        return None if self.out_space is not Domain.SH or self.n_out is None \
            else _order_of(self.n_out)

    def kernel(self, nfft: int, fs: float | None = None) -> np.ndarray:
        """Transfer tensor on the rfft bins of ``nfft`` (memoised)."""
        fs = self.fs if fs is None else fs
        key = (int(nfft), float(fs))
        if key not in self._cache:
            K = self._kernel(int(nfft), float(fs))
            if not self.fir_length:
                # a real signal has real DC and Nyquist bins; keeping the kernel real
                # there makes sequential and chained application agree
                K = K.astype(complex, copy=True)
                edges = [0, -1] if nfft % 2 == 0 else [0]
                K[edges] = K[edges].real
            K.setflags(write=False)
            self._cache[key] = K
        return self._cache[key]

    def _kernel(self, nfft, fs):
        raise NotImplementedError

    # contract ------------------------------------------------------------

    def check_input(self, sig: SpatialSignal) -> None:
        name = type(self).__name__
        if sig.space_domain is not self.in_space:
            raise DimensionError(f"{name} expects {self.in_space.value} input, "
                                 f"got {sig.space_domain.value}")
        if self.n_in is not None and sig.n_spatial != self.n_in:
            raise DimensionError(f"{name} expects {self.n_in} spatial channels, "
                                 f"got {sig.n_spatial}")
        if self.fs is not None and sig.fs != self.fs:
            raise ConfigError(f"{name} runs at {self.fs:g} Hz, signal is {sig.fs:g} Hz")

    def _wrap(self, data, sig, time_domain, nfft=None, n_samples=None):
        return SpatialSignal(data, sig.fs, time_domain, self.out_space,
                             sh_order=self.out_order, grid=self.out_grid,
                             nfft=nfft, n_samples=n_samples)

    # application ----------------------------------------------------------

    def process(self, sig: SpatialSignal) -> SpatialSignal:
        """Apply to ``sig`` (left untouched); output keeps the input's time domain."""
        self.check_input(sig)
        return _apply_kernel(self, sig)

    __call__ = process


def _order_of(n):
    order = int(round(np.sqrt(n))) - 1
    return order if n_coeffs(order) == n else None


def _transform_plan(sig: SpatialSignal, fir_total: int):
    """(nfft, n_samples) of the frequency grid used to apply a kernel."""
    if sig.time_domain is Domain.FREQ:
        n_out = sig.n_samples + fir_total - (1 if fir_total else 0)
        if fir_total and sig.nfft < n_out:
            raise DimensionError(f"spectrum with nfft={sig.nfft} is too short for "
                                 f"{fir_total}-tap filtering; supply time-domain input")
        return sig.nfft, (n_out if fir_total else sig.nfft)
    if fir_total:
        n_out = sig.n_frames + fir_total - 1
        return next_pow2(n_out), n_out
    nfft = next_pow2(sig.n_frames)
    return nfft, nfft


def _apply_kernel(proc: Processor, sig: SpatialSignal) -> SpatialSignal:
    nfft, n_out = _transform_plan(sig, proc.fir_length)
    was_time = sig.time_domain is Domain.TIME
    X = sig.copy().to_freq(nfft) if was_time else sig
    K = proc.kernel(nfft, sig.fs)
    # (f, o, i) x (c, i, f) -> (c, o, f)
    Y = np.einsum("foi,cif->cof", K, X.data, optimize=True)
    out = proc._wrap(Y, sig, Domain.FREQ, nfft=nfft, n_samples=n_out)
    return out.to_time() if was_time else out


# ---------------------------------------------------------------------------
# binaural decoder

class BinauralDecoder(Processor):
    """SH-domain HRTF rendering: per ear ``sum_c H_c(f) A_c(f)``.

    ``hrtf`` may be an :class:`ShHrtf` (used as is, truncated to
    ``sh_order``) or an :class:`HrtfSet` (projected by least squares).
    Signals of lower order than the decoder use the matching leading
    coefficients; higher-order signals are rejected.
    """

    in_space = Domain.SH
    out_space = Domain.SPACE
    n_out = 2

    def __init__(self, hrtf, sh_order: int | None = None):
        super().__init__()
        if isinstance(hrtf, HrtfSet):
            if sh_order is None:
                raise ConfigError("sh_order is required when decoding with a raw HRTF set")
            hrtf = project_ls(hrtf, sh_order)
        if not isinstance(hrtf, ShHrtf):
            raise ConfigError("hrtf must be an ShHrtf or HrtfSet")
        self.hrtf = hrtf if sh_order is None else hrtf.truncate(sh_order)
        self.sh_order = self.hrtf.order
        self.fs = self.hrtf.fs
        self.fir_length = self.hrtf.nfft
        self.n_in = n_coeffs(self.sh_order)
        self._filters = np.ascontiguousarray(self.hrtf.filters().transpose(1, 0, 2))  # (2, C, L)

    def check_input(self, sig):
        if sig.space_domain is not Domain.SH:
            raise DimensionError("BinauralDecoder expects SH input")
        if sig.sh_order > self.sh_order:
            raise DimensionError(f"signal order {sig.sh_order} exceeds decoder order "
                                 f"{self.sh_order}")
        if sig.fs != self.fs:
            raise ConfigError(f"HRTF at {self.fs:g} Hz, signal at {sig.fs:g} Hz")

    def for_order(self, order: int) -> "BinauralDecoder":
        return self if order == self.sh_order else BinauralDecoder(self.hrtf.truncate(order))

    def filters(self, order: int | None = None) -> np.ndarray:
        """Time-domain decoding filters, shape (2, (order+1)**2, fir_length)."""
        C = n_coeffs(self.sh_order if order is None else order)
        return self._filters[:, :C]

    def _kernel(self, nfft, fs):
        return np.fft.rfft(self._filters, n=nfft, axis=-1).transpose(2, 0, 1)

    def process(self, sig: SpatialSignal) -> SpatialSignal:
        self.check_input(sig)
        dec = self.for_order(sig.sh_order)
        if sig.time_domain is Domain.TIME:
            y = mimo_convolve(sig.data, dec.filters())
            return dec._wrap(y, sig, Domain.TIME)
        return _apply_kernel(dec, sig)

    __call__ = process


def binaural_decode(amb: SpatialSignal, hrtf) -> SpatialSignal:
    return BinauralDecoder(hrtf).process(amb)


# ---------------------------------------------------------------------------
# array decoder and encoders

class ArrayDecoder(Processor):
    """Ambisonics -> capsule signals: ``p_m = sum_c B_n(f) Y_c(x_m) A_c``."""

    in_space = Domain.SH
    out_space = Domain.SPACE

    def __init__(self, array: ArraySpec, sh_order: int):
        super().__init__()
        self.array = array
        self.sh_order = int(sh_order)
        self.n_in = n_coeffs(self.sh_order)
        self.n_out = array.n_mics
        self.fs = array.fs
        self.out_grid = array.capsules

    def check_input(self, sig):
        if sig.space_domain is Domain.SH and sig.sh_order != self.sh_order:
            raise DimensionError(f"ArrayDecoder is order {self.sh_order}, "
                                 f"signal is order {sig.sh_order}")
        super().check_input(sig)

    def _kernel(self, nfft, fs):
        return modal_matrix(self.array, np.fft.rfftfreq(nfft, 1 / fs), order=self.sh_order)


def array_decode(amb: SpatialSignal, array: ArraySpec) -> SpatialSignal:
    return ArrayDecoder(array, amb.sh_order).process(amb)


class ASM(Processor):
    """Ambisonic signal matching encoder: capsule signals -> SH coefficients."""

    in_space = Domain.SPACE
    out_space = Domain.SH

    def __init__(self, array: ArraySpec, sh_order: int, eps=None, lam: float = DEFAULT_LAMBDA,
                 design=None):
        super().__init__()
        self.array = array
        self.sh_order = int(sh_order)
        self.eps, self.lam = eps, lam
        self.design = design if design is not None else design_grid(self.sh_order,
                                                                    array.sm_order)
        self.n_in = array.n_mics
        self.n_out = n_coeffs(self.sh_order)
        self.fs = array.fs

    def _kernel(self, nfft, fs):
        v = steering_matrix(self.array, self.design, nfft)
        return asm_filters(v, self.sh_order, self.eps, self.lam)


ASMEncoder = ASM


class BSM(Processor):
    """Binaural signal matching: capsule signals -> two ears directly."""

    in_space = Domain.SPACE
    out_space = Domain.SPACE
    n_out = 2

    def __init__(self, array: ArraySpec, hrtf: HrtfSet, eps=None, magls_pre: bool = False,
                 fc: float | None = None, lam: float = DEFAULT_LAMBDA):
        super().__init__()
        if hrtf.fs != array.fs:
            raise ConfigError(f"HRTF at {hrtf.fs:g} Hz, array at {array.fs:g} Hz")
        self.array, self.hrtf = array, hrtf
        self.eps, self.magls_pre, self.fc, self.lam = eps, magls_pre, fc, lam
        self.n_in = array.n_mics
        self.fs = array.fs

    def _kernel(self, nfft, fs):
        if nfft < self.hrtf.taps:
            raise DimensionError(f"nfft={nfft} shorter than the HRIRs ({self.hrtf.taps})")
        v = steering_matrix(self.array, self.hrtf.grid, nfft)
        return bsm_filters(v, self.hrtf, self.eps, self.magls_pre, self.fc, self.lam)


# ---------------------------------------------------------------------------
# rotation

class SHRotation(Processor):
    """Wigner-D rotation of SH signals (frequency independent)."""

    in_space = Domain.SH
    out_space = Domain.SH

    def __init__(self, D=None, order: int | None = None, alpha=0.0, beta=0.0, gamma=0.0):
        super().__init__()
        if D is None:
            if order is None:
                raise ConfigError("give a Wigner-D matrix or an order with Euler angles")
            D = wigner_d_matrix(order, alpha, beta, gamma)
        self.D = np.asarray(D.matrix if isinstance(D, WignerDMatrix) else D, float)
        self.n_in = self.n_out = self.D.shape[0]
        if _order_of(self.n_in) is None or self.D.shape != (self.n_in, self.n_in):
            raise DimensionError(f"rotation matrix of shape {self.D.shape} is not an SH rotation")

    def _kernel(self, nfft, fs):
        return np.broadcast_to(self.D, (nfft // 2 + 1,) + self.D.shape).copy()

    def process(self, sig):
        self.check_input(sig)
        out = sig.copy()
        out.data = np.matmul(self.D, out.data)
        return out

    __call__ = process


# ---------------------------------------------------------------------------
# chain

class ProcessorChain(Processor):
    """Sequential processors collapsed into one kernel.

    Adjacent contracts are checked at construction.  ``process`` performs
    at most one forward and one inverse transform.
    """

    def __init__(self, processors):
        super().__init__()
        procs = list(processors)
        if not procs:
            raise ChainError("empty processor chain")
        for a, b in zip(procs, procs[1:]):
            _check_link(a, b)
        self.processors = procs
        first, last = procs[0], procs[-1]
        self.in_space, self.n_in = first.in_space, first.n_in
        self.out_space, self.n_out, self.out_grid = last.out_space, last.n_out, last.out_grid
        rates = {p.fs for p in procs if p.fs is not None}
        if len(rates) > 1:
            raise ChainError(f"processors disagree on the sample rate: {sorted(rates)}")
        self.fs = rates.pop() if rates else None
        self.fir_length = sum(p.fir_length for p in procs)

    def check_input(self, sig):
        self.processors[0].check_input(sig)

    def _kernel(self, nfft, fs):
        K = self.processors[0].kernel(nfft, fs)
        for p in self.processors[1:]:
            K = p.kernel(nfft, fs) @ K
        return K

    def process(self, sig):
        self.check_input(sig)
        if len(self.processors) == 1:
            return self.processors[0].process(sig)
        first = self.processors[0]
        if isinstance(first, BinauralDecoder) and sig.sh_order != first.sh_order:
            raise DimensionError("chained binaural decoders need a signal of their own order")
        return _apply_kernel(self, sig)

    __call__ = process


def _check_link(a: Processor, b: Processor):
    names = f"{type(a).__name__} -> {type(b).__name__}"
    if a.out_space is not b.in_space:
        raise ChainError(f"{names}: {a.out_space.value} output feeds {b.in_space.value} input")
    if a.n_out is not None and b.n_in is not None and a.n_out != b.n_in:
        raise ChainError(f"{names}: {a.n_out} channels feed a {b.n_in}-channel input")
    b_array = getattr(b, "array", None)
    if a.out_grid is not None and b_array is not None \
            and not a.out_grid.same_directions(b_array.capsules):
        raise ChainError(f"{names}: capsule layouts differ")


def chain(processors) -> ProcessorChain:
    return ProcessorChain(processors)

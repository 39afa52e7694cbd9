"""Spherical microphone arrays: modal radial terms, steering matrices, ASM and BSM.

Time convention follows numpy's FFT: a signal delayed by ``tau`` picks up
``exp(-1j * omega * tau)``, so a plane wave arriving from direction ``s``
reaches point ``x`` with phase ``exp(1j * k * s.x)`` and outgoing spherical
waves use the Hankel function of the second kind.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, GeometryError, IllConditionedError, \
    SingularityError
from .grids import DirectionGrid
from .sh import acn_degrees, n_coeffs, sh_matrix

__all__ = ["spherical_bessel", "spherical_bessel_derivative", "RIGID", "OPEN", "PLANE_WAVE",
           "POINT_SOURCE", "ArraySpec", "SphericalArray", "RadialTerm", "radial_coefficient",
           "order_mask", "SteeringMatrix", "steering_matrix", "tikhonov_eps", "asm_filters",
           "bsm_filters", "aliasing_frequency"]

RIGID = "rigid"
OPEN = "open"
PLANE_WAVE = "plane"
POINT_SOURCE = "point"

DEFAULT_LAMBDA = 1e-3
MASK_SLOPE = 5.0
MASK_OFFSET = 1.0
_DENOM_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# spherical Bessel functions

def _j_miller(n_max: int, x: np.ndarray) -> np.ndarray:
    """j_0..j_n_max by downward recurrence, rescaled against j_0 or j_1."""
    top = max(n_max, 1)
    start = top + 16 + int(np.ceil(np.max(x, initial=0.0)))
    out = np.zeros((top + 1,) + x.shape)
    f_next = np.zeros_like(x)
    f = np.full_like(x, 1e-300)
    for n in range(start, 0, -1):
        # f holds an unnormalised j_n; step down to j_{n-1}
        f, f_next = (2 * n + 1) / x * f - f_next, f
        big = np.abs(f) > 1e250
        if np.any(big):
            scale = np.where(big, 1e-250, 1.0)
            f, f_next, out = f * scale, f_next * scale, out * scale
        if n - 1 <= top:
            out[n - 1] = f
    j0 = np.sin(x) / x
    j1 = np.sin(x) / x ** 2 - np.cos(x) / x
    # normalise on whichever of j_0, j_1 is further from a zero
    use0 = np.abs(j0) >= np.abs(j1)
    scale = np.where(use0, j0 / out[0], j1 / out[1])
    return (out * scale)[:n_max + 1]


def _upward(n_max: int, f0, f1, x):
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = f0
    if n_max >= 1:
        out[1] = f1
    for n in range(1, n_max):
        out[n + 1] = (2 * n + 1) / x * out[n] - out[n - 1]
    return out


def _y_upward(n_max: int, x: np.ndarray) -> np.ndarray:
    return _upward(n_max, -np.cos(x) / x, -np.cos(x) / x ** 2 - np.sin(x) / x, x)


def _j(n_max: int, x: np.ndarray) -> np.ndarray:
    """Upward recurrence where it is stable (x >= n_max), Miller elsewhere."""
    up = x >= n_max
    out = np.empty((n_max + 1,) + x.shape)
    if np.any(up):
        xu = x[up]
        out[:, up] = _upward(n_max, np.sin(xu) / xu, np.sin(xu) / xu ** 2 - np.cos(xu) / xu, xu)
    if not np.all(up):
        out[:, ~up] = _j_miller(n_max, x[~up])
    return out


def spherical_bessel(kind: str, n_max: int, x) -> np.ndarray:
    """Spherical Bessel functions of orders 0..n_max.

    ``kind`` is ``"j"``, ``"y"`` or ``"h2"`` (h2 = j - i y).  Returns an
    array of shape (n_max + 1,) + shape(x).  At ``x == 0`` only ``j`` is
    defined (j_0 = 1, higher orders 0).
    """
    if kind not in ("j", "y", "h2"):
        raise ConfigError(f"unknown spherical Bessel kind {kind!r}")
    if n_max < 0:
        raise ConfigError("n_max must be nonnegative")
    x = np.asarray(x, float)
    if np.any(x < 0):
        raise ConfigError("spherical Bessel arguments must be nonnegative")
    zero = x == 0
    if kind != "j" and np.any(zero):
        raise SingularityError(f"spherical {kind}_n is singular at x = 0")
    xs = np.where(zero, 1.0, x)
    if kind == "j":
        at_zero = (np.arange(n_max + 1) == 0).reshape((-1,) + (1,) * x.ndim)
        return np.where(zero, at_zero, _j(n_max, xs))
    y = _y_upward(n_max, xs)
    if kind == "y":
        return y
    return _j(n_max, xs) - 1j * y


def spherical_bessel_derivative(f: np.ndarray, x) -> np.ndarray:
    """Derivatives from values ``f`` (orders along axis 0) at ``x`` > 0.

    Uses f_0' = -f_1 and f_n' = f_{n-1} - (n + 1) f_n / x; ``f`` must carry
    one order more than the derivatives wanted.
    """
    x = np.asarray(x, float)
    d = np.empty_like(f[:-1])
    d[0] = -f[1]
    n = np.arange(1, f.shape[0] - 1).reshape((-1,) + (1,) * x.ndim)
    d[1:] = f[:-2] - (n + 1) * f[1:-1] / x
    return d


# ---------------------------------------------------------------------------
# array description

def aliasing_frequency(order: int, radius: float, c: float = 343.0) -> float:
    """Spatial aliasing frequency N c / (2 pi a)."""
    return order * c / (2 * np.pi * radius)


@dataclass(frozen=True, eq=False)
class ArraySpec:
    """Spherical microphone array.

    ``sm_order`` is the truncation order of the modal sum used to simulate
    the array.  ``mask`` switches the smooth order cutoff
    ``1 / (1 + exp(mask_slope * (n - ka - mask_offset)))`` applied to the
    radial terms.
    """

    capsules: DirectionGrid
    radius: float = 0.042
    sphere: str = RIGID
    source_model: str = PLANE_WAVE
    sm_order: int = 7
    fs: float = 48000.0
    c: float = 343.0
    source_distance: float = np.inf
    mask: bool = True
    mask_slope: float = MASK_SLOPE
    mask_offset: float = MASK_OFFSET

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("array radius must be positive")
        if self.sphere not in (RIGID, OPEN):
            raise ConfigError(f"sphere must be {RIGID!r} or {OPEN!r}")
        if self.source_model not in (PLANE_WAVE, POINT_SOURCE):
            raise ConfigError(f"source model must be {PLANE_WAVE!r} or {POINT_SOURCE!r}")
        if int(self.sm_order) != self.sm_order or self.sm_order < 0:
            raise ConfigError("sm_order must be a nonnegative integer")
        if self.source_model == POINT_SOURCE and not self.source_distance > self.radius:
            raise GeometryError("point sources must lie outside the array sphere")
        if self.fs <= 0 or self.c <= 0:
            raise ConfigError("fs and c must be positive")

    @property
    def n_mics(self) -> int:
        return self.capsules.n_dirs

    def f_alias(self, order: int) -> float:
        return aliasing_frequency(order, self.radius, self.c)


def SphericalArray(n_mics: int = 32, sh_order: int = 3, radius: float = 0.042,
                   fs: float = 48000, sphere: str = RIGID, source_model: str = PLANE_WAVE,
                   sm_order: int | None = None, source_distance: float = np.inf,
                   c: float = 343.0, capsules: DirectionGrid | None = None,
                   mask: bool = True) -> ArraySpec:
    """Quick-start constructor; the modal order defaults to ``sh_order + 4``."""
    if capsules is None:
        capsules = DirectionGrid.capsules(n_mics)
    elif capsules.n_dirs != n_mics:
        raise DimensionError(f"{capsules.n_dirs} capsule directions for n_mics={n_mics}")
    return ArraySpec(capsules, radius, sphere, source_model,
                     sh_order + 4 if sm_order is None else sm_order, fs, c,
                     source_distance, mask)


# ---------------------------------------------------------------------------
# radial terms

@dataclass(frozen=True, eq=False)
class RadialTerm:
    b: np.ndarray           # (n_bins, N + 1)
    freqs: np.ndarray
    sphere: str
    source_model: str
    source_distance: float
    masked: bool

    def per_acn(self) -> np.ndarray:
        """Radial terms expanded to ACN channels, shape (n_bins, (N+1)**2)."""
        return self.b[:, acn_degrees(self.b.shape[1] - 1)]


def order_mask(order: int, ka, slope: float = MASK_SLOPE, offset: float = MASK_OFFSET):
    """Sigmoid order weights w_n(ka), shape (len(ka), order + 1)."""
    n = np.arange(order + 1)
    z = slope * (n[None, :] - np.asarray(ka, float)[:, None] - offset)
    return 0.5 * (1 - np.tanh(0.5 * z))     # 1 / (1 + exp(z)) without overflow


def _plane_radial(sphere, order, ka):
    """4 pi i^n R_n(ka) for ka > 0; R_n = j_n (open) or the rigid scattering form."""
    j = spherical_bessel("j", order + 1, ka)
    if sphere == OPEN:
        r = j[:-1].astype(complex)
    else:
        h = spherical_bessel("h2", order + 1, ka)
        dj = spherical_bessel_derivative(j, ka)
        dh = spherical_bessel_derivative(h, ka)
        dh = np.where(np.abs(dh) < _DENOM_FLOOR, _DENOM_FLOOR, dh)
        r = j[:-1] - dj / dh * h[:-1]
    return r


def radial_coefficient(spec: ArraySpec, freqs, order: int | None = None,
                       source_distance: float | None = None) -> RadialTerm:
    """Modal radial terms B_n at ``freqs`` for n = 0..order (default sm_order).

    Plane waves: ``B_n = 4 pi i^n R_n(ka)``.  Point sources at distance r_s:
    ``B_n = 4 pi R_n(ka) (-i)(k r_s) h2_n(k r_s) exp(i k r_s)``; the last
    factor normalises the free-field pressure at the array centre to one, and
    the product tends to the plane-wave value as r_s grows.  The DC bin
    takes the analytic k -> 0 limit.
    """
    order = spec.sm_order if order is None else int(order)
    freqs = np.atleast_1d(np.asarray(freqs, float))
    model = spec.source_model
    rs = spec.source_distance if source_distance is None else float(source_distance)
    if source_distance is not None:
        model = PLANE_WAVE if np.isinf(rs) else POINT_SOURCE
    if model == POINT_SOURCE and not rs > spec.radius:
        raise GeometryError(f"source distance {rs} m is inside the array (radius {spec.radius} m)")

    k = 2 * np.pi * freqs / spec.c
    ka = k * spec.radius
    n = np.arange(order + 1)
    b = np.zeros((len(freqs), order + 1), complex)
    dc = ka == 0
    pos = ~dc
    if np.any(pos):
        r = _plane_radial(spec.sphere, order, ka[pos])            # (N+1, bins)
        if model == PLANE_WAVE:
            b[pos] = (4 * np.pi * (1j ** n)[:, None] * r).T
        else:
            krs = k[pos] * rs
            g = -1j * krs * spherical_bessel("h2", order, krs) * np.exp(1j * krs)
            b[pos] = (4 * np.pi * r * g).T
    if np.any(dc):
        if model == PLANE_WAVE:
            b[dc, 0] = 4 * np.pi
        else:
            ratio = (spec.radius / rs) ** n
            b[dc] = 4 * np.pi * ratio * (1 / (2 * n + 1) if spec.sphere == OPEN else 1 / (n + 1))
    if spec.mask:
        b *= order_mask(order, ka, spec.mask_slope, spec.mask_offset)
    return RadialTerm(b, freqs, spec.sphere, model, rs, spec.mask)


# ---------------------------------------------------------------------------
# steering matrix

@dataclass(frozen=True, eq=False)
class SteeringMatrix:
    """Steering matrix in factored form ``V(f) = G(f) @ Y_s.T``.

    ``modal`` G has shape (n_bins, M, C) with ``G[f, m, c] = B_n(f) Y_c(x_m)``
    and ``source_basis`` Y_s has shape (S, C).  The dense tensor ``v`` of
    shape (n_bins, M, S) is formed on demand.
    """

    modal: np.ndarray
    source_basis: np.ndarray
    freqs: np.ndarray
    sources: DirectionGrid
    spec: ArraySpec

    @property
    def v(self) -> np.ndarray:
        return np.einsum("fmc,sc->fms", self.modal, self.source_basis)

    @property
    def n_bins(self) -> int:
        return self.modal.shape[0]

    @property
    def n_mics(self) -> int:
        return self.modal.shape[1]

    @property
    def n_sources(self) -> int:
        return self.source_basis.shape[0]

    def source_gram(self) -> np.ndarray:
        """Weighted Gram ``Y_s^T diag(w) Y_s`` of the source grid."""
        Y = self.source_basis
        return Y.T @ (Y * self.sources.weights[:, None])


def modal_matrix(spec: ArraySpec, freqs, order: int | None = None,
                 source_distance: float | None = None) -> np.ndarray:
    """G[f, m, c] = B_n(f) Y_c(capsule m), the SH-to-capsule response."""
    rad = radial_coefficient(spec, freqs, order, source_distance)
    order = rad.b.shape[1] - 1
    Yc = sh_matrix(order, spec.capsules.azimuths, spec.capsules.elevations)
    return rad.per_acn()[:, None, :] * Yc[None, :, :]


def steering_matrix(spec: ArraySpec, sources: DirectionGrid, nfft: int,
                    source_distance: float | None = None) -> SteeringMatrix:
    """Steering matrix from ``sources`` to the capsules on the rfft bins of ``nfft``."""
    if sources.n_dirs == 0:
        raise ConfigError("no source directions")
    freqs = np.fft.rfftfreq(int(nfft), 1 / spec.fs)
    G = modal_matrix(spec, freqs, source_distance=source_distance)
    Ys = sh_matrix(spec.sm_order, sources.azimuths, sources.elevations)
    return SteeringMatrix(G, Ys, freqs, sources, spec)


def design_grid(order: int, sm_order: int) -> DirectionGrid:
    """Lebedev grid exact for products of degree max(order, sm_order) + 2."""
    return DirectionGrid.for_order(max(order, sm_order) + 2)


# ---------------------------------------------------------------------------
# matching encoders

def tikhonov_eps(gram: np.ndarray, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """Per-bin damping ``lam * trace(V V^H) / M`` from the (n_bins, M, M) Gram."""
    M = gram.shape[-1]
    return lam * np.real(np.trace(gram, axis1=-2, axis2=-1)) / M


def _regularised_solve(gram, rhs, eps):
    """``rhs @ inv(gram + eps I)`` per bin; ``rhs`` is (n_bins, R, M)."""
    M = gram.shape[-1]
    eps = np.broadcast_to(np.asarray(eps, float), gram.shape[:1])
    A = gram + eps[:, None, None] * np.eye(M)
    if np.any(eps == 0):
        cond = np.linalg.cond(A)
        if np.any(~np.isfinite(cond)) or np.any(cond > 1e13):
            raise IllConditionedError("V V^H is singular at some bins; use eps > 0")
    # A is Hermitian, so rhs A^-1 = (A^-1 rhs^H)^H
    sol = np.linalg.solve(A, np.conj(np.swapaxes(rhs, -1, -2)))
    return np.conj(np.swapaxes(sol, -1, -2))


def _weighted_terms(v: SteeringMatrix):
    """(V W V^H, G) with W the source-grid quadrature weights."""
    G = v.modal
    gram = (G @ v.source_gram()) @ np.conj(np.swapaxes(G, 1, 2))
    return gram, G


def _resolve_eps(gram, eps, lam):
    if eps is None:
        return tikhonov_eps(gram, lam)
    eps = np.asarray(eps, float)
    if np.any(eps < 0):
        raise ConfigError("eps must be nonnegative")
    return eps


def asm_filters(v: SteeringMatrix, order: int, eps=None,
                lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """ASM encoding filters ``W = Y^H W_s V^H (V W_s V^H + eps I)^-1``.

    ``Y`` is the order-``order`` SH basis on the source (design) grid and
    ``W_s`` its quadrature weights.  ``eps=None`` selects the scale-aware
    default.  Returns shape (n_bins, (order+1)**2, M).
    """
    gram, G = _weighted_terms(v)
    eps = _resolve_eps(gram, eps, lam)
    Y = sh_matrix(order, v.sources.azimuths, v.sources.elevations)
    cross = Y.T @ (v.source_basis * v.sources.weights[:, None])      # (C, C_sm)
    rhs = np.einsum("cd,fmd->fcm", cross, np.conj(G))
    return _regularised_solve(gram, rhs, eps)


def asm_filters_dense(v: SteeringMatrix, order: int, eps) -> np.ndarray:
    """Same as :func:`asm_filters` from the dense steering tensor (reference route)."""
    V = v.v * np.sqrt(v.sources.weights)[None, None, :]
    Y = sh_matrix(order, v.sources.azimuths, v.sources.elevations) \
        * np.sqrt(v.sources.weights)[:, None]
    M = V.shape[1]
    A = V @ np.conj(np.swapaxes(V, 1, 2)) + np.asarray(eps)[..., None, None] * np.eye(M)
    return Y.T[None] @ np.conj(np.swapaxes(V, 1, 2)) @ np.linalg.inv(A)


def bsm_filters(v: SteeringMatrix, hrtf, eps=None, magls_pre: bool = False,
                fc: float | None = None, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """BSM filters ``W^{L/R} = H W_s V^H (V W_s V^H + eps I)^-1``.

    ``hrtf`` is an :class:`~ambiroom.hrtf.HrtfSet` on the steering source
    grid (or an (n_bins, S, 2) spectrum array on it).  With ``magls_pre``
    bins above ``fc`` keep the HRTF magnitudes and take their phase from
    the previous bin's rendered estimate ``W V``.  Returns (n_bins, 2, M).
    """
    from .hrtf import HrtfSet, default_crossover

    w = v.sources.weights
    Ys = v.source_basis
    if isinstance(hrtf, HrtfSet):
        if not hrtf.grid.same_directions(v.sources):
            raise ConfigError("HRTF grid differs from the steering source grid")
        if hrtf.fs != v.spec.fs:
            raise ConfigError(f"HRTF at {hrtf.fs} Hz, array at {v.spec.fs} Hz")
        nfft = 2 * (v.n_bins - 1)
        if hrtf.taps > nfft:
            raise ConfigError(f"steering nfft {nfft} shorter than the HRIRs ({hrtf.taps})")
        # Y_s and the weights are frequency independent: project the HRIRs first
        irs_sh = np.einsum("sc,set->ect", Ys * w[:, None], hrtf.irs)
        proj = np.fft.rfft(irs_sh, n=nfft, axis=-1).transpose(2, 0, 1)   # (f, 2, C)
        H = np.fft.rfft(hrtf.irs, n=nfft, axis=-1).transpose(2, 0, 1) if magls_pre else None
    else:
        H = np.asarray(hrtf)
        if H.shape[:2] != (v.n_bins, v.n_sources):
            raise ConfigError(f"HRTF spectra of shape {H.shape} do not match the steering grid")
        proj = _project(H * w[None, :, None], Ys)
    gram, G = _weighted_terms(v)
    eps = np.broadcast_to(_resolve_eps(gram, eps, lam), (v.n_bins,))

    def solve(P, bins):
        # H W V^H = (H W Y_s) G^H, exact rewrite of the sum over directions
        return _regularised_solve(gram[bins], P @ np.conj(np.swapaxes(G[bins], 1, 2)),
                                  eps[bins])

    W = solve(proj, slice(None))
    if not magls_pre:
        return W
    if fc is None:
        fc = default_crossover(v.spec.sm_order)
    for k in np.flatnonzero(v.freqs > fc):
        if k == 0:
            continue
        est = (W[k - 1] @ G[k - 1]) @ Ys.T                           # (2, S)
        target = np.abs(H[k]).T * np.exp(1j * np.angle(est))
        P = _project(target.T[None] * w[None, :, None], Ys)
        W[k] = solve(P, slice(k, k + 1))[0]
    return W


def _project(Hw, Ys):
    """(f, S, 2) complex spectra onto the real basis ``Ys``: returns (f, 2, C)."""
    X = np.ascontiguousarray(np.swapaxes(Hw, 1, 2))
    return X.real @ Ys + 1j * (X.imag @ Ys)

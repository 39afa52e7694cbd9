"""Real spherical harmonics, quadrature analysis and Wigner-D rotations.

Convention throughout the package: real SH, ACN channel order
(``acn = n**2 + n + m``), N3D (orthonormal) normalization, no Condon-Shortley
phase.  Cosine terms sit at ``m > 0``, sine terms at ``m < 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DimensionError, UnderdeterminedGridError
from .grids import DirectionGrid, sph2cart

__all__ = [
    "n_coeffs", "order_from_channels", "acn", "acn_degrees", "acn_orders",
    "legendre_normalized", "sh_matrix", "sh_basis", "ShBasisMatrix",
    "sh_analysis", "sh_synthesis", "rotation_matrix_zyz", "head_rotation", "WignerDMatrix",
    "wigner_d_matrix", "apply_rotation", "rotate_sh",
]


def n_coeffs(order: int) -> int:
    return (order + 1) ** 2


def order_from_channels(n_channels: int) -> int:
    order = int(round(np.sqrt(n_channels))) - 1
    if n_coeffs(order) != n_channels:
        raise DimensionError(f"{n_channels} is not a square SH channel count")
    return order


def acn(n: int, m: int) -> int:
    return n * n + n + m


@lru_cache(maxsize=None)
def _acn_tables(order: int):
    n = np.concatenate([np.full(2 * k + 1, k) for k in range(order + 1)])
    m = np.concatenate([np.arange(-k, k + 1) for k in range(order + 1)])
    n.setflags(write=False)
    m.setflags(write=False)
    return n, m


def acn_degrees(order: int) -> np.ndarray:
    """Degree ``n`` of every ACN channel up to ``order``."""
    return _acn_tables(order)[0]


def acn_orders(order: int) -> np.ndarray:
    """Index ``m`` of every ACN channel up to ``order``."""
    return _acn_tables(order)[1]


def legendre_normalized(order: int, x) -> np.ndarray:
    """Orthonormalized associated Legendre functions without phase.

    Returns ``P[n, m, ...] = sqrt((2n+1)/(4pi) (n-m)!/(n+m)!) P_n^m(x)`` for
    ``0 <= m <= n <= order``; entries with ``m > n`` are zero.  Sectoral
    terms are seeded first, then the standard three-term upward recurrence in
    ``n`` runs for every ``m``.
    """
    x = np.asarray(x, float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    P = np.zeros((order + 1, order + 1) + x.shape)
    P[0, 0] = 1.0 / np.sqrt(4 * np.pi)
    for m in range(1, order + 1):
        P[m, m] = np.sqrt((2 * m + 1) / (2 * m)) * s * P[m - 1, m - 1]
    for m in range(order):
        P[m + 1, m] = np.sqrt(2 * m + 3) * x * P[m, m]
    for m in range(order + 1):
        for n in range(m + 2, order + 1):
            a = np.sqrt((4 * n * n - 1) / (n * n - m * m))
            b = np.sqrt(((n - 1) ** 2 - m * m) / (4 * (n - 1) ** 2 - 1))
            P[n, m] = a * (x * P[n - 1, m] - b * P[n - 2, m])
    return P


def sh_matrix(order: int, azimuths, elevations) -> np.ndarray:
    """Real SH evaluated at the given directions, shape (n_dirs, (order+1)**2)."""
    if order < 0:
        raise ConfigError(f"SH order must be nonnegative, got {order}")
    azi = np.atleast_1d(np.asarray(azimuths, float))
    ele = np.atleast_1d(np.asarray(elevations, float))
    P = legendre_normalized(order, np.sin(ele))
    Y = np.empty((azi.size, n_coeffs(order)))
    sqrt2 = np.sqrt(2.0)
    for n in range(order + 1):
        Y[:, acn(n, 0)] = P[n, 0]
        for m in range(1, n + 1):
            Y[:, acn(n, m)] = sqrt2 * P[n, m] * np.cos(m * azi)
            Y[:, acn(n, -m)] = sqrt2 * P[n, m] * np.sin(m * azi)
    return Y


@dataclass(frozen=True, eq=False)
class ShBasisMatrix:
    matrix: np.ndarray
    order: int

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def shape(self):
        return self.matrix.shape


def sh_basis(grid: DirectionGrid, order: int) -> ShBasisMatrix:
    Y = sh_matrix(order, grid.azimuths, grid.elevations)
    Y.setflags(write=False)
    return ShBasisMatrix(Y, order)


def _check_grid(grid: DirectionGrid, order: int):
    if grid.n_dirs < n_coeffs(order):
        raise UnderdeterminedGridError(
            f"{grid.n_dirs} directions cannot resolve order {order} "
            f"({n_coeffs(order)} coefficients)")


def sh_analysis(values, grid: DirectionGrid, order: int, axis: int = 0):
    """Quadrature projection ``c_nm = sum_p w_p Y_nm(p) v_p`` along ``axis``.

    The grid must integrate degree ``2*order`` exactly for the result to be
    the orthogonal projection.
    """
    values = np.asarray(values)
    if values.shape[axis] != grid.n_dirs:
        raise DimensionError(f"values have {values.shape[axis]} entries along "
                             f"axis {axis}, grid has {grid.n_dirs}")
    _check_grid(grid, order)
    Yw = sh_matrix(order, grid.azimuths, grid.elevations) * grid.weights[:, None]
    out = np.tensordot(Yw.T, np.moveaxis(values, axis, 0), axes=(1, 0))
    return np.moveaxis(out, 0, axis)


def sh_synthesis(coeffs, grid: DirectionGrid, axis: int = 0):
    """Evaluate ``sum_nm c_nm Y_nm(p)`` at every grid direction."""
    coeffs = np.asarray(coeffs)
    order = order_from_channels(coeffs.shape[axis])
    Y = sh_matrix(order, grid.azimuths, grid.elevations)
    out = np.tensordot(Y, np.moveaxis(coeffs, axis, 0), axes=(1, 0))
    return np.moveaxis(out, 0, axis)


# ---------------------------------------------------------------------------
# rotations

def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _ry(b):
    c, s = np.cos(b), np.sin(b)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_matrix_zyz(alpha, beta, gamma) -> np.ndarray:
    """3x3 matrix of the intrinsic z-y-z rotation ``Rz(alpha) Ry(beta) Rz(gamma)``."""
    return _rz(alpha) @ _ry(beta) @ _rz(gamma)


@lru_cache(maxsize=None)
def _jy_eigen(n: int):
    """Eigen-decomposition of the angular momentum operator J_y for degree n.

    Used to evaluate the complex Wigner small-d matrix
    ``d(beta) = exp(-i beta J_y)`` in the |n, m> basis (m = -n..n).
    """
    m = np.arange(-n, n)
    # <m+1| J+ |m>
    jp = np.sqrt(n * (n + 1) - m * (m + 1.0))
    Jp = np.diag(jp, -1).astype(complex)
    Jy = (Jp - Jp.conj().T) / 2j
    evals, evecs = np.linalg.eigh(Jy)
    # eigenvalues are exactly the integers -n..n
    return np.round(evals), evecs


@lru_cache(maxsize=None)
def _complex_to_real(n: int) -> np.ndarray:
    """Unitary ``U`` with ``Y_real = U @ Y_complex`` for degree n.

    The complex harmonics follow the Condon-Shortley convention (the one in
    which ``_jy_eigen`` produces the standard Wigner-d); the real ones carry
    no Condon-Shortley phase.
    """
    U = np.zeros((2 * n + 1, 2 * n + 1), complex)
    U[n, n] = 1.0
    r = 1 / np.sqrt(2)
    for m in range(1, n + 1):
        sign = (-1) ** m
        # cos term: (Y^{-m} + (-1)^m Y^m) / sqrt2 ; with CS phase removed
        U[n + m, n - m] = r
        U[n + m, n + m] = sign * r
        # sin term: i (Y^{-m} - (-1)^m Y^m) / sqrt2
        U[n - m, n - m] = 1j * r
        U[n - m, n + m] = -1j * sign * r
    return U


def _small_d(n: int, beta: float) -> np.ndarray:
    lam, V = _jy_eigen(n)
    return (V * np.exp(-1j * beta * lam)) @ V.conj().T


def _real_dy_block(n: int, beta: float) -> np.ndarray:
    U = _complex_to_real(n)
    d = _small_d(n, beta)
    return np.real(U.conj() @ d @ U.T)


def _real_dz_block(n: int, alpha: float) -> np.ndarray:
    """Closed-form real rotation about z of one degree block."""
    B = np.zeros((2 * n + 1, 2 * n + 1))
    B[n, n] = 1.0
    for m in range(1, n + 1):
        c, s = np.cos(m * alpha), np.sin(m * alpha)
        B[n + m, n + m] = c
        B[n + m, n - m] = -s
        B[n - m, n + m] = s
        B[n - m, n - m] = c
    return B


@dataclass(frozen=True, eq=False)
class WignerDMatrix:
    """Block-diagonal real rotation acting on ACN coefficient vectors.

    ``D @ f`` gives the coefficients of the field rotated by
    ``rotation_matrix_zyz(*euler)``, i.e. ``(D f)(x) = f(R^T x)``.
    """

    matrix: np.ndarray
    order: int
    euler: tuple

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __matmul__(self, other):
        if isinstance(other, WignerDMatrix):
            raise TypeError("compose WignerDMatrix objects via .matrix")
        return self.matrix @ other

    @property
    def T(self):
        return self.matrix.T

    @property
    def shape(self):
        return self.matrix.shape


def wigner_d_matrix(N: int, alpha: float = 0.0, beta: float = 0.0,
                    gamma: float = 0.0) -> WignerDMatrix:
    """Real Wigner-D matrix of order ``N`` for z-y-z Euler angles (radians)."""
    N = int(N)
    if N < 0:
        raise ConfigError(f"SH order must be nonnegative, got {N}")
    D = np.zeros((n_coeffs(N), n_coeffs(N)))
    pure_azimuth = beta == 0
    for n in range(N + 1):
        sl = slice(n * n, (n + 1) ** 2)
        if pure_azimuth:
            D[sl, sl] = _real_dz_block(n, alpha + gamma)
        else:
            D[sl, sl] = (_real_dz_block(n, alpha) @ _real_dy_block(n, beta)
                         @ _real_dz_block(n, gamma))
    D.setflags(write=False)
    return WignerDMatrix(D, N, (float(alpha), float(beta), float(gamma)))


def head_rotation(N: int, alpha: float = 0.0, beta: float = 0.0,
                  gamma: float = 0.0) -> WignerDMatrix:
    """Wigner-D for a listener whose head is turned by z-y-z Euler angles.

    Turning the head by ``R`` rotates the sound field by ``R^T`` relative to
    the head, so this is the field rotation with negated, reversed angles.
    """
    return wigner_d_matrix(N, -gamma, -beta, -alpha)


def apply_rotation(D, data) -> np.ndarray:
    """``D @ data`` along axis -2 as a new array.

    A :class:`WignerDMatrix` is applied one degree block at a time, which
    skips the zero off-diagonal blocks.
    """
    data = np.asarray(data)
    if not isinstance(D, WignerDMatrix):
        return np.matmul(np.asarray(D), data)
    if data.shape[-2] != D.shape[0]:
        raise DimensionError(f"rotation of order {D.order} cannot act on "
                             f"{data.shape[-2]} channels")
    out = np.empty(data.shape, np.result_type(data, D.matrix))
    out[..., 0, :] = data[..., 0, :]
    for n in range(1, D.order + 1):
        sl = slice(n * n, (n + 1) ** 2)
        np.matmul(D.matrix[sl, sl], data[..., sl, :], out=out[..., sl, :])
    return out


def rotate_sh(sig, D):
    """Left-multiply every SH coefficient vector of ``sig`` by ``D`` in place."""
    from .signal import Domain

    if sig.space_domain is not Domain.SH:
        raise DimensionError("rotate_sh needs a signal in the SH domain")
    mat = D.matrix if isinstance(D, WignerDMatrix) else np.asarray(D)
    if mat.shape != (sig.n_spatial, sig.n_spatial):
        raise DimensionError(f"rotation of shape {mat.shape} cannot act on "
                             f"order-{sig.sh_order} signal")
    sig.data = apply_rotation(D, sig.data)
    return sig

"""Unitary transforms and small dense linear algebra.

Every transform uses the unitary ``1/sqrt(N)`` scaling, so forward and inverse
are adjoint to each other and Parseval holds exactly up to rounding. Arrays are
transformed along ``axis`` (default 0, i.e. column-wise on an ``N x M`` grid);
any leading or trailing batch dimensions are carried through untouched.

Conventions
-----------
* Chirp diagonal: ``[Lambda_c]_{n,n} = exp(j 2 pi c n^2)``, ``n = 0..N-1``.
* DAFT: ``A = Lambda_c2 F Lambda_c1`` with ``F`` the unitary DFT
  (``exp(-j 2 pi k n / N) / sqrt(N)``).
* DFnT: the DAFT with ``c1 = c2 = 1/(2N)`` and *no* extra global phase.
  For even ``N`` this equals the textbook Fresnel matrix
  ``exp(-j pi/4) exp(j pi (m - n)^2 / N) / sqrt(N)`` times ``exp(j pi/4)``.
* ISFFT: delay-Doppler grid (rows = delay, columns = Doppler) to
  time-frequency grid (rows = subcarrier, columns = symbol),
  ``X[n, m] = sum_{l,k} x[l, k] exp(-j 2 pi n l / N) exp(+j 2 pi m k / M) / sqrt(NM)``.

The FFTs come from :mod:`numpy.fft` (pocketfft), which handles any length,
prime lengths included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError, NumericError

#: Pivot threshold below which a Hermitian matrix is treated as not positive definite.
PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class ChirpParams:
    """Quadratic-phase parameters of a discrete affine Fourier transform.

    Attributes:
        c1: Chirp rate applied before the DFT, in cycles per sample squared.
        c2: Chirp rate applied after the DFT, in cycles per sample squared.
        N: Transform length.
    """

    c1: float
    c2: float
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise InvalidArgumentError(f"N must be an integer >= 2, got {self.N!r}")
        if not (np.isfinite(self.c1) and np.isfinite(self.c2)):
            raise InvalidArgumentError("chirp rates c1, c2 must be finite")

    @classmethod
    def fresnel(cls, N: int) -> ChirpParams:
        """Parameters that turn the DAFT into the DFnT (``c1 = c2 = 1/(2N)``)."""
        return cls(c1=1.0 / (2 * N), c2=1.0 / (2 * N), N=N)

    @classmethod
    def for_doppler_spread(cls, N: int, a_max: int) -> ChirpParams:
        """Default AFDM rule for a channel with integer Doppler spread ``a_max``.

        ``c1 = (2 a_max + 1) / (2N)`` separates every (delay, Doppler) path in
        the DAFT domain as long as ``(l_max + 1)(2 a_max + 1) <= N``;
        ``c2 = 1 / (2 N^2)``.
        """
        return cls(c1=(2 * a_max + 1) / (2 * N), c2=1.0 / (2 * N * N), N=N)


def _as_complex(x) -> np.ndarray:
    x = np.asarray(x)
    if x.dtype != np.complex128:
        x = x.astype(np.complex128)
    return x


def _check_len(x: np.ndarray, axis: int, minimum: int) -> int:
    if x.ndim == 0:
        raise InvalidArgumentError("expected an array, got a scalar")
    n = x.shape[axis]
    if n < minimum:
        raise InvalidArgumentError(f"transform length must be >= {minimum}, got {n}")
    return n


def _along(vec: np.ndarray, ndim: int, axis: int) -> np.ndarray:
    """Reshape a 1-D vector so it broadcasts along ``axis`` of an ``ndim`` array."""
    shape = [1] * ndim
    shape[axis] = vec.shape[0]
    return vec.reshape(shape)


def dft(x, axis: int = 0) -> np.ndarray:
    """Unitary DFT along ``axis``."""
    x = _as_complex(x)
    _check_len(x, axis, 1)
    return np.fft.fft(x, axis=axis, norm="ortho")


def idft(x, axis: int = 0) -> np.ndarray:
    """Unitary inverse DFT along ``axis``."""
    x = _as_complex(x)
    _check_len(x, axis, 1)
    return np.fft.ifft(x, axis=axis, norm="ortho")


def chirp_phase(c: float, N: int) -> np.ndarray:
    """Diagonal of ``Lambda_c`` as a length-``N`` vector."""
    if N < 2:
        raise InvalidArgumentError(f"N must be >= 2, got {N}")
    n = np.arange(N, dtype=np.float64)
    # Reduce c n^2 modulo 1 in extended precision so large N keeps its phase accuracy.
    frac = np.mod(np.longdouble(c) * n.astype(np.longdouble) ** 2, 1).astype(np.float64)
    return np.exp(2j * np.pi * frac)


def lambda_matrix(c: float, N: int) -> np.ndarray:
    """Dense diagonal chirp matrix ``Lambda_c`` of size ``N x N``."""
    return np.diag(chirp_phase(c, N))


def daft(x, p: ChirpParams, axis: int = 0) -> np.ndarray:
    """Discrete affine Fourier transform ``Lambda_c2 F Lambda_c1 x`` along ``axis``."""
    x = _as_complex(x)
    n = _check_len(x, axis, 2)
    if n != p.N:
        raise InvalidArgumentError(f"length {n} does not match ChirpParams.N = {p.N}")
    axis = axis % x.ndim
    pre = _along(chirp_phase(p.c1, n), x.ndim, axis)
    post = _along(chirp_phase(p.c2, n), x.ndim, axis)
    return post * np.fft.fft(pre * x, axis=axis, norm="ortho")


def idaft(y, p: ChirpParams, axis: int = 0) -> np.ndarray:
    """Inverse DAFT, ``A^H y = Lambda_c1^H F^H Lambda_c2^H y``."""
    y = _as_complex(y)
    n = _check_len(y, axis, 2)
    if n != p.N:
        raise InvalidArgumentError(f"length {n} does not match ChirpParams.N = {p.N}")
    axis = axis % y.ndim
    pre = _along(chirp_phase(p.c1, n), y.ndim, axis)
    post = _along(chirp_phase(p.c2, n), y.ndim, axis)
    return pre.conj() * np.fft.ifft(post.conj() * y, axis=axis, norm="ortho")


def dfnt(x, axis: int = 0) -> np.ndarray:
    """Discrete Fresnel transform (DAFT with ``c1 = c2 = 1/(2N)``)."""
    x = _as_complex(x)
    n = _check_len(x, axis, 2)
    return daft(x, ChirpParams.fresnel(n), axis=axis)


def idfnt(y, axis: int = 0) -> np.ndarray:
    """Inverse discrete Fresnel transform."""
    y = _as_complex(y)
    n = _check_len(y, axis, 2)
    return idaft(y, ChirpParams.fresnel(n), axis=axis)


def isfft(grid, axes: tuple[int, int] = (-2, -1)) -> np.ndarray:
    """Delay-Doppler grid to time-frequency grid (OTFS transform)."""
    grid = _as_complex(grid)
    if grid.ndim < 2 or grid.size == 0:
        raise InvalidArgumentError("isfft needs a non-empty 2-D grid")
    delay_axis, doppler_axis = axes
    tf = np.fft.fft(grid, axis=delay_axis, norm="ortho")
    return np.fft.ifft(tf, axis=doppler_axis, norm="ortho")


def sfft(grid, axes: tuple[int, int] = (-2, -1)) -> np.ndarray:
    """Time-frequency grid back to the delay-Doppler grid; inverse of :func:`isfft`."""
    grid = _as_complex(grid)
    if grid.ndim < 2 or grid.size == 0:
        raise InvalidArgumentError("sfft needs a non-empty 2-D grid")
    delay_axis, doppler_axis = axes
    dd = np.fft.ifft(grid, axis=delay_axis, norm="ortho")
    return np.fft.fft(dd, axis=doppler_axis, norm="ortho")


def transform_matrix(transform, N: int) -> np.ndarray:
    """Dense matrix of a linear length-``N`` transform, built column by column."""
    return transform(np.eye(N, dtype=np.complex128), axis=0)


def hermitian_solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` for Hermitian positive definite ``A``.

    ``A`` may be a stack of matrices (``(..., n, n)``) with ``b`` of shape
    ``(..., n)`` or ``(..., n, k)``. Positive definiteness is established with
    a Cholesky factorisation before solving.

    Raises:
        InvalidArgumentError: ``A`` is not square or shapes disagree.
        NumericError: ``A`` is not positive definite (a Cholesky pivot falls
            below ``PIVOT_TOL``).
    """
    A = _as_complex(A)
    b = _as_complex(b)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise InvalidArgumentError(f"A must be square, got shape {A.shape}")
    n = A.shape[-1]
    vector_rhs = b.ndim == A.ndim - 1
    if b.shape[-1 if vector_rhs else -2] != n:
        raise InvalidArgumentError(f"b with shape {b.shape} does not match A with shape {A.shape}")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NumericError("matrix is not positive definite") from exc
    pivots = np.abs(np.diagonal(L, axis1=-2, axis2=-1)) ** 2
    if not np.all(np.isfinite(pivots)) or pivots.min() < PIVOT_TOL:
        raise NumericError(f"Cholesky pivot {pivots.min():.3e} below {PIVOT_TOL:g}")
    rhs = b[..., None] if vector_rhs else b
    x = np.linalg.solve(A, rhs)
    return x[..., 0] if vector_rhs else x

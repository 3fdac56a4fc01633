"""Fourier machinery on the flat torus T^d (d = 1, 2).

Grids are uniform, ``theta_m = 2 pi m / M``, with the last ``d`` array axes
being the grid axes.  Complex inputs are transformed part by part, so a
complex-step perturbation never picks up FFT round-off from the real part.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError


def wavenumbers(M: int) -> np.ndarray:
    return np.fft.fftfreq(M, 1.0 / M)


def padded_size(N: int) -> int:
    """Odd grid size satisfying the 3/2 dealiasing rule for cutoff ``N``."""
    M = 3 * N + 1
    return M if M % 2 else M + 1


def grid_points(M: int, d: int) -> tuple[np.ndarray, ...]:
    theta = 2 * np.pi * np.arange(M) / M
    return tuple(np.meshgrid(*([theta] * d), indexing="ij"))


def _axes(d: int) -> tuple[int, ...]:
    return tuple(range(-d, 0))


def deriv(f: np.ndarray, d: int, alpha: tuple[int, ...]) -> np.ndarray:
    """Spectral partial derivative ``d^alpha f`` over the last ``d`` axes."""
    if len(alpha) != d:
        raise DimensionError(f"multi-index {alpha} does not match d={d}")
    if not any(alpha):
        return f
    if np.iscomplexobj(f):
        # split so FFT round-off never leaks into the complex-step channel
        return deriv(f.real, d, alpha) + 1j * deriv(f.imag, d, alpha)
    M = f.shape[-1]
    F = np.fft.fftn(f, axes=_axes(d))
    k = wavenumbers(M)
    if M % 2 == 0:
        k = k.copy()
        k[M // 2] = 0.0
    for ax, a in enumerate(alpha):
        if a:
            shape = [1] * d
            shape[ax] = M
            F = F * ((1j * k) ** a).reshape(shape)
    return np.ascontiguousarray(np.fft.ifftn(F, axes=_axes(d)).real)


def gradient(f: np.ndarray, d: int) -> np.ndarray:
    """Stack of first partials, new trailing axis of length ``d``."""
    return np.stack([deriv(f, d, tuple(int(i == a) for i in range(d))) for a in range(d)], axis=-1)


def resample(f: np.ndarray, d: int, M_new: int) -> np.ndarray:
    """Band-limited interpolation of grid values onto an ``M_new`` grid."""
    M = f.shape[-1]
    if M_new == M:
        return f
    if np.iscomplexobj(f):
        return resample(f.real, d, M_new) + 1j * resample(f.imag, d, M_new)
    F = np.fft.fftn(f, axes=_axes(d)) / M**d
    k_old = wavenumbers(M).astype(int)
    if M % 2 == 0:
        keep = np.abs(k_old) < M // 2
    else:
        keep = np.ones(M, dtype=bool)
    if M_new < M:
        keep &= np.abs(k_old) <= (M_new - 1) // 2
    idx_old = np.nonzero(keep)[0]
    idx_new = k_old[idx_old] % M_new
    lead = f.shape[:-d]
    G = np.zeros(lead + (M_new,) * d, dtype=complex)
    sl_old = np.ix_(*([idx_old] * d))
    sl_new = np.ix_(*([idx_new] * d))
    G[(Ellipsis,) + sl_new] = F[(Ellipsis,) + sl_old]
    return np.ascontiguousarray((np.fft.ifftn(G, axes=_axes(d)) * M_new**d).real)


class RealFourierBasis:
    """Flat-orthonormal real trigonometric basis without the constant mode.

    Functions are ``sqrt(2) cos(k.theta)`` and ``sqrt(2) sin(k.theta)`` for
    ``k`` on a half-lattice with ``|k_i| <= N``, ordered (cos, sin) per ``k``
    and ``k`` sorted by |k| then lexicographically.  "Orthonormal" means the
    grid mean of ``phi_i phi_j`` is ``delta_ij``.
    """

    def __init__(self, d: int, N: int):
        if d not in (1, 2):
            raise DimensionError(f"only tori of dimension 1 or 2 are supported, got {d}")
        if N < 1:
            raise ValueError("cutoff must be positive")
        self.d = d
        self.N = N
        ks = []
        for k in itertools.product(range(-N, N + 1), repeat=d):
            if any(k) and k > tuple(-c for c in k):
                ks.append(k)
        ks.sort(key=lambda k: (sum(c * c for c in k), tuple(-c for c in k)))
        self.wavevectors = np.array(ks, dtype=int)

    @property
    def size(self) -> int:
        return 2 * len(self.wavevectors)

    @property
    def collocation_size(self) -> int:
        return 2 * self.N + 1

    def labels(self) -> list[tuple[tuple[int, ...], str]]:
        out = []
        for k in self.wavevectors:
            out.append((tuple(int(c) for c in k), "cos"))
            out.append((tuple(int(c) for c in k), "sin"))
        return out

    def _flat_indices(self, M: int):
        if M < self.collocation_size:
            raise ValueError(f"grid of size {M} cannot resolve cutoff {self.N}")
        plus = np.ravel_multi_index(tuple((self.wavevectors % M).T), (M,) * self.d)
        minus = np.ravel_multi_index(tuple((-self.wavevectors % M).T), (M,) * self.d)
        return plus, minus

    def evaluate(self, coeffs: np.ndarray, M: int | None = None) -> np.ndarray:
        """Grid values of ``sum_i c_i phi_i``; ``coeffs`` may carry leading batch axes."""
        M = M or self.collocation_size
        c = np.asarray(coeffs)
        if np.iscomplexobj(c):
            return self.evaluate(c.real, M) + 1j * self.evaluate(c.imag, M)
        if c.shape[-1] != self.size:
            raise DimensionError(f"expected {self.size} coefficients, got {c.shape[-1]}")
        lead = c.shape[:-1]
        a = c[..., 0::2]
        b = c[..., 1::2]
        plus, minus = self._flat_indices(M)
        F = np.zeros(lead + (M**self.d,), dtype=complex)
        F[..., plus] = (a - 1j * b) / np.sqrt(2.0)
        F[..., minus] = (a + 1j * b) / np.sqrt(2.0)
        F = F.reshape(lead + (M,) * self.d)
        return np.ascontiguousarray((np.fft.ifftn(F, axes=_axes(self.d)) * M**self.d).real)

    def project(self, values: np.ndarray) -> np.ndarray:
        """Coefficients of the flat L2 projection (drops the mean)."""
        v = np.asarray(values)
        if np.iscomplexobj(v):
            return self.project(v.real) + 1j * self.project(v.imag)
        M = v.shape[-1]
        lead = v.shape[: v.ndim - self.d]
        F = (np.fft.fftn(v, axes=_axes(self.d)) / M**self.d).reshape(lead + (M**self.d,))
        plus, minus = self._flat_indices(M)
        Fp, Fm = F[..., plus], F[..., minus]
        out = np.empty(lead + (self.size,))
        out[..., 0::2] = ((Fp + Fm) / np.sqrt(2.0)).real
        out[..., 1::2] = (1j * (Fp - Fm) / np.sqrt(2.0)).real
        return out

    def derivative(self, coeffs: np.ndarray, alpha: tuple[int, ...]) -> np.ndarray:
        """Coefficients of ``d^alpha f``; exact, since the basis is closed under derivatives."""
        c = np.asarray(coeffs)
        K = np.prod(self.wavevectors.astype(float) ** np.asarray(alpha), axis=1)
        a, b = c[..., 0::2] * K, c[..., 1::2] * K
        s = sum(alpha) % 4
        # d(a cos + b sin) = b k cos - a k sin; the pattern repeats with period 4
        a, b = [(a, b), (b, -a), (-a, -b), (-b, a)][s]
        out = np.empty_like(c, dtype=np.result_type(c, float))
        out[..., 0::2] = a
        out[..., 1::2] = b
        return out

    def _pair_indices(self, M: int):
        """Flat grid indices of ``k_i - k_j`` and ``k_i + k_j`` (cached per grid size)."""
        cache = self.__dict__.setdefault("_pair_cache", {})
        if M not in cache:
            k = self.wavevectors
            shape = (M,) * self.d
            diff = ((k[:, None, :] - k[None, :, :]) % M).transpose(2, 0, 1)
            summ = ((k[:, None, :] + k[None, :, :]) % M).transpose(2, 0, 1)
            cache[M] = (np.ravel_multi_index(tuple(diff), shape), np.ravel_multi_index(tuple(summ), shape))
        return cache[M]

    def weighted_gram(self, weights: np.ndarray) -> np.ndarray:
        """``sum_p phi_i(p) w(p) phi_j(p)`` over an ``M^d`` grid, for weights ``(..., M, .., M)``.

        Products of trigonometric modes are modes at ``k_i +- k_j``, so the
        grid sum is read off the DFT of ``w``; the result equals the direct
        quadrature, aliasing included, at ``O(n^2)`` cost per weight.
        """
        w = np.asarray(weights, dtype=float)
        M = w.shape[-1]
        lead = w.shape[: w.ndim - self.d]
        C = np.fft.fftn(w, axes=_axes(self.d)).reshape(lead + (M**self.d,))
        minus, plus = self._pair_indices(M)
        Cm, Cp = C[..., minus], C[..., plus]
        # C(m) = sum w exp(-i m.theta): Re C = sum w cos, Im C = -sum w sin
        out = np.empty(lead + (self.size, self.size))
        out[..., 0::2, 0::2] = Cm.real + Cp.real
        out[..., 1::2, 1::2] = Cm.real - Cp.real
        out[..., 0::2, 1::2] = Cm.imag - Cp.imag
        out[..., 1::2, 0::2] = -Cm.imag - Cp.imag
        return out

    def matrix(self, M: int) -> np.ndarray:
        """All basis functions on an ``M^d`` grid, shape ``(size, M**d)``."""
        return self.evaluate(np.eye(self.size), M).reshape(self.size, -1)

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        k2 = np.sum(self.wavevectors**2, axis=1).astype(float)
        return np.repeat(k2, 2)


@dataclass(frozen=True)
class SpectralField:
    """Real field on T^d stored by its values on a uniform odd grid."""

    values: np.ndarray
    d: int

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != self.d or len(set(v.shape)) != 1:
            raise DimensionError(f"values of shape {v.shape} are not a {self.d}-d square grid")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def cutoff(self) -> int:
        return (self.M - 1) // 2

    @classmethod
    def from_coeffs(cls, basis: RealFourierBasis, coeffs, mean: float = 0.0, M: int | None = None):
        return cls(basis.evaluate(np.asarray(coeffs, dtype=float), M) + mean, basis.d)

    @classmethod
    def zeros(cls, d: int, N: int) -> "SpectralField":
        return cls(np.zeros((2 * N + 1,) * d), d)

    def modes(self) -> np.ndarray:
        """Complex Fourier coefficients ``f = sum F_k exp(i k.theta)`` (FFT order)."""
        return np.fft.fftn(self.values) / self.M**self.d

    def conjugate_symmetry_error(self) -> float:
        F = self.modes()
        neg = (-np.arange(self.M)) % self.M
        Fneg = np.conj(F[np.ix_(*([neg] * self.d))])
        return float(np.max(np.abs(F - Fneg)))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def derivative(self, alpha: tuple[int, ...]) -> "SpectralField":
        return SpectralField(deriv(self.values, self.d, alpha), self.d)

    def resample(self, M: int) -> "SpectralField":
        return SpectralField(resample(self.values, self.d, M), self.d)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

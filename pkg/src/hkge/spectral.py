"""Orthonormal DFT of real signals and its half-spectrum packing.

A real signal of even length N is represented in frequency space by its
first N/2 + 1 coefficients; the rest follow from conjugate symmetry.  Both
directions use the 1/sqrt(N) normalisation, so the forward map is an
isometry under the packed weighting (see :func:`packed_energy`).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import autograd as ad
from .errors import DomainError, StructuralError

_ENDPOINT_TOL = 1e-12


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@lru_cache(maxsize=None)
def _plan(n: int):
    """Bit-reversal permutation and per-stage twiddles for a length-n FFT."""
    bits = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.intp)
    for i in range(n):
        rev[i] = int(format(i, f"0{bits}b")[::-1], 2) if bits else 0
    twiddles = []
    size = 2
    while size <= n:
        tw = np.exp(-2j * np.pi * np.arange(size // 2) / size)
        tw.flags.writeable = False
        twiddles.append(tw)
        size *= 2
    rev.flags.writeable = False
    return rev, tuple(twiddles)


def fft(x: np.ndarray) -> np.ndarray:
    """Unnormalised forward DFT along the last axis.

    Iterative radix-2 decimation in time for power-of-two lengths, direct
    O(N^2) summation otherwise.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if not is_power_of_two(n):
        k = np.arange(n)
        mat = np.exp(-2j * np.pi * np.outer(k, k) / n)
        return x @ mat
    rev, twiddles = _plan(n)
    a = x[..., rev]
    lead = a.shape[:-1]
    size = 2
    for tw in twiddles:
        half = size // 2
        a = a.reshape(lead + (n // size, 2, half))
        even = a[..., 0, :]
        odd = a[..., 1, :] * tw
        a = np.stack((even + odd, even - odd), axis=-2)
        size *= 2
    return a.reshape(lead + (n,))


def _check_signal(x) -> int:
    n = np.shape(x)[-1] if np.ndim(x) else 0
    if n == 0 or n % 2:
        raise StructuralError(f"signal length must be even and positive, got {n}")
    return n


def dft_forward(x) -> np.ndarray:
    """Orthonormal DFT of a real signal, packed to its first N/2 + 1 terms."""
    x = np.asarray(x, dtype=np.float64)
    n = _check_signal(x)
    z = fft(x)[..., : n // 2 + 1] / np.sqrt(n)
    z[..., 0] = z[..., 0].real
    z[..., -1] = z[..., -1].real
    return z


def _full_spectrum(z: np.ndarray) -> np.ndarray:
    """Conjugate-symmetric extension of a packed half spectrum."""
    mid = np.conj(z[..., -2:0:-1])
    return np.concatenate((z, mid), axis=-1)


def dft_inverse(z) -> np.ndarray:
    """Real signal of length 2(n - 1) whose packed spectrum is ``z``."""
    z = np.asarray(z, dtype=np.complex128)
    m = np.shape(z)[-1] if z.ndim else 0
    if m < 2:
        raise StructuralError(f"half spectrum needs at least 2 coefficients, got {m}")
    scale = max(1.0, float(np.max(np.abs(z)))) if z.size else 1.0
    ends = np.abs(z[..., [0, -1]].imag)
    if np.any(ends > _ENDPOINT_TOL * scale):
        raise DomainError("first and last packed coefficients must be real")
    full = _full_spectrum(z)
    n = full.shape[-1]
    # ortho inverse: conj(F(conj(Z))) / sqrt(N)
    return np.conj(fft(np.conj(full))).real / np.sqrt(n)


def packed_energy(z) -> np.ndarray:
    """|z_0|^2 + 2 * sum |z_q|^2 (interior) + |z_{N/2}|^2, equal to ||x||^2."""
    p = np.abs(np.asarray(z)) ** 2
    return p[..., 0] + p[..., -1] + 2.0 * np.sum(p[..., 1:-1], axis=-1)


def circular_convolve_reference(x, y) -> np.ndarray:
    """Direct O(N^2) circular convolution, sum_p x_p y_{(k - p) mod N}."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise StructuralError(f"length mismatch {x.shape} vs {y.shape}")
    n = x.shape[-1]
    out = np.zeros_like(x)
    for k in range(n):
        for p in range(n):
            out[..., k] += x[..., p] * y[..., (k - p) % n]
    return out


def spectral_convolve(x, y) -> np.ndarray:
    """Circular convolution through the orthonormal transforms.

    With 1/sqrt(N) on both directions the product of spectra carries one
    extra 1/sqrt(N), hence the sqrt(N) factor.
    """
    n = _check_signal(x)
    return np.sqrt(n) * dft_inverse(dft_forward(x) * dft_forward(y))


# -- differentiable wrappers -----------------------------------------------

def _interior_weights(m: int) -> np.ndarray:
    w = np.full(m, 2.0)
    w[0] = w[-1] = 1.0
    return w


def dft_pair(x):
    """Packed forward DFT returning (real, imag) arrays or tensors.

    The map is linear, so its backward pass only needs the adjoint, which
    is the inverse transform applied to the halved interior cotangents.
    """
    xv = ad.value(x)
    z = dft_forward(xv)
    if not isinstance(x, ad.Tensor):
        return z.real.copy(), z.imag.copy()
    m = z.shape[-1]
    half = 1.0 / _interior_weights(m)

    def vjp(g):
        gz = (g[..., 0, :] + 1j * g[..., 1, :]) * half
        gz[..., 0] = gz[..., 0].real
        gz[..., -1] = gz[..., -1].real
        return (dft_inverse(gz),)

    packed = ad.record("dft", (x,), np.stack((z.real, z.imag), axis=-2), vjp)
    return packed[..., 0, :], packed[..., 1, :]


def idft_pair(re, im):
    """Inverse of :func:`dft_pair`; imaginary endpoint entries get zero gradient."""
    z = ad.value(re) + 1j * ad.value(im)
    x = dft_inverse(z)
    if not (isinstance(re, ad.Tensor) or isinstance(im, ad.Tensor)):
        return x
    w = _interior_weights(z.shape[-1])

    def vjp(g):
        gz = dft_forward(g) * w
        return ad.unbroadcast(gz.real, np.shape(ad.value(re))), \
            ad.unbroadcast(gz.imag, np.shape(ad.value(im)))

    return ad.record("idft", (re, im), x, vjp)

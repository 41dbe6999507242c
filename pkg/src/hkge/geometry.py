"""Poincare-ball and complex unit-ball operations.

All functions work on the last axis and broadcast over leading axes.  The
curvature ``c`` (the ball has curvature -c) may be a float, an array shaped
to broadcast against ``(..., 1)``, or a :class:`~hkge.autograd.Tensor`.

Complex ball points are either complex numpy arrays or (real, imag) pairs;
the pair form is what the training path uses.
"""
from __future__ import annotations

import numpy as np

from . import autograd as ad
from .errors import DomainError, StructuralError

BALL_EPS = 1e-5
MIN_NORM = 1e-12
_DEN_MIN = 1e-15


def _check_c(c):
    if np.any(np.asarray(ad.value(c)) <= 0):
        raise DomainError("curvature c must be strictly positive")


def _check_same_dim(x, y):
    sx, sy = np.shape(ad.value(x)), np.shape(ad.value(y))
    if not sx or not sy or sx[-1] != sy[-1]:
        raise StructuralError(f"dimension mismatch: {sx} vs {sy}")


def project(x, c):
    """Pull ``x`` back to norm <= (1 - eps) / sqrt(c) when it strays outside."""
    max_norm = (1.0 - BALL_EPS) / ad.sqrt(c)
    n = ad.clamp(ad.norm(x), lo=_DEN_MIN)
    return x * ad.clamp(max_norm / n, hi=1.0)


def mobius_add(x, y, c):
    _check_same_dim(x, y)
    _check_c(c)
    xy = ad.inner(x, y)
    x2 = ad.inner(x, x)
    y2 = ad.inner(y, y)
    num = (1.0 + 2.0 * c * xy + c * y2) * x + (1.0 - c * x2) * y
    den = 1.0 + 2.0 * c * xy + c * c * x2 * y2
    return project(num / ad.clamp(den, lo=_DEN_MIN), c)


def poincare_distance(x, y, c, keepdims=False):
    """Geodesic distance (2/sqrt c) artanh(sqrt c ||(-x) (+) y||)."""
    _check_c(c)
    sc = ad.sqrt(c)
    d = 2.0 / sc * ad.artanh(sc * ad.norm(mobius_add(-x, y, c)))
    return d if keepdims else d[..., 0]


def exp_map_zero(v, c):
    """Exponential map at the origin, tangent space -> ball."""
    _check_c(c)
    sc = ad.sqrt(c)
    scaled = sc * ad.clamp(ad.norm(v), lo=MIN_NORM)
    return project(ad.tanh(scaled) * v / scaled, c)


def log_map_zero(y, c):
    """Logarithmic map at the origin, ball -> tangent space."""
    _check_c(c)
    sc = ad.sqrt(c)
    scaled = sc * ad.clamp(ad.norm(y), lo=MIN_NORM)
    return ad.artanh(scaled) * y / scaled


# -- complex unit ball -----------------------------------------------------

def _as_pair(z):
    if isinstance(z, tuple):
        return z
    z = np.asarray(z)
    return z.real.astype(np.float64), z.imag.astype(np.float64)


def hermitian_form_pair(z, w):
    """<z, w> = sum z_i conj(w_i) - 1 as a (real, imag) pair, keepdims."""
    zr, zi = z
    wr, wi = w
    _check_same_dim(zr, wr)
    pr, pi = ad.complex_mul(zr, zi, *ad.complex_conj(wr, wi))
    return ad.sum(pr, axis=-1, keepdims=True) - 1.0, ad.sum(pi, axis=-1, keepdims=True)


def hermitian_form(z, w) -> np.ndarray:
    """Hermitian form of the unit-ball model with the homogeneous 1 implied."""
    re, im = hermitian_form_pair(_as_pair(z), _as_pair(w))
    return (re + 1j * im)[..., 0]


def project_complex(z):
    """Clamp a (real, imag) pair to Euclidean norm <= 1 - eps."""
    zr, zi = z
    n = ad.clamp(ad.sqrt(ad.inner(zr, zr) + ad.inner(zi, zi)), lo=_DEN_MIN)
    f = ad.clamp((1.0 - BALL_EPS) / n, hi=1.0)
    return zr * f, zi * f


def bergman_distance(z, w, keepdims=False):
    """arcosh(2 <z,w><w,z> / (<z,z><w,w>) - 1) on the complex unit ball."""
    z = project_complex(_as_pair(z))
    w = project_complex(_as_pair(w))
    zr, zi = z
    wr, wi = w
    _check_same_dim(zr, wr)
    hr, hi = hermitian_form_pair(z, w)
    zz = ad.inner(zr, zr) + ad.inner(zi, zi) - 1.0
    ww = ad.inner(wr, wr) + ad.inner(wi, wi) - 1.0
    d = ad.arcosh(2.0 * (hr * hr + hi * hi) / (zz * ww) - 1.0)
    return d if keepdims else d[..., 0]

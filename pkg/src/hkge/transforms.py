"""Relation-specific maps inside the Poincare ball."""
from __future__ import annotations

import numpy as np

from . import autograd as ad
from .errors import ConfigurationError, StructuralError
from .geometry import exp_map_zero, log_map_zero, mobius_add, project

BASE_VARIANTS = ("RefH", "RotH", "AttH")


def _givens(x, angles, reflect: bool):
    xv, av = ad.value(x), ad.value(angles)
    n = np.shape(xv)[-1]
    if n % 2 or np.shape(av)[-1] != n // 2:
        raise StructuralError(
            f"need {n // 2} angles for dimension {n}, got {np.shape(av)[-1]}")
    cos, sin = np.cos(av), np.sin(av)
    xe, xo = xv[..., 0::2], xv[..., 1::2]
    if reflect:
        ye, yo = cos * xe + sin * xo, sin * xe - cos * xo
    else:
        ye, yo = cos * xe - sin * xo, sin * xe + cos * xo
    out = np.empty(np.broadcast_shapes(np.shape(xv), ye.shape[:-1] + (n,)))
    out[..., 0::2], out[..., 1::2] = ye, yo
    if not (isinstance(x, ad.Tensor) or isinstance(angles, ad.Tensor)):
        return out

    def vjp(g):
        ge, go = g[..., 0::2], g[..., 1::2]
        gx = np.empty(g.shape)
        if reflect:
            gx[..., 0::2], gx[..., 1::2] = cos * ge + sin * go, sin * ge - cos * go
        else:
            gx[..., 0::2], gx[..., 1::2] = cos * ge + sin * go, -sin * ge + cos * go
        # d/dangle of (ye, yo) is (-yo, ye) for both block kinds
        ga = go * ye - ge * yo
        return ad.unbroadcast(gx, np.shape(xv)), ad.unbroadcast(ga, np.shape(av))

    return ad.record("givens", (x, angles), out, vjp)


def givens_rotate(x, theta):
    """Apply diag(G+(theta_j)) to consecutive coordinate pairs."""
    return _givens(x, theta, reflect=False)


def givens_reflect(x, phi):
    """Apply diag(G-(phi_j)); each block is a symmetric involution."""
    return _givens(x, phi, reflect=True)


def attention_weights(u, v, a):
    return ad.softmax(ad.stack([ad.inner(a, u), ad.inner(a, v)], axis=-1), axis=-1)


def hyperbolic_attention(q_rot, q_ref, a, c):
    """Softmax-weighted tangent-space midpoint of two ball points."""
    u = log_map_zero(q_rot, c)
    v = log_map_zero(q_ref, c)
    w = attention_weights(u, v, a)
    return exp_map_zero(w[..., 0] * u + w[..., 1] * v, c)


def base_variant(variant: str) -> str:
    name = variant[3:] if variant.startswith("FFT") else variant
    if name not in BASE_VARIANTS:
        raise ConfigurationError(f"unknown model variant {variant!r}")
    return name


def apply_relation(h, rel, variant: str, c=None):
    """Transform a lifted head point by relation parameters ``rel``.

    ``rel`` needs ``rotation``, ``reflection``, ``translation``, ``attention``
    and ``raw_curvature`` attributes (see :class:`hkge.model.RelationParams`);
    ``c`` defaults to softplus(raw_curvature).  The translation is stored in
    the tangent space and lifted with the same curvature before the Mobius
    addition.
    """
    kind = base_variant(variant)
    if c is None:
        c = ad.softplus(rel.raw_curvature)
    if kind == "RotH":
        q = givens_rotate(h, rel.rotation)
    elif kind == "RefH":
        q = givens_reflect(h, rel.reflection)
    else:
        q = hyperbolic_attention(givens_rotate(h, rel.rotation),
                                 givens_reflect(h, rel.reflection),
                                 rel.attention, c)
    r = exp_map_zero(rel.translation, c)
    return project(mobius_add(q, r, c), c)

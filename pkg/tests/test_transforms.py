import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hkge.errors import ConfigurationError, StructuralError
from hkge.geometry import exp_map_zero, log_map_zero, mobius_add
from hkge.transforms import (
    apply_relation,
    attention_weights,
    givens_reflect,
    givens_rotate,
    hyperbolic_attention,
)


def rel(n, rot=None, ref=None, trans=None, att=None, raw_c=0.0):
    return SimpleNamespace(
        rotation=np.zeros(n // 2) if rot is None else np.asarray(rot, float),
        reflection=np.zeros(n // 2) if ref is None else np.asarray(ref, float),
        translation=np.zeros(n) if trans is None else np.asarray(trans, float),
        attention=np.zeros(n) if att is None else np.asarray(att, float),
        raw_curvature=np.array([raw_c]))


def test_rotation_identity_and_quarter_turn():
    x = np.array([0.3, -0.2, 0.5, 0.1])
    np.testing.assert_array_equal(givens_rotate(x, np.zeros(2)), x)
    np.testing.assert_allclose(givens_rotate(np.array([1.0, 0.0]), [math.pi / 2]), [0, 1],
                               atol=1e-15)


def test_reflection_examples():
    np.testing.assert_array_equal(givens_reflect(np.array([1.0, 0]), [0.0]), [1, 0])
    np.testing.assert_array_equal(givens_reflect(np.array([0.0, 1]), [0.0]), [0, -1])
    np.testing.assert_allclose(givens_reflect(np.array([0.6, 0.8]), [math.pi / 2]), [0.8, 0.6],
                               atol=1e-15)


def block_matrix(angles, reflect):
    n = 2 * len(angles)
    m = np.zeros((n, n))
    for j, a in enumerate(angles):
        c, s = math.cos(a), math.sin(a)
        m[2 * j:2 * j + 2, 2 * j:2 * j + 2] = [[c, s], [s, -c]] if reflect else [[c, -s], [s, c]]
    return m


@pytest.mark.parametrize("reflect", [False, True])
def test_matches_dense_block_diagonal(reflect):
    rng = np.random.default_rng(0)
    angles = rng.uniform(-math.pi, math.pi, 4)
    x = rng.standard_normal((10, 8))
    fn = givens_reflect if reflect else givens_rotate
    np.testing.assert_allclose(fn(x, angles), x @ block_matrix(angles, reflect).T, atol=1e-14)


@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6),
       st.lists(st.floats(-math.pi, math.pi), min_size=3, max_size=3))
@settings(max_examples=200, deadline=None)
def test_norm_preserved_and_reflection_involutive(x, angles):
    x = np.array(x)
    for fn in (givens_rotate, givens_reflect):
        assert abs(np.linalg.norm(fn(x, angles)) - np.linalg.norm(x)) < 1e-12 * max(1, np.linalg.norm(x))
    np.testing.assert_allclose(givens_reflect(givens_reflect(x, angles), angles), x, atol=1e-12)


def test_rotation_composition():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((20, 8))
    t1, t2 = rng.uniform(-math.pi, math.pi, (2, 4))
    np.testing.assert_allclose(givens_rotate(givens_rotate(x, t1), t2), givens_rotate(x, t1 + t2),
                               atol=1e-10)


def test_size_mismatch():
    with pytest.raises(StructuralError):
        givens_rotate(np.zeros(4), np.zeros(3))
    with pytest.raises(StructuralError):
        givens_reflect(np.zeros(5), np.zeros(2))


class TestAttention:
    def test_equal_inputs(self):
        p = np.array([0.2, -0.1, 0.3, 0.05])
        out = hyperbolic_attention(p, p, np.array([1.0, 2, -1, 0.5]), 1.0)
        np.testing.assert_allclose(out, p, atol=1e-12)

    def test_zero_attention_is_tangent_midpoint(self):
        a, b = np.array([0.3, 0.1]), np.array([-0.2, 0.4])
        c = 0.7
        want = exp_map_zero(0.5 * log_map_zero(a, c) + 0.5 * log_map_zero(b, c), c)
        np.testing.assert_allclose(hyperbolic_attention(a, b, np.zeros(2), c), want, atol=1e-15)

    def test_saturation(self):
        q_rot, q_ref = np.array([0.3, 0.1]), np.array([-0.2, 0.4])
        u, v = log_map_zero(q_rot, 1.0), log_map_zero(q_ref, 1.0)
        diff = u - v
        a = 20.0 * diff / np.dot(diff, diff)  # <a, u> - <a, v> = 20
        out = hyperbolic_attention(q_rot, q_ref, a, 1.0)
        assert np.max(np.abs(out - q_rot)) < 1e-6

    def test_shift_invariance(self):
        rng = np.random.default_rng(2)
        u, v, a = rng.standard_normal((3, 6))
        w = rng.standard_normal(6)
        d = u - v
        w -= np.dot(w, d) / np.dot(d, d) * d  # orthogonal to u - v
        np.testing.assert_allclose(attention_weights(u, v, a), attention_weights(u, v, a + w),
                                   atol=1e-12)

    def test_output_inside_ball(self):
        rng = np.random.default_rng(3)
        c = 1.5
        x = rng.standard_normal((200, 4))
        x *= 0.99999 / math.sqrt(c) / np.linalg.norm(x, axis=1, keepdims=True)
        y = rng.standard_normal((200, 4))
        y *= 0.99999 / math.sqrt(c) / np.linalg.norm(y, axis=1, keepdims=True)
        out = hyperbolic_attention(x, y, rng.standard_normal((200, 4)) * 5, c)
        assert np.all(np.linalg.norm(out, axis=1) < 1 / math.sqrt(c))


class TestApplyRelation:
    def test_identity_relation(self):
        h = np.array([0.1, 0.2, -0.3, 0.05])
        np.testing.assert_allclose(apply_relation(h, rel(4), "RotH"), h, atol=1e-15)

    def test_rotation_quarter_turn(self):
        out = apply_relation(np.array([0.3, 0.0]), rel(2, rot=[math.pi / 2]), "RotH", c=1.0)
        np.testing.assert_allclose(out, [0.0, 0.3], atol=1e-15)

    def test_reflection_variant(self):
        h = np.array([0.6, 0.2])
        out = apply_relation(h, rel(2, ref=[0.4]), "FFTRefH", c=1.0)
        np.testing.assert_allclose(out, givens_reflect(h, [0.4]), atol=1e-15)

    def test_atth_equal_inputs_collapse(self):
        # with zero angles and h on the fixed axes of G-(0), rotation and
        # reflection agree, so attention returns that point before translating
        r = rel(4, trans=[0.1, 0.0, 0.2, -0.1], att=[1.0, 0.5, 0, 2])
        h = np.array([0.2, 0.0, 0.3, 0.0])
        c = 0.9
        want = mobius_add(h, exp_map_zero(r.translation, c), c)
        np.testing.assert_allclose(apply_relation(h, r, "AttH", c=c), want, atol=1e-12)

    def test_translation_is_mobius_added(self):
        h = np.array([0.1, 0.2])
        r = rel(2, trans=[0.3, -0.1])
        c = math.log(2)  # softplus(0)
        want = mobius_add(h, exp_map_zero(np.array([0.3, -0.1]), c), c)
        np.testing.assert_allclose(apply_relation(h, r, "RotH"), want, atol=1e-15)

    def test_unknown_variant(self):
        with pytest.raises(ConfigurationError):
            apply_relation(np.zeros(2), rel(2), "TransE")

import math

import numpy as np
import pytest

from hkge.errors import ConfigurationError, VocabularyError
from hkge.geometry import exp_map_zero
from hkge.model import (
    VARIANTS,
    KGParams,
    ModelConfig,
    candidate_scores,
    init_params,
    query_embed,
    score,
    score_all,
)
from hkge.spectral import dft_forward


def worked_params(variant="FFTRotH"):
    """Two entities, one relation, dimension 4, hand-set values."""
    cfg = ModelConfig(variant, 4)
    p = init_params(2, 1, cfg)
    p["entity.embedding"].value[:] = [[0.1, 0.2, -0.1, 0.05], [-0.05, 0.1, 0.2, 0.0]]
    p["entity.bias"].value[:] = [0.1, -0.2]
    p["relation.rot"].value[:] = [[math.pi / 4, math.pi / 6]]
    p["relation.ref"].value[:] = 0.0
    p["relation.trans"].value[:] = 0.0
    p["relation.att"].value[:] = 0.0
    p["relation.raw_c"].value[:] = 0.0
    return p, cfg


# frozen from a scalar step-by-step evaluation (math/cmath, no numpy)
Q_REAL = [-0.06970696532207347, 0.2091208959662205, -0.11001838221606772, -0.006603643735933237]
Q_COMPLEX = [0.009487752674256491 + 0j, 0.016780728008697617 - 0.08980123013444995j,
             -0.1591189195090557 + 0j]
SCORE_FFT = -0.3368146781728374
SCORE_BASE = -0.5524461782193761


class TestConfig:
    def test_variants(self):
        assert set(VARIANTS) == {"RefH", "RotH", "AttH", "FFTRefH", "FFTRotH", "FFTAttH"}

    @pytest.mark.parametrize("kwargs", [
        dict(variant="TransE"), dict(dim=3), dict(dim=0), dict(variant="FFTRotH", dim=12),
        dict(init_scale=-1.0)])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            ModelConfig(**kwargs)

    def test_non_power_of_two_ok_for_base(self):
        assert ModelConfig("RotH", 12).dim == 12


class TestWorkedExample:
    def test_query(self):
        p, cfg = worked_params()
        q_real, (qr, qi), c = query_embed(p, cfg, [0], [0], track=False)
        assert c[0, 0] == pytest.approx(math.log(2), abs=1e-15)
        np.testing.assert_allclose(q_real[0], Q_REAL, atol=1e-14)
        np.testing.assert_allclose(qr[0] + 1j * qi[0], Q_COMPLEX, atol=1e-14)

    def test_score_fft(self):
        p, cfg = worked_params()
        assert score(p, cfg, 0, 0, 1) == pytest.approx(SCORE_FFT, abs=1e-12)

    def test_score_base(self):
        p, cfg = worked_params("RotH")
        assert score(p, cfg, 0, 0, 1) == pytest.approx(SCORE_BASE, abs=1e-12)


class TestPipeline:
    def test_identity_relation_collapses(self):
        cfg = ModelConfig("FFTRotH", 8)
        p = init_params(3, 1, cfg)
        p["relation.rot"].value[:] = 0.0
        c = math.log(2)
        _, (qr, qi), _ = query_embed(p, cfg, [1], [0], track=False)
        want = math.sqrt(c) * dft_forward(exp_map_zero(p["entity.embedding"].value[1], c))
        np.testing.assert_allclose(qr[0] + 1j * qi[0], want, atol=1e-15)

    def test_zero_embedding_gives_complex_origin(self):
        cfg = ModelConfig("FFTAttH", 8, init_scale=0.0)
        p = init_params(3, 2, cfg)
        _, (qr, qi), _ = query_embed(p, cfg, [0, 1], [0, 1], track=False)
        assert np.all(qr == 0) and np.all(qi == 0)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_coincident_tail_scores_zero(self, variant):
        cfg = ModelConfig(variant, 8)
        p = init_params(2, 1, cfg)
        p["relation.rot"].value[:] = 0.0
        p["relation.ref"].value[:] = 0.0
        p["entity.embedding"].value[1] = p["entity.embedding"].value[0] = [0.1, 0, 0.2, 0, -0.1, 0, 0.3, 0]
        assert score(p, cfg, 0, 0, 1) == pytest.approx(0.0, abs=1e-11)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_bias_is_additive(self, variant):
        cfg = ModelConfig(variant, 8, init_scale=0.2)
        p = init_params(4, 2, cfg)
        before = score(p, cfg, [0, 1], [1, 0], [2, 3])
        p["entity.bias"].value[3] += 0.75
        after = score(p, cfg, [0, 1], [1, 0], [2, 3])
        assert after[0] == before[0]
        assert after[1] - before[1] == pytest.approx(0.75, abs=1e-14)

    @pytest.mark.parametrize("base", ["RefH", "RotH", "AttH"])
    def test_fft_shares_real_query(self, base):
        cfg_b, cfg_f = ModelConfig(base, 8, init_scale=0.3), ModelConfig("FFT" + base, 8, init_scale=0.3)
        p = init_params(6, 3, cfg_b)
        qb, _, _ = query_embed(p, cfg_b, [0, 3, 5], [0, 1, 2], track=False)
        qf, _, _ = query_embed(p, cfg_f, [0, 3, 5], [0, 1, 2], track=False)
        np.testing.assert_array_equal(qb, qf)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_relabeling_invariance(self, variant):
        cfg = ModelConfig(variant, 8, init_scale=0.3)
        p = init_params(7, 2, cfg)
        perm = np.random.default_rng(0).permutation(7)
        tables = p.arrays()
        q = KGParams({**tables,
                      "entity.embedding": tables["entity.embedding"][np.argsort(perm)],
                      "entity.bias": tables["entity.bias"][np.argsort(perm)]})
        # entity i in p is entity perm[i] in q
        h, r, t = np.array([0, 2, 6, 3]), np.array([0, 1, 1, 0]), np.array([1, 1, 4, 5])
        np.testing.assert_allclose(score(p, cfg, h, r, t), score(q, cfg, perm[h], r, perm[t]),
                                   atol=1e-13)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_points_stay_inside_balls(self, variant):
        rng = np.random.default_rng(1)
        for trial in range(10):
            cfg = ModelConfig(variant, 8, init_scale=3.0, seed=trial)
            p = init_params(10, 3, cfg)
            p["relation.trans"].value[:] = rng.standard_normal((3, 8)) * 3.0
            p["relation.att"].value[:] = rng.standard_normal((3, 8)) * 3.0
            p["relation.raw_c"].value[:] = rng.uniform(-2, 2, 3)
            h, r = rng.integers(0, 10, 50), rng.integers(0, 3, 50)
            q_real, q, c = query_embed(p, cfg, h, r, track=False)
            assert np.all(np.linalg.norm(q_real, axis=1) < 1 / np.sqrt(c[:, 0]))
            if cfg.is_fft:
                assert np.all(np.sum(q[0] ** 2 + q[1] ** 2, axis=1) < 1)

    def test_score_all_matches_pointwise(self):
        cfg = ModelConfig("FFTAttH", 8, init_scale=0.3)
        p = init_params(9, 2, cfg)
        full = score_all(p, cfg, np.array([0, 4]), np.array([1, 0]), max_elements=10)
        for i, (h, r) in enumerate([(0, 1), (4, 0)]):
            np.testing.assert_allclose(full[i], score(p, cfg, [h] * 9, [r] * 9, np.arange(9)),
                                       atol=1e-14)

    def test_unknown_ids(self):
        cfg = ModelConfig("RotH", 4)
        p = init_params(3, 1, cfg)
        with pytest.raises(VocabularyError):
            score(p, cfg, 3, 0, 1)
        with pytest.raises(VocabularyError):
            score(p, cfg, 0, 1, 1)
        with pytest.raises(VocabularyError):
            candidate_scores(p, cfg, [0], [0], [[5]], track=False)


class TestInit:
    def test_deterministic(self):
        cfg = ModelConfig("FFTAttH", 8, seed=42)
        a, b = init_params(20, 3, cfg).arrays(), init_params(20, 3, cfg).arrays()
        assert all(np.array_equal(a[k], b[k]) for k in a)

    def test_zero_scale(self):
        p = init_params(5, 1, ModelConfig("RotH", 4, init_scale=0.0))
        assert np.all(p["entity.embedding"].value == 0)

    def test_ranges(self):
        p = init_params(50, 6, ModelConfig("AttH", 8))
        assert np.all(p["entity.bias"].value == 0)
        assert np.all(np.abs(p["relation.rot"].value) <= np.pi)
        assert np.all(p["relation.trans"].value == 0)
        assert np.all(p["relation.raw_c"].value == 0)

    def test_empty_vocab(self):
        with pytest.raises(ConfigurationError):
            init_params(0, 1, ModelConfig())

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_initial_scores_near_origin_score(self, variant):
        # all-origin parameters score exactly 0 (no distance, zero biases)
        cfg = ModelConfig(variant, 8, seed=1)
        p = init_params(50, 4, cfg)
        rng = np.random.default_rng(0)
        h, r, t = rng.integers(0, 50, 1000), rng.integers(0, 4, 1000), rng.integers(0, 50, 1000)
        s = score(p, cfg, h, r, t)
        origin = init_params(50, 4, ModelConfig(variant, 8, init_scale=0.0, seed=1))
        s0 = score(origin, cfg, h, r, t)
        assert np.max(np.abs(s0)) < 1e-11
        assert np.mean(np.abs(s)) <= np.max(np.abs(s0)) + 3 * np.std(s)

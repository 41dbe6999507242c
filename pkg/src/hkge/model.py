"""Parameter store and the query/score pipeline for the six model variants.

Base variants (RefH, RotH, AttH) score with the Poincare distance between
the transformed head and the lifted tail.  FFT variants run the same real
pipeline and then move both points to the complex unit ball with the packed
orthonormal DFT, scaled by sqrt(c_r), and score with the Bergman distance.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from . import autograd as ad
from .errors import ConfigurationError, VocabularyError
from .geometry import bergman_distance, exp_map_zero, poincare_distance, project_complex
from .spectral import dft_pair, is_power_of_two
from .transforms import apply_relation, base_variant

VARIANTS = ("RefH", "RotH", "AttH", "FFTRefH", "FFTRotH", "FFTAttH")

PARAM_KEYS = (
    "entity.embedding", "entity.bias",
    "relation.rot", "relation.ref", "relation.trans", "relation.att", "relation.raw_c",
)


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "FFTRotH"
    dim: int = 32
    init_scale: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(
                f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if self.dim <= 0 or self.dim % 2:
            raise ConfigurationError(f"dimension must be even and positive, got {self.dim}")
        if self.is_fft and not is_power_of_two(self.dim):
            raise ConfigurationError(f"FFT variants need a power-of-two dimension, got {self.dim}")
        if self.init_scale < 0:
            raise ConfigurationError("init_scale must be non-negative")

    @property
    def is_fft(self) -> bool:
        return self.variant.startswith("FFT")

    def to_dict(self) -> dict:
        return asdict(self)


class RelationParams(NamedTuple):
    rotation: object
    reflection: object
    translation: object
    attention: object
    raw_curvature: object


class KGParams:
    """All trainable tables, keyed by their checkpoint names."""

    def __init__(self, tables: dict[str, np.ndarray]):
        missing = set(PARAM_KEYS) - set(tables)
        if missing:
            raise ConfigurationError(f"missing parameter tables: {sorted(missing)}")
        self.tables = {k: ad.Parameter(tables[k], name=k) for k in PARAM_KEYS}

    def __getitem__(self, key) -> ad.Parameter:
        return self.tables[key]

    def parameters(self) -> list[ad.Parameter]:
        return list(self.tables.values())

    @property
    def num_entities(self) -> int:
        return self.tables["entity.embedding"].shape[0]

    @property
    def num_relations(self) -> int:
        return self.tables["relation.rot"].shape[0]

    @property
    def dim(self) -> int:
        return self.tables["entity.embedding"].shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: p.value for k, p in self.tables.items()}

    def copy(self) -> "KGParams":
        return KGParams({k: v.copy() for k, v in self.arrays().items()})

    def zero_grad(self):
        for p in self.tables.values():
            p.zero_grad()

    def relation(self, rel_ids, track: bool = True) -> RelationParams:
        """Gather relation rows; raw curvature comes back shaped (..., 1)."""
        src = self.tables if track else self.arrays()
        rel_ids = np.asarray(rel_ids)
        raw = ad.take(src["relation.raw_c"], rel_ids)
        return RelationParams(
            ad.take(src["relation.rot"], rel_ids),
            ad.take(src["relation.ref"], rel_ids),
            ad.take(src["relation.trans"], rel_ids),
            ad.take(src["relation.att"], rel_ids),
            ad.reshape(raw, np.shape(rel_ids) + (1,)),
        )


def init_params(num_entities: int, num_relations: int, config: ModelConfig,
                seed: int | None = None) -> KGParams:
    if num_entities <= 0 or num_relations <= 0:
        raise ConfigurationError("vocabulary sizes must be positive")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    n, half = config.dim, config.dim // 2
    return KGParams({
        "entity.embedding": config.init_scale * rng.standard_normal((num_entities, n)),
        "entity.bias": np.zeros(num_entities),
        "relation.rot": rng.uniform(-np.pi, np.pi, (num_relations, half)),
        "relation.ref": rng.uniform(-np.pi, np.pi, (num_relations, half)),
        "relation.trans": np.zeros((num_relations, n)),
        "relation.att": config.init_scale * rng.standard_normal((num_relations, n)),
        "relation.raw_c": np.zeros(num_relations),
    })


def _check_ids(ids, size, what):
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= size):
        raise VocabularyError(f"{what} id out of range [0, {size})")
    return ids


def curvature(params: KGParams, rels, track: bool = True):
    src = params["relation.raw_c"] if track else params["relation.raw_c"].value
    raw = ad.take(src, np.asarray(rels))
    return ad.softplus(ad.reshape(raw, np.shape(rels) + (1,)))


def to_complex_ball(x, c):
    """Packed DFT of a curvature-c ball point, rescaled into the unit ball."""
    re, im = dft_pair(x)
    sc = ad.sqrt(c)
    return project_complex((re * sc, im * sc))


def query_embed(params: KGParams, config: ModelConfig, heads, rels, track: bool = True):
    """Query points for (head, relation) pairs.

    Returns ``(q_real, q_scoring, c)`` where ``q_real`` is the transformed
    point in the Poincare ball, ``q_scoring`` is what the distance is taken
    on (``q_real`` itself, or a (real, imag) pair for FFT variants) and ``c``
    is the relation curvature shaped (..., 1).
    """
    heads = _check_ids(heads, params.num_entities, "entity")
    rels = _check_ids(rels, params.num_relations, "relation")
    ent = params["entity.embedding"] if track else params["entity.embedding"].value
    rel = params.relation(rels, track=track)
    c = ad.softplus(rel.raw_curvature)
    h = exp_map_zero(ad.take(ent, heads), c)
    q = apply_relation(h, rel, config.variant, c)
    if config.is_fft:
        return q, to_complex_ball(q, c), c
    return q, q, c


def tail_points(params: KGParams, config: ModelConfig, tails, c, track: bool = True):
    """Lift tail embeddings with the query curvature ``c``.

    ``tails`` of shape (B, C) are paired with ``c`` of shape (B, 1); the
    result has shape (B, C, N) (or a pair of (B, C, n) for FFT variants).
    """
    ent = params["entity.embedding"] if track else params["entity.embedding"].value
    emb = ad.take(ent, tails)
    cc = ad.reshape(c, np.shape(ad.value(c))[:-1] + (1, 1))
    t = exp_map_zero(emb, cc)
    if config.is_fft:
        return to_complex_ball(t, cc)
    return t


def distance(config: ModelConfig, q, t, c):
    """Scoring-space distance between query points (B, ...) and tails (B, C, ...)."""
    if config.is_fft:
        qr, qi = q
        return bergman_distance((ad.reshape(qr, qr.shape[:-1] + (1, qr.shape[-1])),
                                 ad.reshape(qi, qi.shape[:-1] + (1, qi.shape[-1]))), t)
    cc = ad.reshape(c, np.shape(ad.value(c))[:-1] + (1, 1))
    q3 = ad.reshape(q, np.shape(ad.value(q))[:-1] + (1, np.shape(ad.value(q))[-1]))
    return poincare_distance(q3, t, cc)


def candidate_scores(params: KGParams, config: ModelConfig, heads, rels, cands,
                     track: bool = True):
    """Scores of shape (B, C) for each query against its candidate tails."""
    cands = _check_ids(cands, params.num_entities, "entity")
    _, q, c = query_embed(params, config, heads, rels, track=track)
    t = tail_points(params, config, cands, c, track=track)
    d = distance(config, q, t, c)
    bias = params["entity.bias"] if track else params["entity.bias"].value
    bh = ad.reshape(ad.take(bias, np.asarray(heads)), (len(heads), 1))
    bt = ad.take(bias, cands)
    return -(d * d) + bh + bt


def score(params: KGParams, config: ModelConfig, head, rel, tail) -> np.ndarray:
    """s(h, r, t) = -d(q, t)^2 + b_h + b_t; accepts scalars or aligned arrays."""
    h = np.atleast_1d(head)
    r = np.atleast_1d(rel)
    t = np.atleast_1d(tail)[:, None]
    s = candidate_scores(params, config, h, r, t, track=False)[:, 0]
    return s[0] if np.ndim(head) == 0 else s


def score_all(params: KGParams, config: ModelConfig, heads, rels,
              max_elements: int = 4_000_000) -> np.ndarray:
    """Scores against every entity, shape (B, |V|), evaluated in chunks."""
    heads = np.asarray(heads)
    rels = np.asarray(rels)
    num = params.num_entities
    per_query = max(1, max_elements // max(1, num * params.dim))
    out = np.empty((len(heads), num))
    all_ids = np.arange(num)
    for start in range(0, len(heads), per_query):
        sl = slice(start, start + per_query)
        cands = np.broadcast_to(all_ids, (len(heads[sl]), num))
        out[sl] = candidate_scores(params, config, heads[sl], rels[sl], cands, track=False)
    return out


__all__ = [
    "VARIANTS", "PARAM_KEYS", "ModelConfig", "RelationParams", "KGParams",
    "init_params", "curvature", "query_embed", "tail_points", "candidate_scores",
    "score", "score_all", "base_variant",
]

"""Filtered ranking metrics: MRR and Hits@{1, 3, 10}."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, eval_queries, khs_score
from .model import KGParams, ModelConfig, score_all

HITS_AT = (1, 3, 10)


@dataclass(frozen=True)
class RankResult:
    triple: tuple[int, int, int]
    rank: int
    inverse: bool = False


def filtered_rank(scores: np.ndarray, true_idx: int, filtered=()) -> int:
    """1 + #(strictly better) + #(ties), after dropping other known true tails."""
    scores = np.asarray(scores, dtype=np.float64)
    keep = np.ones(scores.shape, dtype=bool)
    keep[np.asarray(filtered, dtype=np.int64)] = False
    keep[true_idx] = False
    s = scores[true_idx]
    return int(1 + np.sum(keep & (scores >= s)))


def filtered_ranks(scores: np.ndarray, true_idx: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Row-wise :func:`filtered_rank`; ``masks`` flags candidates to drop."""
    rows = np.arange(len(true_idx))
    s = scores[rows, true_idx][:, None]
    keep = ~masks
    keep[rows, true_idx] = False
    return 1 + np.sum(keep & (scores >= s), axis=1)


def rank_one(params: KGParams, config: ModelConfig, head: int, rel: int, tail: int,
             filter_set=(), inverse: bool = False) -> RankResult:
    scores = score_all(params, config, np.array([head]), np.array([rel]))[0]
    return RankResult((head, rel, tail), filtered_rank(scores, tail, filter_set), inverse)


def metrics_from_ranks(ranks) -> dict[str, float]:
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        return {"MRR": float("nan"), **{f"Hits@{k}": float("nan") for k in HITS_AT}}
    out = {"MRR": float(np.mean(1.0 / ranks))}
    for k in HITS_AT:
        out[f"Hits@{k}"] = float(np.mean(ranks <= k))
    return out


@dataclass
class EvalResult:
    metrics: dict[str, float]
    ranks: np.ndarray
    inverse: np.ndarray
    base_relations: np.ndarray
    per_relation: list = field(default_factory=list)


def evaluate(params: KGParams, config: ModelConfig, dataset: Dataset, split: str = "test",
             batch_size: int = 256, with_khs: bool = True) -> EvalResult:
    """Rank every triple of ``split`` in both directions under the filtered setting.

    ``per_relation`` rows are (relation, Khs, triple count, Hits@10) with both
    directions pooled under the base relation.
    """
    heads, rels, tails, base, inverse = eval_queries(dataset, split)
    index = dataset.filter_index
    ranks = np.empty(len(heads), dtype=np.int64)
    for start in range(0, len(heads), batch_size):
        sl = slice(start, start + batch_size)
        scores = score_all(params, config, heads[sl], rels[sl])
        masks = np.zeros(scores.shape, dtype=bool)
        for i, (h, r) in enumerate(zip(heads[sl].tolist(), rels[sl].tolist())):
            known = index.get((h, r))
            if known is not None:
                masks[i, known] = True
        ranks[sl] = filtered_ranks(scores, tails[sl], masks)
    per_relation = []
    triples = dataset.split(split)
    all_base = _all_base_triples(dataset) if with_khs else None
    for r in range(dataset.num_base_relations):
        sel = base == r
        if not np.any(sel):
            continue
        khs = float("nan")
        if with_khs:
            sub = all_base[all_base[:, 1] == r]
            khs = khs_score(sub)
        per_relation.append((dataset.relations.names[r], khs,
                             int(np.sum(triples[:, 1] == r)),
                             float(np.mean(ranks[sel] <= 10))))
    return EvalResult(metrics_from_ranks(ranks), ranks, inverse, base, per_relation)


def _all_base_triples(ds: Dataset) -> np.ndarray:
    base_train = ds.train[: len(ds.train) // 2] if ds.augmented else ds.train
    return np.concatenate([base_train, ds.valid, ds.test])


def format_summary(model: str, dim: int, metrics: dict) -> str:
    header = "model\tdim\tMRR\tHits@1\tHits@3\tHits@10"
    row = "\t".join([model, str(dim)] + [f"{metrics[k]:.4f}" for k in
                                         ("MRR", "Hits@1", "Hits@3", "Hits@10")])
    return header + "\n" + row + "\n"

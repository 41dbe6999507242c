"""Triple files, vocabularies, inverse relations and graph diagnostics."""
from __future__ import annotations

import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DomainError, ParseError, StructuralError, VocabularyError

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
INVERSE_SUFFIX = "_reverse"
_SUFFIXES = ("", ".txt", ".tsv")


class Vocab:
    """Dense name <-> id bijection with ids assigned in sorted name order."""

    def __init__(self, names):
        self.names = tuple(sorted(set(names)))
        self._ids = {n: i for i, n in enumerate(self.names)}

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self._ids

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def id(self, name: str) -> int:
        try:
            return self._ids[name]
        except KeyError:
            raise VocabularyError(f"unknown name {name!r}") from None

    def extended(self, extra) -> "Vocab":
        """A vocab whose first ids are unchanged and ``extra`` appended in order."""
        out = Vocab(())
        out.names = self.names + tuple(extra)
        out._ids = {n: i for i, n in enumerate(out.names)}
        return out


def read_triple_file(path) -> list[tuple[str, str, str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(p.strip() for p in parts):
                raise ParseError(f"{path}:{lineno}: expected head<TAB>relation<TAB>tail")
            rows.append(tuple(p.strip() for p in parts))
    return rows


def load_triples(path, entities: Vocab | None = None, relations: Vocab | None = None):
    """Parse one split.

    Without vocabularies a fresh pair is built from this file (the training
    split case); with vocabularies every token must already be known.
    Returns ``(triples, entities, relations)`` with triples an (M, 3) int array.
    """
    rows = read_triple_file(path)
    if entities is None:
        entities = Vocab([h for h, _, _ in rows] + [t for _, _, t in rows])
    if relations is None:
        relations = Vocab(r for _, r, _ in rows)
    try:
        ids = [(entities.id(h), relations.id(r), entities.id(t)) for h, r, t in rows]
    except VocabularyError as exc:
        raise VocabularyError(f"{path}: {exc}") from None
    return np.array(ids, dtype=np.int64).reshape(-1, 3), entities, relations


def split_path(directory, split: str) -> Path:
    directory = Path(directory)
    for suffix in _SUFFIXES:
        p = directory / f"{split}{suffix}"
        if p.is_file():
            return p
    raise FileNotFoundError(f"no {split} file in {directory}")


@dataclass
class Dataset:
    entities: Vocab
    relations: Vocab
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    num_base_relations: int
    augmented: bool = False
    _filter: dict | None = field(default=None, repr=False, compare=False)

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    def split(self, name: str) -> np.ndarray:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    @property
    def num_triples(self) -> int:
        """Base (non-inverse) triples over all splits."""
        n_train = len(self.train) // 2 if self.augmented else len(self.train)
        return n_train + len(self.valid) + len(self.test)

    @property
    def filter_index(self) -> dict:
        """(head, relation) -> sorted array of every known true tail."""
        if self._filter is None:
            self._filter = build_filter_index(self)
        return self._filter


def load_dataset(directory, augment: bool = True) -> Dataset:
    """Read train/valid/test from ``directory``.

    The entity and relation vocabularies are the sorted union over the three
    splits, so published dataset statistics are reproduced exactly.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    rows = {s: read_triple_file(split_path(directory, s)) for s in SPLITS}
    entities = Vocab(x for rs in rows.values() for h, _, t in rs for x in (h, t))
    relations = Vocab(r for rs in rows.values() for _, r, _ in rs)
    arrays = {}
    for s in SPLITS:
        arrays[s], _, _ = load_triples(split_path(directory, s), entities, relations)
    ds = Dataset(entities, relations, arrays["train"], arrays["valid"], arrays["test"],
                 num_base_relations=len(relations))
    return augment_inverses(ds) if augment else ds


def inverse_triples(triples: np.ndarray, num_base_relations: int) -> np.ndarray:
    return np.stack([triples[:, 2], triples[:, 1] + num_base_relations, triples[:, 0]], axis=1)


def augment_inverses(ds: Dataset) -> Dataset:
    """Add relation r + |R| as the inverse of r and (t, r^-1, h) for every train triple."""
    if ds.augmented:
        return ds
    k = ds.num_base_relations
    relations = ds.relations.extended(n + INVERSE_SUFFIX for n in ds.relations.names)
    train = np.concatenate([ds.train, inverse_triples(ds.train, k)])
    return replace(ds, relations=relations, train=train, augmented=True, _filter=None)


def build_filter_index(ds: Dataset) -> dict:
    k = ds.num_base_relations
    buckets = defaultdict(set)
    base_train = ds.train[: len(ds.train) // 2] if ds.augmented else ds.train
    for triples in (base_train, ds.valid, ds.test):
        for h, r, t in triples.tolist():
            buckets[(h, r)].add(t)
            if ds.augmented:
                buckets[(t, r + k)].add(h)
    return {key: np.array(sorted(v), dtype=np.int64) for key, v in buckets.items()}


def eval_queries(ds: Dataset, split: str):
    """Both-direction tail queries of a split.

    Returns ``(heads, rels, tails, base_rels, inverse_flag)``; head prediction
    for (h, r, t) is asked as the tail query (t, r^-1, ?).
    """
    triples = ds.split(split)
    if ds.augmented and split == "train":
        triples = triples[: len(triples) // 2]
    k = ds.num_base_relations
    inv = inverse_triples(triples, k)
    both = np.concatenate([triples, inv])
    flag = np.concatenate([np.zeros(len(triples), bool), np.ones(len(triples), bool)])
    base = np.concatenate([triples[:, 1], triples[:, 1]])
    return both[:, 0], both[:, 1], both[:, 2], base, flag


def negative_sample(num_entities: int, count: int, rng: np.random.Generator,
                    double_negative: bool = False, size: int | None = None) -> np.ndarray:
    """Uniform entity ids drawn with replacement.

    Shape is ``(count,)`` for one query, ``(size, count)`` for a batch, with a
    leading axis of 2 prepended when ``double_negative`` is set (independent
    draws for a query and its inverse-relation counterpart).
    """
    if count < 1:
        raise StructuralError("need at least one negative sample")
    shape = (count,) if size is None else (size, count)
    if double_negative:
        shape = (2,) + shape
    return rng.integers(0, num_entities, size=shape)


# -- diagnostics -----------------------------------------------------------

def khs_score(triples) -> float:
    """Krackhardt hierarchy score of a directed edge set.

    Fraction of ordered reachable pairs (i != j) whose reverse is not
    reachable in the transitive closure.
    """
    triples = np.asarray(triples)
    if triples.size == 0:
        raise DomainError("khs_score needs at least one edge")
    edges = triples[:, [0, -1]]
    succ = defaultdict(set)
    for h, t in edges.tolist():
        succ[h].add(t)
    reach = {}
    for src in list(succ):
        seen = set()
        queue = deque(succ[src])
        while queue:
            u = queue.popleft()
            if u in seen:
                continue
            seen.add(u)
            queue.extend(succ.get(u, ()))
        seen.discard(src)
        reach[src] = seen
    total = one_way = 0
    for i, targets in reach.items():
        for j in targets:
            total += 1
            if i not in reach.get(j, ()):
                one_way += 1
    if total == 0:
        # only self-loops
        return 0.0
    return one_way / total


def relation_table(ds: Dataset, split: str | None = None) -> list[tuple[str, float, int]]:
    """(relation, Khs over all splits, triple count) for every base relation.

    Counts cover all splits, or only ``split`` when given.
    """
    base_train = ds.train[: len(ds.train) // 2] if ds.augmented else ds.train
    everything = np.concatenate([base_train, ds.valid, ds.test])
    counted = everything if split is None else (
        base_train if split == "train" else ds.split(split))
    rows = []
    for r in range(ds.num_base_relations):
        sub = everything[everything[:, 1] == r]
        khs = khs_score(sub) if len(sub) else float("nan")
        rows.append((ds.relations.names[r], khs, int(np.sum(counted[:, 1] == r))))
    return rows


def write_relation_table(path, rows, extra_header=()):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(("relation", "khs", "triples") + tuple(extra_header)) + "\n")
        for row in rows:
            name, khs, count, *rest = row
            fields = [name, f"{khs:.2f}", str(count)] + [f"{x:.3f}" for x in rest]
            fh.write("\t".join(fields) + "\n")


# -- synthetic data ----------------------------------------------------------

def tree_closure_triples(branching: int = 3, depth: int = 5, relation: str = "hypernym"):
    """(descendant, relation, ancestor) for every ancestor pair of a full tree.

    ``depth`` counts levels, so branching 3 and depth 5 gives 121 nodes.
    """
    parent = {0: None}
    level = [0]
    next_id = 1
    for _ in range(depth - 1):
        nxt = []
        for p in level:
            for _ in range(branching):
                parent[next_id] = p
                nxt.append(next_id)
                next_id += 1
        level = nxt
    width = len(str(next_id - 1))
    name = {i: f"n{i:0{width}d}" for i in parent}
    out = []
    for node in parent:
        a = parent[node]
        while a is not None:
            out.append((name[node], relation, name[a]))
            a = parent[a]
    return out


def write_tree_dataset(out_dir, branching: int = 3, depth: int = 5, seed: int = 0,
                       fractions=(0.9, 0.05, 0.05)) -> Path:
    """Write a random split of a tree's transitive closure as train/valid/test.

    Resamples the split until every entity and relation occurs in train.
    """
    rows = tree_closure_triples(branching, depth)
    rng = np.random.default_rng(seed)
    n = len(rows)
    n_valid = int(round(fractions[1] * n))
    n_test = int(round(fractions[2] * n))
    ents = {x for h, _, t in rows for x in (h, t)}
    for _ in range(1000):
        perm = rng.permutation(n)
        train = [rows[i] for i in perm[: n - n_valid - n_test]]
        if {x for h, _, t in train for x in (h, t)} == ents:
            break
    else:
        raise RuntimeError("could not find a split covering every entity in train")
    valid = [rows[i] for i in perm[n - n_valid - n_test: n - n_test]]
    test = [rows[i] for i in perm[n - n_test:]]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split, part in zip(SPLITS, (train, valid, test)):
        with open(out / split, "w", encoding="utf-8") as fh:
            fh.writelines("\t".join(r) + "\n" for r in part)
    return out

"""Cross-entropy training with uniform negatives and validation early stopping."""
from __future__ import annotations

import logging
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autograd as ad
from .checkpoint import save_checkpoint, vocab_hash
from .data import Dataset, inverse_triples, negative_sample
from .errors import ConfigurationError, StructuralError
from .evaluation import evaluate
from .model import KGParams, ModelConfig, candidate_scores, init_params
from .optim import make_optimizer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    batch_size: int = 500
    neg_samples: int = 100
    learning_rate: float = 3e-4
    double_negative: bool = False
    max_epochs: int = 500
    patience: int = 10
    valid_every: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.optimizer.lower() not in ("adam", "adagrad"):
            raise ConfigurationError(f"unknown optimizer {self.optimizer!r}")
        for name in ("batch_size", "neg_samples", "patience", "valid_every"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.max_epochs < 0:
            raise ConfigurationError("max_epochs must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


def step_loss(params: KGParams, config: ModelConfig, batch: np.ndarray, negatives: np.ndarray):
    """Mean -log softmax of the true tail among {true tail} + its negatives.

    ``batch`` is (B, 3), ``negatives`` is (B, K).  Recorded on the active tape.
    """
    batch = np.asarray(batch)
    if batch.ndim != 2 or len(batch) == 0:
        raise StructuralError("step_loss needs a non-empty (B, 3) batch")
    negatives = np.asarray(negatives).reshape(len(batch), -1)
    cands = np.concatenate([batch[:, 2:3], negatives], axis=1)
    s = candidate_scores(params, config, batch[:, 0], batch[:, 1], cands)
    return ad.mean(ad.logsumexp(s, axis=-1) - s[:, 0])


def epoch_batches(dataset: Dataset, tcfg: TrainConfig, rng: np.random.Generator):
    """Yield ``(batch, negatives)`` pairs for one epoch.

    With ``double_negative`` the epoch walks the base triples and each batch
    also carries their inverse counterparts, each direction with its own
    independent negatives; otherwise it walks the augmented triple list.
    """
    train = dataset.train
    k = dataset.num_base_relations
    if tcfg.double_negative and dataset.augmented:
        base = train[: len(train) // 2]
        perm = rng.permutation(len(base))
        for start in range(0, len(base), tcfg.batch_size):
            fwd = base[perm[start:start + tcfg.batch_size]]
            batch = np.concatenate([fwd, inverse_triples(fwd, k)])
            negs = negative_sample(dataset.num_entities, tcfg.neg_samples, rng,
                                   double_negative=True, size=len(fwd))
            yield batch, negs.reshape(len(batch), tcfg.neg_samples)
    else:
        perm = rng.permutation(len(train))
        for start in range(0, len(train), tcfg.batch_size):
            batch = train[perm[start:start + tcfg.batch_size]]
            yield batch, negative_sample(dataset.num_entities, tcfg.neg_samples, rng,
                                         size=len(batch))


def train_step(params: KGParams, mcfg: ModelConfig, optimizer, batch, negatives) -> float:
    with ad.Tape() as tape:
        loss = step_loss(params, mcfg, batch, negatives)
    tape.backward(loss)
    optimizer.step()
    return loss.item()


@dataclass
class TrainResult:
    best_checkpoint: Path
    history: list = field(default_factory=list)
    best_mrr: float = float("nan")
    best_epoch: int = 0
    params: KGParams | None = None


def _check_writable(directory: Path):
    directory.mkdir(parents=True, exist_ok=True)
    probe = directory / ".write_probe"
    with open(probe, "w") as fh:
        fh.write("")
    os.remove(probe)


def write_history(path, history):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch\ttrain_loss\tvalid_MRR\n")
        for epoch, loss, mrr in history:
            fh.write(f"{epoch}\t{loss:.10g}\t{'' if mrr is None else f'{mrr:.6f}'}\n")


def train(dataset: Dataset, mcfg: ModelConfig, tcfg: TrainConfig, checkpoint_dir,
          params: KGParams | None = None) -> TrainResult:
    """Train, validating every ``valid_every`` epochs and keeping the best checkpoint.

    History rows are (epoch, mean train loss, validation MRR or None).
    """
    checkpoint_dir = Path(checkpoint_dir)
    _check_writable(checkpoint_dir)
    if params is None:
        params = init_params(dataset.num_entities, dataset.num_relations, mcfg)
    meta = {
        "entity_hash": vocab_hash(dataset.entities.names),
        "relation_hash": vocab_hash(dataset.relations.names),
        "num_base_relations": dataset.num_base_relations,
        "train": tcfg.to_dict(),
    }
    best_path = checkpoint_dir / "best.hkge"
    save_checkpoint(best_path, params, mcfg, {**meta, "epoch": 0})
    result = TrainResult(best_path, [], params=params)
    if tcfg.max_epochs == 0:
        write_history(checkpoint_dir / "history.tsv", result.history)
        return result

    rng = np.random.default_rng(np.random.SeedSequence(tcfg.seed))
    opt = make_optimizer(tcfg.optimizer, params.parameters(), tcfg.learning_rate)
    best, stale = -np.inf, 0
    for epoch in range(1, tcfg.max_epochs + 1):
        t0 = time.perf_counter()
        losses, sizes = [], []
        for batch, negs in epoch_batches(dataset, tcfg, rng):
            losses.append(train_step(params, mcfg, opt, batch, negs))
            sizes.append(len(batch))
        loss = float(np.average(losses, weights=sizes))
        mrr = None
        if epoch % tcfg.valid_every == 0:
            mrr = evaluate(params, mcfg, dataset, "valid", with_khs=False).metrics["MRR"]
            if mrr > best:
                best, stale = mrr, 0
                result.best_mrr, result.best_epoch = mrr, epoch
                save_checkpoint(best_path, params, mcfg, {**meta, "epoch": epoch})
            else:
                stale += 1
            log.info("epoch %d loss %.5f valid MRR %.4f (%.2fs)", epoch, loss, mrr,
                     time.perf_counter() - t0)
        else:
            log.debug("epoch %d loss %.5f (%.2fs)", epoch, loss, time.perf_counter() - t0)
        result.history.append((epoch, loss, mrr))
        if stale >= tcfg.patience:
            log.info("early stop at epoch %d (best %.4f at %d)", epoch, best, result.best_epoch)
            break
    write_history(checkpoint_dir / "history.tsv", result.history)
    return result

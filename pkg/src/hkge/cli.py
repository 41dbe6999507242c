"""Command-line entry point: ``hkge {train,eval,diagnose,sweep,toy}``.

Option values resolve as defaults < ``--config`` file < explicit flags.  The
config file is flat ``key=value`` text whose keys are the long flag names
(``batch-size`` and ``batch_size`` both work).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, vocab_hash
from .data import load_dataset, relation_table, split_path, write_relation_table, write_tree_dataset
from .errors import CheckpointError, ConfigurationError, HKGEError, ParseError, VocabularyError
from .evaluation import evaluate, format_summary
from .model import VARIANTS, ModelConfig
from .trainer import TrainConfig, train

log = logging.getLogger("hkge")

METRICS = ("MRR", "Hits@1", "Hits@3", "Hits@10")
DEFAULT_SEEDS = (0, 1, 2, 3, 4)

# name -> (parser, default); flags present on train and sweep
RUN_OPTIONS = {
    "data": (str, None),
    "model": (str, "FFTRotH"),
    "dim": (int, 32),
    "optimizer": (str, "adam"),
    "batch-size": (int, 500),
    "neg-samples": (int, 100),
    "lr": (float, 3e-4),
    "double-neg": (None, False),
    "max-epochs": (int, 500),
    "patience": (int, 10),
    "valid-every": (int, 5),
    "init-scale": (float, 1e-3),
    "seeds": (str, ",".join(map(str, DEFAULT_SEEDS))),
    "out": (str, "runs"),
}


class UsageError(Exception):
    """Bad user input; reported with exit status 2."""


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def parse_int_list(text) -> list[int]:
    try:
        return [int(x) for x in str(text).replace(" ", "").split(",") if x]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None


def read_config_file(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("_", "-")
            out[key] = val
    return out


def resolve_options(args, names) -> dict:
    """Merge defaults, the config file and explicitly given flags."""
    opts = {k: RUN_OPTIONS[k][1] for k in names}
    if getattr(args, "config", None):
        file_opts = read_config_file(args.config)
        unknown = sorted(set(file_opts) - set(names))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        for key, val in file_opts.items():
            cast = RUN_OPTIONS[key][0]
            try:
                opts[key] = parse_bool(val) if cast is None else cast(val)
            except ValueError:
                raise UsageError(f"bad value for {key}: {val!r}") from None
    for key in names:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            opts[key] = val
    if not opts.get("data"):
        raise UsageError("--data is required")
    return opts


def write_effective_config(path, opts: dict):
    with open(path, "w", encoding="utf-8") as fh:
        for key, val in opts.items():
            if isinstance(val, bool):
                val = str(val).lower()
            fh.write(f"{key}={val}\n")


def check_dataset_dir(path) -> Path:
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {path}")
    for split in ("train", "valid", "test"):
        split_path(path, split)
    return path


def configs_for(opts: dict, model: str, dim: int, seed: int):
    mcfg = ModelConfig(model, dim, init_scale=opts["init-scale"], seed=seed)
    tcfg = TrainConfig(
        optimizer=opts["optimizer"].lower(),
        batch_size=opts["batch-size"],
        neg_samples=opts["neg-samples"],
        learning_rate=opts["lr"],
        double_negative=opts["double-neg"],
        max_epochs=opts["max-epochs"],
        patience=opts["patience"],
        valid_every=opts["valid-every"],
        seed=seed,
    )
    return mcfg, tcfg


def worker_count() -> int:
    raw = os.environ.get("HKGE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"HKGE_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def _run_seed(data: str, mcfg: ModelConfig, tcfg: TrainConfig, seed_dir: str) -> dict:
    dataset = load_dataset(data)
    res = train(dataset, mcfg, tcfg, seed_dir)
    params, cfg, _ = load_checkpoint(res.best_checkpoint)
    ev = evaluate(params, cfg, dataset, "test")
    Path(seed_dir, "metrics.tsv").write_text(format_summary(cfg.variant, cfg.dim, ev.metrics))
    write_relation_table(Path(seed_dir, "relations.tsv"), ev.per_relation, ("hits@10",))
    return ev.metrics


def run_cell(opts: dict, model: str, dim: int, out_dir: Path) -> list[dict]:
    """Train and test-evaluate every seed of one (model, dim) configuration."""
    seeds = parse_int_list(opts["seeds"])
    if not seeds:
        raise UsageError("need at least one seed")
    jobs = []
    for seed in seeds:
        mcfg, tcfg = configs_for(opts, model, dim, seed)
        jobs.append((opts["data"], mcfg, tcfg, str(out_dir / f"seed_{seed}")))
    workers = min(worker_count(), len(jobs))
    if workers == 1:
        results = [_run_seed(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_seed, *zip(*jobs)))
    write_seed_summary(out_dir / "summary.tsv", model, dim, seeds, results)
    return results


def seed_stats(results: list[dict]) -> tuple[dict, dict]:
    mean = {k: float(np.mean([r[k] for r in results])) for k in METRICS}
    std = {k: float(np.std([r[k] for r in results], ddof=1)) if len(results) > 1 else float("nan")
           for k in METRICS}
    return mean, std


def write_seed_summary(path, model, dim, seeds, results):
    mean, std = seed_stats(results)
    lines = ["model\tdim\tseed\t" + "\t".join(METRICS)]
    rows = [(str(s), r) for s, r in zip(seeds, results)] + [("mean", mean), ("std", std)]
    for label, m in rows:
        lines.append("\t".join([model, str(dim), label] + [f"{m[k]:.4f}" for k in METRICS]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- commands ----------------------------------------------------------------

def cmd_train(args) -> int:
    opts = resolve_options(args, list(RUN_OPTIONS))
    check_dataset_dir(opts["data"])
    configs_for(opts, opts["model"], opts["dim"], 0)  # validate before creating files
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_effective_config(out / "effective_config.txt", opts)
    results = run_cell(opts, opts["model"], opts["dim"], out)
    mean, _ = seed_stats(results)
    sys.stdout.write(format_summary(opts["model"], opts["dim"], mean))
    return 0


def cmd_eval(args) -> int:
    check_dataset_dir(args.data)
    params, cfg, meta = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    expected = (vocab_hash(dataset.entities.names), vocab_hash(dataset.relations.names))
    if (meta.get("entity_hash"), meta.get("relation_hash")) != expected:
        raise CheckpointError(f"{args.checkpoint}: vocabulary does not match {args.data}")
    ev = evaluate(params, cfg, dataset, args.split)
    sys.stdout.write(format_summary(cfg.variant, cfg.dim, ev.metrics))
    out = Path(args.out) if args.out else Path(args.checkpoint).parent
    out.mkdir(parents=True, exist_ok=True)
    write_relation_table(out / f"relations_{args.split}.tsv", ev.per_relation, ("hits@10",))
    return 0


def cmd_diagnose(args) -> int:
    check_dataset_dir(args.data)
    dataset = load_dataset(args.data, augment=False)
    rows = relation_table(dataset)
    sys.stdout.write(f"entities\t{dataset.num_entities}\n")
    sys.stdout.write(f"relations\t{dataset.num_base_relations}\n")
    sys.stdout.write(f"triples\t{dataset.num_triples}\n")
    for split in ("train", "valid", "test"):
        sys.stdout.write(f"{split}\t{len(dataset.split(split))}\n")
    if args.out:
        write_relation_table(args.out, rows)
    else:
        sys.stdout.write("relation\tkhs\ttriples\n")
        for name, khs, count in rows:
            sys.stdout.write(f"{name}\t{khs:.2f}\t{count}\n")
    return 0


def cmd_sweep(args) -> int:
    opts = resolve_options(args, list(RUN_OPTIONS))
    check_dataset_dir(opts["data"])
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    dims = parse_int_list(args.dims)
    unique = list(dict.fromkeys(dims))
    if len(unique) != len(dims):
        log.warning("duplicate dims removed: %s -> %s", dims, unique)
    if not models or not unique:
        raise UsageError("sweep needs at least one model and one dim")
    for model in models:
        for dim in unique:
            configs_for(opts, model, dim, 0)
    out = Path(opts["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_effective_config(out / "effective_config.txt",
                           {**opts, "models": ",".join(models), "dims": ",".join(map(str, unique))})
    table = {}
    for model in models:
        for dim in unique:
            results = run_cell(opts, model, dim, out / f"{model}_{dim}")
            table[model, dim] = seed_stats(results)[0]
    lines = ["model\tmetric\t" + "\t".join(str(d) for d in unique)]
    for metric in ("MRR", "Hits@1"):
        for model in models:
            cells = [f"{table[model, d][metric]:.4f}" for d in unique]
            lines.append("\t".join([model, metric] + cells))
    text = "\n".join(lines) + "\n"
    (out / "sweep.tsv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_toy(args) -> int:
    out = write_tree_dataset(args.out, args.branching, args.depth, args.seed)
    sys.stdout.write(f"wrote {out}\n")
    return 0


# -- parser ------------------------------------------------------------------

def _add_run_flags(p):
    p.add_argument("--config", help="key=value file; explicit flags override it")
    p.add_argument("--data", help="directory holding train/valid/test")
    p.add_argument("--model", choices=VARIANTS)
    p.add_argument("--dim", type=int)
    p.add_argument("--optimizer", choices=("adam", "adagrad", "Adam", "Adagrad"))
    p.add_argument("--batch-size", type=int)
    p.add_argument("--neg-samples", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--double-neg", action="store_const", const=True, default=None)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--valid-every", type=int)
    p.add_argument("--init-scale", type=float)
    p.add_argument("--seeds", help="comma-separated seeds (default 0,1,2,3,4)")
    p.add_argument("--out", help="output directory (default ./runs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hkge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one configuration over several seeds")
    _add_run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "valid", "test"))
    p.add_argument("--out", help="directory for the per-relation table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diagnose", help="dataset counts and per-relation hierarchy scores")
    p.add_argument("--data", required=True)
    p.add_argument("--out", help="write the relation table here instead of stdout")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("sweep", help="train and evaluate over models x dims")
    _add_run_flags(p)
    p.add_argument("--models", default="RotH,FFTRotH")
    p.add_argument("--dims", default="8,16,32,64")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("toy", help="write the synthetic tree-closure dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--branching", type=int, default=3)
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_toy)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"hkge: path not found: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ConfigurationError) as exc:
        print(f"hkge: {exc}", file=sys.stderr)
        return 2
    except (CheckpointError, ParseError, VocabularyError, HKGEError, OSError) as exc:
        print(f"hkge: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

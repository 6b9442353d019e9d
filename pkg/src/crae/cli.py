"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import cf, metrics
from .checkpoint import CheckpointError
from .config import RunConfig, format_config, load_config
from .corpus import (CorpusError, RatingMatrix, SplitSpec, Vocabulary, build_vocabulary, encode_document,
                     read_corpus, read_ratings, split_ratings, tokenize, write_corpus, write_ratings)
from .drae import generate, reconstruct, theta_from_item_factor
from .synth import make_synthetic
from .trainer import ModelCheckpoint, NumericalError, Trainer, load_checkpoint, save_checkpoint

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

_log = logging.getLogger("crae")


@dataclass
class PreparedRun:
    vocab: Vocabulary
    documents: dict[int, list[str]]
    sequences: dict[int, list[int]]
    train: RatingMatrix
    test: RatingMatrix
    heldout_items: list[int]


def prepare_run(cfg: RunConfig, repeat: int = 0) -> PreparedRun:
    """Load data, build the split for repetition ``repeat`` and hide the
    content of a random ``1 - content_fraction`` share of items."""
    docs = read_corpus(cfg.path("corpus"))
    ratings = read_ratings(cfg.path("ratings"))
    n_items = max(ratings.n_items, max(docs) + 1)
    ratings = RatingMatrix(ratings.n_users, n_items, ratings.positives)
    seed = cfg.split_seed + repeat
    train, test = split_ratings(ratings, SplitSpec(cfg.P, seed))
    items = sorted(docs)
    heldout: list[int] = []
    if cfg.content_fraction < 1:
        rng = np.random.default_rng([seed, 1])
        n_hold = int(round((1 - cfg.content_fraction) * len(items)))
        heldout = sorted(int(j) for j in rng.choice(items, size=n_hold, replace=False))
    visible = {j: docs[j] for j in items if j not in set(heldout)}
    if "vocab" in cfg.paths:
        vocab = Vocabulary.load(cfg.paths["vocab"])
    else:
        vocab = build_vocabulary([visible[j] for j in sorted(visible)], cfg.min_count)
    seqs = {j: encode_document(toks, vocab) for j, toks in visible.items()}
    return PreparedRun(vocab, docs, seqs, train, test, heldout)


def _train_config(cfg: RunConfig, repeat: int):
    return dataclasses.replace(cfg.train, seed=cfg.train.seed + repeat)


def run_training(cfg: RunConfig, repeat: int = 0, progress=None) -> tuple[ModelCheckpoint, Trainer, PreparedRun]:
    run = prepare_run(cfg, repeat)
    trainer = Trainer(run.vocab, run.sequences, run.train, _train_config(cfg, repeat))
    trainer.fit(callback=progress)
    return trainer.checkpoint(), trainer, run


def evaluate(model: ModelCheckpoint, run: PreparedRun, cfg: RunConfig) -> dict[str, float]:
    ev = cfg.eval
    U, V = model.factors.U, model.factors.V
    scores = cf.predict(U, V)
    seen = run.train.user_items()
    rankings = [cf.rank_items(scores[i], seen[i]) for i in range(U.shape[1])]
    out = {}
    for M in ev.M_values:
        out[f"recall@{M}"] = metrics.recall_at_m(rankings, run.test, M)[1]
    out[f"map@{ev.map_cutoff}"] = metrics.mean_average_precision(rankings, run.test, ev.map_cutoff)
    if run.heldout_items:
        vocab = model.vocab
        max_len = max(len(t) for t in run.documents.values()) + 1
        refs = {j: [run.documents[j]] for j in run.heldout_items}
        gen = {j: vocab.decode(generate(theta_from_item_factor(V[:, j]), model.params, max_len, vocab.eos_id))
               for j in run.heldout_items}
        known = {j: run.documents[j] for j in run.sequences}
        nn = metrics.nn_generate_baseline(V, known, run.heldout_items)
        out[f"bleu@{ev.bleu_max_n}"] = metrics.bleu(gen, refs, ev.bleu_max_n)
        out[f"bleu_nn@{ev.bleu_max_n}"] = metrics.bleu(nn, refs, ev.bleu_max_n)
    return out


def _eval_repeat(args):
    cfg, repeat = args
    model, _, run = run_training(cfg, repeat)
    return evaluate(model, run, cfg)


# -- commands ------------------------------------------------------------------


def cmd_vocab(corpus_path, out_path, min_count: int = 1) -> int:
    docs = read_corpus(corpus_path)
    vocab = build_vocabulary([docs[j] for j in sorted(docs)], min_count)
    vocab.save(out_path)
    print(f"wrote {vocab.size} tokens to {out_path}")
    return EXIT_OK


def cmd_train(config_path) -> int:
    cfg = load_config(config_path)

    def progress(rec):
        _log.info("epoch %d joint=%.6g", rec.epoch, rec.joint_objective)

    model, trainer, run = run_training(cfg, 0, progress)
    save_checkpoint(model, cfg.path("checkpoint"))
    log_text = trainer.log_text()
    if "log" in cfg.paths:
        cfg.paths["log"].write_text(log_text, encoding="utf-8")
    else:
        sys.stdout.write(log_text)
    if "train_split" in cfg.paths:
        write_ratings(run.train, cfg.paths["train_split"])
    if "test_split" in cfg.paths:
        write_ratings(run.test, cfg.paths["test_split"])
    return EXIT_OK


def cmd_recommend(checkpoint, ratings, M: int, out=None) -> int:
    model = load_checkpoint(checkpoint)
    U, V = model.factors.U, model.factors.V
    train = read_ratings(ratings, U.shape[1], V.shape[1])
    lines = [f"{i}\t{' '.join(map(str, top))}\n" for i, top in enumerate(cf.recommend(U, V, train, M))]
    _emit("".join(lines), out)
    return EXIT_OK


def cmd_generate(checkpoint, items=None, text=None, corpus=None, max_len: int = 20, out=None) -> int:
    model = load_checkpoint(checkpoint)
    vocab, params = model.vocab, model.params
    lines = []
    if text is not None:
        ids = encode_document(tokenize(text), vocab)
        lines.append("text\t" + " ".join(vocab.decode(reconstruct(ids, params, max_len, vocab.eos_id))) + "\n")
    docs = read_corpus(corpus) if corpus is not None else {}
    for j in items or []:
        if j in docs:
            ids = reconstruct(encode_document(docs[j], vocab), params, max_len, vocab.eos_id)
        else:
            if not 0 <= j < model.factors.V.shape[1]:
                raise CorpusError(f"item {j} outside the trained item range")
            ids = generate(theta_from_item_factor(model.factors.V[:, j]), params, max_len, vocab.eos_id)
        lines.append(f"{j}\t{' '.join(vocab.decode(ids))}\n")
    _emit("".join(lines), out)
    return EXIT_OK


def cmd_eval(config_path, checkpoint=None, repeats: int | None = None, out=None) -> int:
    cfg = load_config(config_path)
    n = repeats or cfg.repeats
    if checkpoint is not None and n == 1:
        results = [evaluate(load_checkpoint(checkpoint), prepare_run(cfg, 0), cfg)]
    else:
        jobs = [(cfg, r) for r in range(n)]
        if cfg.workers > 1 and n > 1:
            with ProcessPoolExecutor(max_workers=min(cfg.workers, n)) as pool:
                results = list(pool.map(_eval_repeat, jobs))
        else:
            results = [_eval_repeat(j) for j in jobs]
    keys = list(results[0])
    mean = {k: float(np.mean([r[k] for r in results])) for k in keys}
    rows = []
    for k in keys:
        name, _, cutoff = k.partition("@")
        rows.append((name, cutoff, mean[k]))
    summary = {"P": cfg.P, "repeats": n, "mean": mean, "runs": results}
    target = out or cfg.paths.get("report")
    if target is not None:
        metrics.write_report(rows, target, summary)
    for name, cutoff, v in rows:
        print(f"{name}\t{cutoff}\t{v:.6f}")
    return EXIT_OK


def cmd_synth_data(out_dir, seed: int = 0) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = make_synthetic(seed=seed)
    write_corpus(data.documents, out_dir / "corpus.tsv")
    write_ratings(data.ratings, out_dir / "ratings.tsv")
    (out_dir / "train.cfg").write_text(format_config(SYNTH_CONFIG), encoding="utf-8")
    print(f"wrote synthetic dataset to {out_dir}")
    return EXIT_OK


SYNTH_CONFIG = {
    "corpus": "corpus.tsv",
    "ratings": "ratings.tsv",
    "checkpoint": "model.crae",
    "log": "train.log",
    "report": "report.tsv",
    "P": 3,
    "split_seed": 0,
    "K": 48,
    "K_W": 96,
    "lambda_u": 0.1,
    "lambda_v": 1.0,
    "lambda_w": 1e-4,
    "lambda_s": 100.0,
    "denoise_rate": 0.0,
    "optimizer": "adam",
    "learning_rate": 0.005,
    "epochs": 80,
    "seed": 0,
    "record_wall_time": False,
    "M_values": "5,10,20",
    "map_cutoff": 500,
}


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crae", description="Collaborative recurrent autoencoder")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("vocab", help="build a vocabulary file from a corpus")
    s.add_argument("corpus")
    s.add_argument("out")
    s.add_argument("--min-count", type=int, default=1)

    s = sub.add_parser("train", help="train a model from a config file")
    s.add_argument("config")

    s = sub.add_parser("recommend", help="top-M unseen items per user")
    s.add_argument("checkpoint")
    s.add_argument("ratings", help="training positives to exclude")
    s.add_argument("-M", type=int, default=10)
    s.add_argument("-o", "--out")

    s = sub.add_parser("generate", help="generate sequences for items or raw text")
    s.add_argument("checkpoint")
    s.add_argument("--items", type=lambda v: [int(x) for x in v.split(",") if x], default=None)
    s.add_argument("--text")
    s.add_argument("--corpus", help="known content; listed items are reconstructed from it")
    s.add_argument("--max-len", type=int, default=20)
    s.add_argument("-o", "--out")

    s = sub.add_parser("eval", help="evaluate recall@M, mAP and BLEU")
    s.add_argument("config")
    s.add_argument("--checkpoint")
    s.add_argument("--repeats", type=int, help="retrain and average over this many splits")
    s.add_argument("-o", "--out")

    s = sub.add_parser("synth-data", help="write the bundled synthetic dataset")
    s.add_argument("out_dir")
    s.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "vocab":
            return cmd_vocab(args.corpus, args.out, args.min_count)
        if args.command == "train":
            return cmd_train(args.config)
        if args.command == "recommend":
            return cmd_recommend(args.checkpoint, args.ratings, args.M, args.out)
        if args.command == "generate":
            if args.items is None and args.text is None:
                parser.error("generate needs --items or --text")
            return cmd_generate(args.checkpoint, args.items, args.text, args.corpus, args.max_len, args.out)
        if args.command == "eval":
            return cmd_eval(args.config, args.checkpoint, args.repeats, args.out)
        if args.command == "synth-data":
            return cmd_synth_data(args.out_dir, args.seed)
    except (CorpusError, CheckpointError, FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

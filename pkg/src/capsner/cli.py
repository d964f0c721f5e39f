"""Command-line entry point: gen, train, eval, tag, inspect."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import checkpoint, corpus as corpus_mod, decoder
from .config import coerce, format_value, read_keyvalue
from .corpus import Corpus, Sentence, SyntheticConfig, corpus_stats, format_conll
from .embedding import load_embedding_file, random_embeddings, write_embedding_file
from .model import ScalarHead, TRAINABLE_EMBED
from .numerics import ConfigurationError
from .training import TrainConfig, check_label_compat, evaluate, train

log = logging.getLogger("capsner")

METRICS_FILE = "metrics.tsv"
METRICS_HEADER = ("epoch", "train_loss", "dev_p", "dev_r", "dev_f1")


class CliError(Exception):
    """A failure reported as one line on stderr with exit status 1."""


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _flag(name):
    return "--" + name.replace("_", "-")


# -- gen -----------------------------------------------------------------------


def cmd_gen(args):
    raw = read_keyvalue(args.config) if args.config else {}
    for key in ("sentences", "vocab_size", "seed", "min_length", "max_length", "entity_types"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    cfg = SyntheticConfig(**coerce(SyntheticConfig, raw))
    n_dev = args.dev_sentences or 0
    total = dataclasses.replace(cfg, sentences=cfg.sentences + n_dev)
    full = corpus_mod.generate_synthetic(total)
    train_part = Corpus.from_sentences(full.sentences[: cfg.sentences], full.label_set)
    corpus_mod.write_conll(train_part, args.out)
    _print_stats(args.out, train_part)
    if n_dev:
        if not args.dev_out:
            raise CliError("--dev-sentences needs --dev-out")
        dev_part = Corpus.from_sentences(full.sentences[cfg.sentences :], full.label_set)
        corpus_mod.write_conll(dev_part, args.dev_out)
        _print_stats(args.dev_out, dev_part)
    if args.emb_out:
        emb = random_embeddings(full.char_vocabulary, args.emb_dim, cfg.seed)
        write_embedding_file(emb, args.emb_out)
        print(f"{args.emb_out}: {len(emb)} vectors of dim {emb.dim}")
    return 0


def _print_stats(path, corpus):
    stats = corpus_stats(corpus)
    ents = " ".join(f"{k}={v}" for k, v in sorted(stats["entities"].items()))
    print(f"{path}: sentences={stats['sentences']} chars={stats['chars']} entities: {ents}")


# -- train -----------------------------------------------------------------------


def effective_config(args):
    raw = read_keyvalue(args.config) if args.config else {}
    for name in TrainConfig.field_names():
        value = getattr(args, name, None)
        if value is not None:
            raw[name] = value
    return TrainConfig(**coerce(TrainConfig, raw))


def _load_corpus(path):
    if not Path(path).is_file():
        raise CliError(f"corpus file not found: {path}")
    return corpus_mod.load_conll(path)


def cmd_train(args):
    config = effective_config(args)
    train_corpus = _load_corpus(args.train)
    if not train_corpus.sentences:
        raise CliError(f"training corpus {args.train} has no sentences")
    dev_corpus = _load_corpus(args.dev) if args.dev else None
    embeddings = None
    if config.ablation != TRAINABLE_EMBED:
        if not args.embeddings:
            raise CliError("--embeddings is required unless --ablation trainable_embed")
        if args.embeddings == "random":
            embeddings = random_embeddings(
                train_corpus.char_vocabulary, config.embedding_dim, config.seed
            )
        else:
            if not Path(args.embeddings).is_file():
                raise CliError(f"embedding file not found: {args.embeddings}")
            embeddings = load_embedding_file(args.embeddings)

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        metrics = open(out / METRICS_FILE, "w", encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write to {out}: {exc.strerror}") from None

    with metrics:
        metrics.write("# capsner training log\n")
        for key, value in config.to_dict().items():
            metrics.write(f"# {key} = {format_value(value)}\n")
        metrics.write("\t".join(METRICS_HEADER) + "\n")

        def on_epoch(rec):
            r = rec.report
            row = f"{rec.epoch}\t{rec.loss:.10f}\t{r.precision:.6f}\t{r.recall:.6f}\t{r.f1:.6f}"
            metrics.write(row + "\n")
            metrics.flush()
            print(row, flush=True)

        def on_improve(model, rec):
            checkpoint.save_checkpoint(model, out, config)

        print("\t".join(METRICS_HEADER), flush=True)
        result = train(
            config,
            train_corpus,
            dev_corpus,
            embeddings=embeddings,
            on_epoch=on_epoch,
            on_improve=on_improve,
        )
    if config.epochs == 0:
        checkpoint.save_checkpoint(result.model, out, config)
    print(f"best dev F1 {result.best_f1:.6f} at epoch {result.best_epoch}; checkpoint in {out}")
    return 0


# -- eval / tag / inspect --------------------------------------------------------------


def _load_model(directory):
    try:
        model, _ = checkpoint.load_checkpoint(directory)
    except checkpoint.CheckpointError as exc:
        raise CliError(f"cannot load checkpoint {directory}: {exc}") from None
    return model


def cmd_eval(args):
    model = _load_model(args.checkpoint)
    data = _load_corpus(args.corpus)
    try:
        check_label_compat(model.label_set, data)
    except ConfigurationError as exc:
        raise CliError(f"label set mismatch: {exc}") from None
    report = evaluate(model, data)
    print(report.format())
    return 0


def _warn_unknown(model, chars):
    unknown = model.unknown_chars(chars)
    if unknown:
        log.warning("characters not in vocabulary, tagged via [UNK]: %s", "".join(unknown))


def cmd_tag(args):
    model = _load_model(args.checkpoint)
    path = Path(args.input)
    if not path.is_file():
        raise CliError(f"input file not found: {path}")
    lines = [ln.rstrip("\r") for ln in path.read_text(encoding="utf-8").split("\n")]
    texts = [ln for ln in lines if ln]
    _warn_unknown(model, "".join(texts))
    tagged = [Sentence(tuple(t), model.decode(tuple(t))) for t in texts]
    text = format_conll(tagged)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_inspect(args):
    model = _load_model(args.checkpoint)
    chars = tuple(args.sentence)
    if not chars:
        raise CliError("sentence is empty")
    _warn_unknown(model, chars)
    trace = {}
    e = model.emissions(chars, trace=trace).data
    tags = model.label_set.tags
    path, score = decoder.viterbi_decode(e, model.transitions)
    kind = "scalar scores" if isinstance(model.head, ScalarHead) else "capsule lengths"
    print(f"# per-position top-3 label scores ({kind})")
    print("pos\tchar\tviterbi\ttop1\ttop2\ttop3")
    for t, ch in enumerate(chars):
        order = np.argsort(-e[t], kind="stable")[:3]
        cells = "\t".join(f"{tags[j]}:{e[t, j]:.6f}" for j in order)
        print(f"{t}\t{ch}\t{tags[path[t]]}\t{cells}")
    print(f"# viterbi path score {score:.6f}")
    for h, w in enumerate(trace.get("attention", [])):
        print(f"# attention weights, head {h} (rows: query position)")
        for row in w:
            print("\t".join(f"{v:.6f}" for v in row))
    couplings = trace.get("couplings")
    if couplings:
        final = couplings[-1]  # (n, primary, label)
        print(f"# routing couplings after {len(couplings)} iteration(s):"
              " mean and max over primary capsules")
        print("pos\t" + "\t".join(tags))
        for t in range(len(chars)):
            mean = final[t].mean(axis=0)
            peak = final[t].max(axis=0)
            print(f"{t}\t" + "\t".join(f"{m:.4f}/{p:.4f}" for m, p in zip(mean, peak)))
    return 0


# -- argument parsing -----------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="capsner", description="Capsule-network character tagger for BIOES NER."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a synthetic CoNLL corpus")
    g.add_argument("--config", help="key = value file with generator settings")
    g.add_argument("--sentences", type=_positive_int)
    g.add_argument("--vocab", dest="vocab_size", type=_positive_int)
    g.add_argument("--entity-types", dest="entity_types", help="comma separated, e.g. LOC,ORG,PER")
    g.add_argument("--seed", type=int)
    g.add_argument("--min-length", dest="min_length", type=_positive_int)
    g.add_argument("--max-length", dest="max_length", type=_positive_int)
    g.add_argument("--out", required=True, help="output CoNLL path")
    g.add_argument("--dev-sentences", type=_positive_int, help="extra sentences for a dev file")
    g.add_argument("--dev-out", help="dev CoNLL path")
    g.add_argument("--emb-out", help="also write Gaussian character vectors here")
    g.add_argument("--emb-dim", type=_positive_int, default=64)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a tagger and write a checkpoint directory")
    t.add_argument("--config", help="key = value file with training settings")
    t.add_argument("--train", required=True, help="training CoNLL file")
    t.add_argument("--dev", help="dev CoNLL file (default: seeded hold-out of the training set)")
    t.add_argument("--out", required=True, help="checkpoint / log directory")
    t.add_argument("--embeddings", help="embedding text file, or 'random'")
    for f in dataclasses.fields(TrainConfig):
        t.add_argument(_flag(f.name), dest=f.name, metavar="VALUE", help=f"(default {format_value(f.default)})")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a checkpoint on a CoNLL corpus")
    e.add_argument("checkpoint")
    e.add_argument("corpus")
    e.set_defaults(func=cmd_eval)

    tg = sub.add_parser("tag", help="tag plain text, one sentence per line")
    tg.add_argument("checkpoint")
    tg.add_argument("input")
    tg.add_argument("--out", help="output CoNLL path (default stdout)")
    tg.set_defaults(func=cmd_tag)

    i = sub.add_parser("inspect", help="dump scores, attention and routing for a sentence")
    i.add_argument("checkpoint")
    i.add_argument("sentence")
    i.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        # one BLAS thread: fixed reduction order, so seeded runs repeat bit for bit
        with threadpool_limits(1):
            return args.func(args)
    except (CliError, ConfigurationError, corpus_mod.ParseError, ValueError, OSError) as exc:
        print(f"capsner {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Verbs: ingest, label, distribution, train, eval, search, embed
(train|retrofit), synth.  Exit codes: 0 success, 1 configuration error,
2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, classifier, corpus, embeddings as emb, features
from .errors import ConfigError, DataError, EmoreactError
from .evaluation import evaluate, render_report
from .experiments import (
    PRESETS,
    DatasetSpec,
    ExperimentConfig,
    SourceSpec,
    page_search,
    run,
    source_distribution,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as config errors (exit 1)."""

    def error(self, message):
        raise ConfigError(message)


def _source_arg(value: str) -> tuple[str, str]:
    name, sep, path = value.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError("expected NAME=PATH")
    return name, path


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="emoreact", description=__doc__)
    parser.add_argument("--version", action="version", version=f"emoreact {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="turn a reaction feed into a labeled canonical TSV")
    p.add_argument("--input", required=True, help="reaction feed JSON file")
    p.add_argument("--out", required=True, help="canonical TSV to write")
    p.add_argument("--source", default=None, help="source tag (default: input stem)")
    p.add_argument("--max-entropy", type=float, default=None, metavar="NATS",
                   help="keep only posts whose reaction entropy is at most this")
    p.add_argument("--strict", action="store_true", help="fail on the first bad record")
    p.add_argument("--sum-before-argmax", action="store_true",
                   help="sum reaction counts per emotion before taking the argmax")
    p.add_argument("--drop-ties", action="store_true", help="discard posts with tied top reactions")

    p = sub.add_parser("label", help="print the distant label for each post in a feed")
    p.add_argument("--input", required=True)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--max-entropy", type=float, default=None, metavar="NATS")
    p.add_argument("--sum-before-argmax", action="store_true")
    p.add_argument("--drop-ties", action="store_true")

    p = sub.add_parser("distribution", help="per-source emotion proportions")
    p.add_argument("--source", action="append", type=_source_arg, metavar="NAME=PATH",
                   required=True, help="reaction feed source; repeatable")
    p.add_argument("--max-entropy", type=float, default=None, metavar="NATS")
    p.add_argument("--format", choices=("tsv", "json", "pretty"), default="pretty")

    p = sub.add_parser("synth", help="generate a planted-signal synthetic corpus")
    p.add_argument("--n-docs", type=int, required=True)
    p.add_argument("--vocab-per-class", type=int, default=25)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--tokens-per-doc", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--source", default="synthetic")
    p.add_argument("--out", required=True, help="canonical TSV to write")

    p = sub.add_parser("train", help="run the configured pipeline end to end")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", default=None, help="override the config's output_dir")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None,
                   help="replace the config's sources with a named page combination")
    p.add_argument("--feeds-dir", default=None,
                   help="directory holding <Name>.json feeds for --preset")

    p = sub.add_parser("eval", help="score a saved model on a canonical TSV")
    p.add_argument("--model", required=True)
    p.add_argument("--vectorizer", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--lexicon", default=None, help="lexicon TSV if the vectorizer needs one")
    p.add_argument("--vectors", default=None, help="embedding table if the vectorizer needs one")
    p.add_argument("--format", choices=("tsv", "json", "pretty"), default="pretty")

    p = sub.add_parser("search", help="rank source subsets by dev micro-F1")
    p.add_argument("--config", required=True, help="config providing candidate sources and datasets")
    p.add_argument("--k-max", type=int, default=None, help="largest subset size (default: all)")
    p.add_argument("--dev", default=None, help="dataset name to rank on (default: first)")
    p.add_argument("--format", choices=("tsv", "json", "pretty"), default="pretty")

    p = sub.add_parser("embed", help="embedding table operations")
    emb_sub = p.add_subparsers(dest="embed_command", required=True, parser_class=_Parser)

    t = emb_sub.add_parser("train", help="train skip-gram vectors on a text corpus")
    t.add_argument("--corpus", required=True, help="input text, one document per line")
    t.add_argument("--tsv", action="store_true", help="input is a canonical TSV; use its text column")
    t.add_argument("--out", required=True, help="vector file to write (word2vec text format)")
    t.add_argument("--window", type=int, default=5)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--dim", type=int, default=100)
    t.add_argument("--min-count", type=int, default=2)
    t.add_argument("--negatives", type=int, default=5)
    t.add_argument("--epochs", type=int, default=5)
    t.add_argument("--seed", type=int, default=0)

    r = emb_sub.add_parser("retrofit", help="retrofit vectors toward a lexicon emotion graph")
    r.add_argument("--vectors", required=True, help="input vector file")
    r.add_argument("--lexicon", required=True, help="lexicon TSV")
    r.add_argument("--iters", type=int, default=10)
    r.add_argument("--max-degree", type=int, default=50)
    r.add_argument("--out", required=True, help="vector file to write")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return _dispatch(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except EmoreactError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


def _dispatch(args: argparse.Namespace) -> int:
    handlers = {
        "ingest": _cmd_ingest,
        "label": _cmd_label,
        "distribution": _cmd_distribution,
        "synth": _cmd_synth,
        "train": _cmd_train,
        "eval": _cmd_eval,
        "search": _cmd_search,
        "embed": _cmd_embed,
    }
    return handlers[args.command](args)


def _load_filtered_feed(path: str, strict: bool, max_entropy: float | None):
    if not Path(path).is_file():
        raise ConfigError(f"no such file: {path}")
    posts = corpus.load_reaction_feed(path, strict=strict)
    if max_entropy is not None:
        posts = corpus.entropy_filter(posts, max_entropy)
    return posts


def _cmd_ingest(args) -> int:
    posts = _load_filtered_feed(args.input, args.strict, args.max_entropy)
    source = args.source or Path(args.input).stem
    docs = []
    unlabeled = 0
    for post in posts:
        label = corpus.assign_label(
            post, sum_before_argmax=args.sum_before_argmax, drop_ties=args.drop_ties
        )
        if label is None or not post.message.strip():
            unlabeled += 1
            continue
        docs.append(corpus.LabeledDoc(post.message, label, source))
    corpus.write_canonical_tsv(docs, args.out)
    print(f"wrote {len(docs)} labeled docs to {args.out} ({unlabeled} unlabeled posts skipped)")
    return EXIT_OK


def _cmd_label(args) -> int:
    posts = _load_filtered_feed(args.input, args.strict, args.max_entropy)
    for post in posts:
        label = corpus.assign_label(
            post, sum_before_argmax=args.sum_before_argmax, drop_ties=args.drop_ties
        )
        name = label.value if label is not None else "-"
        message = " ".join(post.message.split())
        print(f"{name}\t{message}")
    return EXIT_OK


def _cmd_distribution(args) -> int:
    specs = [SourceSpec(name=n, kind="reaction_feed", path=p) for n, p in args.source]
    for spec in specs:
        if not Path(spec.path).is_file():
            raise ConfigError(f"no such file: {spec.path}")
    dists = source_distribution(specs, args.max_entropy)
    if args.format == "json":
        doc = {name: d.as_dict() for name, d in dists.items()}
        print(json.dumps(doc, sort_keys=True, indent=2))
        return EXIT_OK
    header = ["source", *(e.value for e in corpus.EMOTIONS), "labeled", "unlabeled"]
    if args.format == "tsv":
        print("\t".join(header))
        for name, d in dists.items():
            row = [name, *(f"{p:.3f}" for p in d.proportions), str(d.n_labeled), str(d.n_unlabeled)]
            print("\t".join(row))
    else:
        width = max(len("source"), *(len(n) for n in dists))
        print(f"{'source':<{width}}  " + "  ".join(f"{h:>9}" for h in header[1:]))
        for name, d in dists.items():
            cells = [f"{p:>9.3f}" for p in d.proportions]
            cells += [f"{d.n_labeled:>9d}", f"{d.n_unlabeled:>9d}"]
            print(f"{name:<{width}}  " + "  ".join(cells))
    return EXIT_OK


def _cmd_synth(args) -> int:
    docs = corpus.synth_corpus(
        args.n_docs,
        vocab_per_class=args.vocab_per_class,
        noise_rate=args.noise,
        seed=args.seed,
        tokens_per_doc=args.tokens_per_doc,
        source=args.source,
    )
    corpus.write_canonical_tsv(docs, args.out)
    print(f"wrote {len(docs)} synthetic docs to {args.out}")
    return EXIT_OK


def _apply_preset(config: ExperimentConfig, preset: str, feeds_dir: str | None) -> ExperimentConfig:
    if feeds_dir is None:
        raise ConfigError("--preset requires --feeds-dir to locate the feed files")
    sources = tuple(
        SourceSpec(name=name, kind="reaction_feed", path=str(Path(feeds_dir) / f"{name}.json"))
        for name in PRESETS[preset]
    )
    import dataclasses

    config = dataclasses.replace(config, sources=sources)
    config.check_paths()
    return config


def _cmd_train(args) -> int:
    config = ExperimentConfig.from_json(args.config, check_paths=args.preset is None)
    if args.preset is not None:
        config = _apply_preset(config, args.preset, args.feeds_dir)
    if args.out is not None:
        import dataclasses

        config = dataclasses.replace(config, output_dir=args.out)
    record = run(config)
    print(f"run {record.config_hash}: {record.n_train_docs} training docs")
    for name, report in record.reports.items():
        print(f"  {name}: micro-F1 {report.micro_f1:.3f} (n={report.n_instances})")
    print(f"outputs in {record.output_dir}")
    return EXIT_OK


def _cmd_eval(args) -> int:
    for path in (args.model, args.vectorizer, args.data):
        if not Path(path).is_file():
            raise ConfigError(f"no such file: {path}")
    lexicon = features.Lexicon.load(args.lexicon) if args.lexicon else None
    table = emb.load_vectors(args.vectors) if args.vectors else None
    vectorizer = features.Vectorizer.load(args.vectorizer, lexicon=lexicon, embeddings=table)
    model = classifier.LinearModel.load(args.model)
    docs = corpus.load_canonical_tsv(args.data)
    if not docs:
        raise DataError(f"dataset {args.data} is empty")
    gold = [d.label for d in docs]
    pred = [model.predict(vectorizer.transform(d.text)) for d in docs]
    sys.stdout.buffer.write(render_report(evaluate(gold, pred), args.format))
    return EXIT_OK


def _cmd_search(args) -> int:
    config = ExperimentConfig.from_json(args.config)
    if args.dev is None:
        dev = config.datasets[0]
    else:
        matches = [d for d in config.datasets if d.name == args.dev]
        if not matches:
            raise ConfigError(f"no dataset named {args.dev!r} in config")
        dev = matches[0]
    k_max = args.k_max if args.k_max is not None else len(config.sources)
    results = page_search(
        config.sources, dev, k_max, config.train, max_entropy=config.max_entropy
    )
    if args.format == "json":
        doc = [{"sources": list(r.names), "micro_f1": r.micro_f1} for r in results]
        print(json.dumps(doc, indent=2))
    else:
        sep = "\t" if args.format == "tsv" else "  "
        print(sep.join(("micro_f1", "sources")))
        for r in results:
            print(sep.join((f"{r.micro_f1:.3f}", "+".join(r.names))))
    return EXIT_OK


def _cmd_embed(args) -> int:
    if args.embed_command == "train":
        if not Path(args.corpus).is_file():
            raise ConfigError(f"no such file: {args.corpus}")
        if args.tsv:
            docs = corpus.load_canonical_tsv(args.corpus)
            lines = [d.text for d in docs]
        else:
            lines = Path(args.corpus).read_text(encoding="utf-8").splitlines()
        tokenized = [features.tokenize(line) for line in lines if line.strip()]
        table = emb.train_skipgram(
            tokenized,
            window=args.window,
            lr=args.lr,
            dim=args.dim,
            min_count=args.min_count,
            negatives=args.negatives,
            epochs=args.epochs,
            seed=args.seed,
        )
        emb.write_vectors(table, args.out)
        print(f"trained {len(table)} x {table.dim} vectors -> {args.out}")
        return EXIT_OK

    for path in (args.vectors, args.lexicon):
        if not Path(path).is_file():
            raise ConfigError(f"no such file: {path}")
    table = emb.load_vectors(args.vectors)
    lexicon = features.Lexicon.load(args.lexicon)
    graph = emb.build_emotion_graph(lexicon, table, args.max_degree)
    fitted = emb.retrofit(table, graph, args.iters)
    emb.write_vectors(fitted, args.out)
    print(f"retrofitted {len(graph)} graph words over {args.iters} sweeps -> {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

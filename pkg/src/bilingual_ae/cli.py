"""``bae`` command line: train, query, evaluate, sweep, generate data.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""
import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time

from . import __version__, synth
from .bilingual import (
    DEFAULT_LR,
    ModelFormatError,
    NumericError,
    TrainConfig,
    load_model,
    save_model,
    train,
)
from .classifier import DataError, cross_lingual_eval
from .corpus import (
    CorpusError,
    build_vocabulary,
    compute_tfidf,
    make_pairs,
    read_aligned,
    read_labeled,
    read_lines,
    to_bow,
    tokenize,
)
from .embeddings import doc_vector, export_embeddings, nearest, tables_from_model

logger = logging.getLogger("bilingual_ae")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
TRAIN_SIZES = (100, 200, 500, 1000, 5000, 10000)
MERGE_SIZES = (5, 25, 50)


def _default_seed(fallback=0):
    return int(os.environ.get("BAE_SEED", fallback))


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(args, argv, inputs, outputs, t0, seeds=None, extra=None):
    path = args.manifest
    if path is None:
        path = (outputs[0] if outputs else f"bae-{args.command}") + ".manifest.json"
    config = {k: v for k, v in vars(args).items() if k not in ("func", "manifest")}
    resolved = list(argv)
    if getattr(args, "seed", None) is not None and "--seed" not in resolved:
        resolved += ["--seed", str(args.seed)]
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "resolved_argv": resolved,
        "config": config,
        "seeds": seeds if seeds is not None else {"seed": getattr(args, "seed", None)},
        "inputs": {p: _digest(p) for p in inputs if p},
        "tool_version": __version__,
        "wall_clock_seconds": round(time.perf_counter() - t0, 3),
        "outputs": list(outputs),
    }
    if extra:
        manifest.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _read_mono(path):
    """One document per line; a leading ``label<TAB>`` is dropped."""
    return [tokenize(line.split("\t", 1)[-1]) for line in read_lines(path) if line.strip()]


def _labeled(path):
    return read_labeled(path)


def _train_config(args, merge_k=None):
    return TrainConfig(
        dim=args.dim, epochs=args.epochs, learning_rate=args.lr,
        merge_k=merge_k if merge_k is not None else args.merge,
        lam=args.lam, corr_batch=args.corr_batch, seed=args.seed, variant=args.variant,
        nonlinearity=args.nonlinearity, aggregation=args.aggregation,
        tie_decoders=args.tie_decoders, include_monolingual_docs=not args.no_mono,
        cross_only=args.cross_only, threads=args.threads,
    )


def _prepare_training(args):
    tx, ty = read_aligned(args.src, args.tgt)
    mono_x = _read_mono(args.mono_x) if args.mono_x else []
    mono_y = _read_mono(args.mono_y) if args.mono_y else []
    vx = build_vocabulary(tx + mono_x, args.max_vocab, args.min_count)
    vy = build_vocabulary(ty + mono_y, args.max_vocab, args.min_count)
    pairs, dropped = make_pairs(tx, ty, vx, vy)
    if not pairs:
        raise CorpusError("no usable sentence pairs after preprocessing")
    if dropped:
        logger.warning("dropped %d sentence pairs with an empty side", dropped)
    bx = [b for b in (to_bow(t, vx) for t in mono_x) if b]
    by = [b for b in (to_bow(t, vy) for t in mono_y) if b]
    return pairs, dropped, vx, vy, bx, by


def cmd_train(args, argv):
    t0 = time.perf_counter()
    cfg = _train_config(args)
    pairs, dropped, vx, vy, bx, by = _prepare_training(args)
    model, report = train(pairs, cfg, bx, by, vocab_x=vx, vocab_y=vy)
    save_model(model, args.out)
    vx.save(args.out + ".vocab.x.tsv")
    vy.save(args.out + ".vocab.y.tsv")
    report_path = args.report or args.out + ".report.json"
    rep = report.to_dict()
    rep.update(tag=cfg.tag, dropped_pairs=dropped, n_pairs=len(pairs))
    with open(report_path, "w", encoding="utf-8") as f:
        json.dump(rep, f, indent=2, sort_keys=True)
        f.write("\n")
    outputs = [args.out, report_path, args.out + ".vocab.x.tsv", args.out + ".vocab.y.tsv"]
    _write_manifest(args, argv, [args.src, args.tgt, args.mono_x, args.mono_y], outputs, t0,
                    extra={"model_tag": cfg.tag, "train_config": vars(cfg)})
    last = report.epochs[-1]
    print(f"{cfg.tag}\tepochs={cfg.epochs}\ttotal_loss={last['total']:.6f}"
          f"\tcorrelation={last['correlation']:.6f}")
    return EXIT_OK


def cmd_nn(args, argv):
    t0 = time.perf_counter()
    model = load_model(args.model)
    tx, ty = tables_from_model(model)
    tables = {"x": tx, "y": ty}
    q = tables[args.lang]
    target = tables["y" if args.lang == "x" else "x"] if args.cross else q
    try:
        rows = nearest(args.word, q, target, args.k)
    except KeyError as e:
        raise DataError(str(e.args[0])) from None
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for rank, (w, d) in enumerate(rows, start=1):
            out.write(f"{rank}\t{w}\t{d:.9g}\n")
    finally:
        if args.out:
            out.close()
    _write_manifest(args, argv, [args.model], [args.out] if args.out else [], t0)
    return EXIT_OK


def cmd_export(args, argv):
    t0 = time.perf_counter()
    model = load_model(args.model)
    table = dict(zip("xy", tables_from_model(model)))[args.lang]
    export_embeddings(table, args.out)
    _write_manifest(args, argv, [args.model], [args.out], t0)
    return EXIT_OK


def cmd_doc_vec(args, argv):
    t0 = time.perf_counter()
    model = load_model(args.model)
    table = dict(zip("xy", tables_from_model(model)))[args.lang]
    docs = _labeled(args.docs)
    pool = _labeled(args.idf_docs) if args.idf_docs else docs
    stats = compute_tfidf([to_bow(t, table.vocab) for _, t in pool], table.vocab)
    with open(args.out, "w", encoding="utf-8") as f:
        for i, (label, toks) in enumerate(docs):
            v = doc_vector(to_bow(toks, table.vocab), table, stats).vector
            f.write(f"{i}\t{label}\t" + "\t".join(f"{x:.9g}" for x in v) + "\n")
    _write_manifest(args, argv, [args.model, args.docs, args.idf_docs], [args.out], t0)
    return EXIT_OK


def _run_eval(args):
    model = load_model(args.model)
    return cross_lingual_eval(
        model, _labeled(args.train), _labeled(args.test), args.train_size, args.seed,
        source=args.train_lang, target=args.test_lang,
        idf_docs=_labeled(args.idf_docs) if args.idf_docs else None,
        epochs=args.perceptron_epochs, l2_normalize=args.l2_normalize_doc,
    )


def _eval_config(args):
    return {k: getattr(args, k) for k in (
        "model", "train", "test", "train_lang", "test_lang", "train_size", "seed",
        "perceptron_epochs", "l2_normalize_doc", "idf_docs")}


def _write_predictions(path, res):
    with open(path, "w", encoding="utf-8") as f:
        f.write("doc_id\tgold\tpred\n")
        for i, g, p in res.predictions:
            f.write(f"{i}\t{g}\t{p}\n")


def cmd_classify(args, argv):
    t0 = time.perf_counter()
    res = _run_eval(args)
    outputs = []
    if args.predictions:
        _write_predictions(args.predictions, res)
        outputs.append(args.predictions)
    print(f"accuracy\t{res.accuracy:.6f}\tn_test\t{res.n_test}")
    _write_manifest(args, argv, [args.model, args.train, args.test, args.idf_docs], outputs, t0)
    return EXIT_OK


def cmd_eval(args, argv):
    t0 = time.perf_counter()
    res = _run_eval(args)
    metrics = res.to_json(_eval_config(args))
    text = json.dumps(metrics, indent=2, sort_keys=True)
    print(text)
    print(f"majority_baseline\t{res.majority_baseline:.6f}", file=sys.stderr)
    outputs = []
    if args.metrics:
        with open(args.metrics, "w", encoding="utf-8") as f:
            f.write(text + "\n")
        outputs.append(args.metrics)
    if args.predictions:
        _write_predictions(args.predictions, res)
        outputs.append(args.predictions)
    _write_manifest(args, argv, [args.model, args.train, args.test, args.idf_docs], outputs, t0)
    return EXIT_OK


SWEEP_TRAINSIZE_FIELDS = ["train_size", "accuracy", "majority_baseline", "n_test", "status"]
SWEEP_MERGE_FIELDS = ["merge_k", "seed", "tag", "x_to_y", "y_to_x"]


def cmd_sweep_trainsize(args, argv):
    t0 = time.perf_counter()
    model = load_model(args.model)
    train_docs, test_docs = _labeled(args.train), _labeled(args.test)
    idf_docs = _labeled(args.idf_docs) if args.idf_docs else None
    rows = []
    for size in args.sizes:
        if size > len(train_docs):
            logger.warning("train size %d exceeds pool of %d; skipped", size, len(train_docs))
            rows.append({"train_size": size, "accuracy": "", "majority_baseline": "",
                         "n_test": len(test_docs), "status": "skipped"})
            continue
        res = cross_lingual_eval(model, train_docs, test_docs, size, args.seed,
                                 source=args.train_lang, target=args.test_lang,
                                 idf_docs=idf_docs, epochs=args.perceptron_epochs,
                                 l2_normalize=args.l2_normalize_doc)
        rows.append({"train_size": size, "accuracy": f"{res.accuracy:.6f}",
                     "majority_baseline": f"{res.majority_baseline:.6f}",
                     "n_test": res.n_test, "status": "ok"})
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, SWEEP_TRAINSIZE_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    _write_manifest(args, argv, [args.model, args.train, args.test, args.idf_docs], [args.out], t0)
    return EXIT_OK


def cmd_sweep_merge(args, argv):
    t0 = time.perf_counter()
    pairs, _, vx, vy, bx, by = _prepare_training(args)
    train_x, test_x = _labeled(args.train_x), _labeled(args.test_x)
    train_y, test_y = _labeled(args.train_y), _labeled(args.test_y)
    rows, runs = [], []
    for k in args.merges:
        cfg = _train_config(args, merge_k=k)
        model, _ = train(pairs, cfg, bx, by, vocab_x=vx, vocab_y=vy)
        xy = cross_lingual_eval(model, train_x, test_y, args.train_size, args.seed, "x",
                                idf_docs=train_y, epochs=args.perceptron_epochs,
                                l2_normalize=args.l2_normalize_doc)
        yx = cross_lingual_eval(model, train_y, test_x, args.train_size, args.seed, "y",
                                idf_docs=train_x, epochs=args.perceptron_epochs,
                                l2_normalize=args.l2_normalize_doc)
        rows.append({"merge_k": k, "seed": cfg.seed, "tag": cfg.tag,
                     "x_to_y": f"{xy.accuracy:.6f}", "y_to_x": f"{yx.accuracy:.6f}"})
        runs.append({"merge_k": k, "seed": cfg.seed, "checksums": model.checksums()})
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, SWEEP_MERGE_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    inputs = [args.src, args.tgt, args.mono_x, args.mono_y,
              args.train_x, args.test_x, args.train_y, args.test_y]
    _write_manifest(args, argv, inputs, [args.out], t0,
                    seeds={"runs": [{"merge_k": r["merge_k"], "seed": r["seed"]} for r in runs]},
                    extra={"runs": runs})
    return EXIT_OK


def cmd_gen_synth(args, argv):
    t0 = time.perf_counter()
    corpus = synth.generate(
        vocab_size=args.vocab_size, n_classes=args.classes, n_pairs=args.pairs,
        noise=args.noise, seed=args.seed, n_docs_train=args.docs_train,
        n_docs_test=args.docs_test)
    paths = synth.write_corpus(corpus, args.out)
    args.manifest = args.manifest or os.path.join(args.out, "gen-synth.manifest.json")
    _write_manifest(args, argv, [], list(paths.values()), t0)
    print(args.out)
    return EXIT_OK


def cmd_rerun(args, argv):
    with open(args.manifest_file, encoding="utf-8") as f:
        manifest = json.load(f)
    return main(manifest.get("resolved_argv", manifest["argv"]))


def _add_train_flags(p):
    p.add_argument("--src", required=True, help="language-x side of the aligned corpus")
    p.add_argument("--tgt", required=True, help="language-y side, line-aligned with --src")
    p.add_argument("--mono-x", help="extra monolingual language-x documents, one per line")
    p.add_argument("--mono-y", help="extra monolingual language-y documents, one per line")
    p.add_argument("--no-mono", action="store_true", help="ignore --mono-x/--mono-y")
    p.add_argument("--dim", type=int, default=40, help="embedding size D (default 40)")
    p.add_argument("--epochs", type=int, default=20, help="training epochs (default 20)")
    p.add_argument("--merge", type=int, default=5,
                   help="sentence pairs merged per training instance (default 5)")
    p.add_argument("--variant", choices=("binary", "tree"), default="binary")
    p.add_argument("--lambda", dest="lam", type=float, default=4.0,
                   help="correlation weight; 0 disables the regularizer (default 4)")
    p.add_argument("--corr-batch", type=int, default=20,
                   help="merged instances per correlation window and SGD step (default 20)")
    p.add_argument("--lr", type=float, default=None,
                   help=f"per-instance learning rate (default {DEFAULT_LR})")
    p.add_argument("--nonlinearity", choices=("sigmoid", "tanh"), default="sigmoid")
    p.add_argument("--aggregation", choices=("sum", "average"), default="sum",
                   help="tree-variant encoder aggregation")
    p.add_argument("--tie-decoders", action="store_true",
                   help="binary variant: decoder matrix is the transposed embedding matrix")
    p.add_argument("--cross-only", action="store_true",
                   help="drop the self-reconstruction terms of aligned pairs")
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--max-vocab", type=int, default=None)
    p.add_argument("--threads", type=int, default=1,
                   help="gradient threads per window; 1 is the reproducible mode")
    p.add_argument("--seed", type=int, default=_default_seed())


def _add_eval_flags(p, sizes=False):
    p.add_argument("--model", required=True)
    p.add_argument("--train", required=True, help="labelled training documents (label<TAB>text)")
    p.add_argument("--test", required=True, help="labelled test documents")
    p.add_argument("--train-lang", choices=("x", "y"), default="x")
    p.add_argument("--test-lang", choices=("x", "y"), default="y")
    p.add_argument("--idf-docs", help="test-language documents supplying idf (default: --test)")
    if not sizes:
        p.add_argument("--train-size", type=int, default=1000)
    p.add_argument("--perceptron-epochs", type=int, default=10)
    p.add_argument("--l2-normalize-doc", action="store_true")
    p.add_argument("--seed", type=int, default=_default_seed())


def build_parser():
    parser = argparse.ArgumentParser(prog="bae", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--manifest", help="where to write the run manifest")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train bilingual embeddings")
    _add_train_flags(p)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--report", help="training report JSON (default <out>.report.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("nn", help="nearest neighbours of a word")
    p.add_argument("--model", required=True)
    p.add_argument("--word", required=True)
    p.add_argument("--lang", choices=("x", "y"), default="x", help="language of --word")
    p.add_argument("--cross", action="store_true", help="search the other language")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", help="TSV output (default stdout)")
    p.set_defaults(func=cmd_nn)

    p = sub.add_parser("export", help="write embeddings as text")
    p.add_argument("--model", required=True)
    p.add_argument("--lang", choices=("x", "y"), default="x")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("doc-vec", help="tf-idf document vectors")
    p.add_argument("--model", required=True)
    p.add_argument("--docs", required=True, help="labelled documents (label<TAB>text)")
    p.add_argument("--lang", choices=("x", "y"), default="x")
    p.add_argument("--idf-docs", help="documents supplying idf (default: --docs)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_doc_vec)

    p = sub.add_parser("classify", help="train a perceptron and predict")
    _add_eval_flags(p)
    p.add_argument("--predictions", help="TSV doc_id<TAB>gold<TAB>pred")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval", help="classification metrics as JSON")
    _add_eval_flags(p)
    p.add_argument("--metrics", help="also write the JSON metrics here")
    p.add_argument("--predictions", help="TSV doc_id<TAB>gold<TAB>pred")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-trainsize", help="accuracy versus classifier training size")
    _add_eval_flags(p, sizes=True)
    p.add_argument("--sizes", type=_int_list, default=list(TRAIN_SIZES))
    p.add_argument("--out", required=True, help="CSV output")
    p.set_defaults(func=cmd_sweep_trainsize)

    p = sub.add_parser("sweep-merge", help="retrain per merge size, evaluate both directions")
    _add_train_flags(p)
    p.add_argument("--merges", type=_int_list, default=list(MERGE_SIZES))
    p.add_argument("--train-x", required=True)
    p.add_argument("--test-x", required=True)
    p.add_argument("--train-y", required=True)
    p.add_argument("--test-y", required=True)
    p.add_argument("--train-size", type=int, default=1000)
    p.add_argument("--perceptron-epochs", type=int, default=10)
    p.add_argument("--l2-normalize-doc", action="store_true")
    p.add_argument("--out", required=True, help="CSV output")
    p.set_defaults(func=cmd_sweep_merge)

    p = sub.add_parser("gen-synth", help="generate a synthetic bilingual corpus")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--vocab-size", type=int, default=50)
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--pairs", type=int, default=2000)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--docs-train", type=int, default=1000)
    p.add_argument("--docs-test", type=int, default=500)
    p.add_argument("--seed", type=int, default=_default_seed(1))
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("rerun", help="re-execute the command recorded in a manifest")
    p.add_argument("manifest_file")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args, argv)
    except NumericError as e:
        print(f"bae: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorpusError, DataError, ModelFormatError, OSError, UnicodeDecodeError) as e:
        print(f"bae: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"bae: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

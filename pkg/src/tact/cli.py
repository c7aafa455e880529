"""Command-line entry point: ``tact train | eval | rcg | rerun``.

Every command resolves its arguments into a JSON manifest, writes it to the
run directory, and only then starts computing. ``tact rerun MANIFEST``
replays a manifest, optionally into a different run directory.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
MANIFEST = "manifest.json"

log = logging.getLogger("tact")


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ parsing


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, default=32, help="embedding width d")
    p.add_argument("--hops", type=int, default=2, help="subgraph radius k")
    p.add_argument("--layers", type=int, default=2, help="R-GCN depth L")
    p.add_argument("--parts", default=None, help="score inputs over {n,g,r}; default ngr (r for --variant base)")
    p.add_argument("--variant", default="full", choices=["full", "base", "no-ra", "no-rc"])
    p.add_argument("--scope", default="local", choices=["local", "global"],
                   help="correlation neighbourhood: edges adjacent to the target pair, or the whole-graph RCG")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="run directory; every output lands here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="cap numeric worker threads")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tact", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model and write a checkpoint")
    t.add_argument("--data", required=True, help="directory with train.txt (and optional valid.txt)")
    t.add_argument("--test-data", default=None, help="inductive directory to evaluate after training")
    _add_model_flags(t)
    t.add_argument("--margin", type=float, default=None, help="hinge margin; default by dataset family")
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--batch", type=int, default=16)
    t.add_argument("--epochs", type=int, default=10)
    t.add_argument("--neg", type=int, default=1, help="negatives per positive")
    t.add_argument("--neg-rel", type=float, default=0.0,
                   help="probability that a negative corrupts the relation instead of an entity")
    t.add_argument("--early-stop", action="store_true", help="keep the best epoch by valid AUC-PR")
    t.add_argument("--metric", default="both", choices=["auc-pr", "rank", "both"])
    _add_common(t)

    e = sub.add_parser("eval", help="evaluate a checkpoint or the frequency baseline")
    e.add_argument("--test-data", required=True, help="inductive directory with train.txt (facts) and test.txt")
    e.add_argument("--checkpoint", default=None, help="checkpoint JSON (not needed with --baseline frequency)")
    e.add_argument("--data", default=None, help="training directory; needed for --freq-source train")
    e.add_argument("--metric", default="both", choices=["auc-pr", "rank", "both"])
    e.add_argument("--baseline", default="none", choices=["none", "frequency"])
    e.add_argument("--freq-source", default="fact", choices=["fact", "train", "both"],
                   help="graph whose relation counts rank candidates in the frequency baseline")
    e.add_argument("--dump-subgraphs", type=int, default=0, metavar="N",
                   help="write the enclosing subgraphs of the first N test triples as TSV")
    _add_common(e)

    r = sub.add_parser("rcg", help="export the relational correlation graph of a triple file")
    r.add_argument("--data", required=True, help="triple file, or a directory holding train.txt")
    _add_common(r)

    rr = sub.add_parser("rerun", help="replay a manifest")
    rr.add_argument("manifest")
    rr.add_argument("--out", default=None, help="run directory (default: the manifest's own)")
    rr.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Flatten parsed flags into a manifest, with defaults made explicit."""
    cfg = {k: v for k, v in vars(args).items() if k not in ("verbose",)}
    for key in ("data", "test_data", "checkpoint", "out"):
        if cfg.get(key):
            cfg[key] = str(Path(cfg[key]).resolve())
    if args.command == "train":
        if cfg["variant"] == "base":
            if cfg["parts"] not in (None, "r"):
                raise UsageError("--variant base scores with the relation embedding only; use --parts r")
            cfg["parts"], cfg["variant"] = "r", "full"
            cfg["base"] = True
        elif cfg["parts"] is None:
            cfg["parts"] = "ngr"
        if cfg["margin"] is None:
            from tact.training import default_margin

            cfg["margin"] = default_margin(Path(cfg["data"]).name)
    if args.command == "eval" and args.baseline == "none" and not args.checkpoint:
        raise UsageError("eval needs --checkpoint unless --baseline frequency is given")
    if args.command == "eval" and args.baseline == "frequency" and args.freq_source != "fact" and not args.data:
        raise UsageError("--freq-source train needs --data")
    return {"tool": "tact", "version": _version(), "command": args.command, "args": cfg}


def _version() -> str:
    from tact import __version__

    return __version__


# ------------------------------------------------------------------ commands


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_train(a: dict, out: Path) -> None:
    from tact.kg import load_dataset
    from tact.training import TrainConfig, save_checkpoint, train

    ds = load_dataset(a["data"])
    config = TrainConfig(
        lr=a["lr"], batch_size=a["batch"], epochs=a["epochs"], margin=a["margin"], hops=a["hops"],
        layers=a["layers"], dim=a["dim"], n_neg=a["neg"], neg_rel=a["neg_rel"], seed=a["seed"],
        parts=a["parts"], variant=a["variant"], scope=a["scope"], early_stop=a["early_stop"],
    )
    with (out / "loss.tsv").open("w", encoding="utf-8") as fh:
        fh.write("epoch\tbatch\tloss\n")

        def on_batch(epoch: int, batch: int, loss: float) -> None:
            fh.write(f"{epoch}\t{batch}\t{loss!r}\n")

        ckpt = train(ds.train, config, valid=ds.valid, on_batch=on_batch)
    save_checkpoint(ckpt, out / "checkpoint.json")
    log.info("wrote %s", out / "checkpoint.json")
    if a.get("test_data"):
        report = evaluate_checkpoint(ckpt, a["test_data"], a["metric"], a["seed"])
        report.write(out, "metrics")


def evaluate_checkpoint(ckpt, test_dir: str, metric: str, seed: int, dump: int = 0, out: Path | None = None):
    from tact.errors import CheckpointError, VocabularyError
    from tact.evaluate import MetricsReport, classification_eval, ranking_eval
    from tact.kg import Vocab, load_split_graph
    from tact.model import exclusion

    test_dir = Path(test_dir)
    rels = Vocab(ckpt.relations, frozen=True)
    try:
        graph, (test,) = load_split_graph(test_dir / "train.txt", [test_dir / "test.txt"], rels)
    except VocabularyError as exc:
        raise CheckpointError(f"test split does not match the checkpoint's relations: {exc}") from None
    if not test:
        raise FileNotFoundError(f"no test triples in {test_dir / 'test.txt'}")
    model = ckpt.model()
    ctx = model.context(graph)
    auc = mrr = hits = None
    if metric in ("auc-pr", "both"):
        auc = classification_eval(model, ctx, test, seed=seed)["auc_pr"]
    if metric in ("rank", "both"):
        res = ranking_eval(model, ctx, test, list(graph.triples) + list(test))
        mrr, hits = res["mrr"], res["hits"]
    if dump and out is not None:
        from tact.subgraph import dump_subgraph

        sub_dir = out / "subgraphs"
        sub_dir.mkdir(exist_ok=True)
        for i, t in enumerate(test[:dump]):
            dump_subgraph(ctx.subgraph(t.head, t.tail, exclusion(graph, t)), sub_dir / f"{i:04d}.tsv", graph)
    return MetricsReport(auc_pr=auc, mrr=mrr, hits=hits, n_queries=len(test), seed=seed)


def cmd_eval(a: dict, out: Path) -> None:
    from tact.evaluate import MetricsReport, frequency_baseline
    from tact.kg import load_dataset, load_split_graph
    from tact.training import load_checkpoint

    if a["checkpoint"]:
        ckpt = load_checkpoint(a["checkpoint"])
        report = evaluate_checkpoint(ckpt, a["test_data"], a["metric"], a["seed"], a["dump_subgraphs"], out)
        report.write(out, "metrics")
    if a["baseline"] == "frequency":
        test_dir = Path(a["test_data"])
        train_graph = load_dataset(a["data"]).train if a["data"] else None
        graph, (test,) = load_split_graph(
            test_dir / "train.txt", [test_dir / "test.txt"],
            None if train_graph is None else train_graph.relation_vocab,
        )
        filt = list(graph.triples) + list(test)
        sources = ["fact", "train"] if a["freq_source"] == "both" else [a["freq_source"]]
        for src in sources:
            counts_graph = graph if src == "fact" else _reindexed(train_graph, graph)
            res = frequency_baseline(counts_graph, test, filt)
            MetricsReport(None, res["mrr"], res["hits"], res["n_queries"], a["seed"]).write(
                out, f"baseline_frequency_{src}"
            )
            log.info("frequency baseline (%s counts): mrr %.4f", src, res["mrr"])


def _reindexed(train_graph, graph):
    """The training graph itself; relation ids already agree because the test
    graph was built on the training relation vocabulary."""
    if train_graph.relation_vocab.items()[: graph.num_relations] != graph.relation_vocab.items():
        raise ValueError("training and test relation vocabularies disagree")
    return train_graph


def cmd_rcg(a: dict, out: Path) -> None:
    from tact.kg import build_graph, load_triples
    from tact.rcg import build_rcg, export_histogram, export_rcg

    src = Path(a["data"])
    if src.is_dir():
        src = src / "train.txt"
    kg = build_graph(load_triples(src))
    rcg = build_rcg(kg)
    n = export_rcg(rcg, out / "rcg.tsv", kg.relation_vocab.items())
    export_histogram(rcg, out / "histogram.tsv")
    log.info("rcg: %d rows, %d reflexive triples skipped", n, rcg.skipped_reflexive)


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "rcg": cmd_rcg}


def execute(manifest: dict) -> None:
    a = manifest["args"]
    out = Path(a["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / MANIFEST, manifest)
    COMMANDS[manifest["command"]](a, out)


def _limit_threads(n: int | None) -> None:
    if n is None:
        return
    if n < 1:
        raise UsageError("--threads must be positive")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "rerun":
            manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
            if manifest.get("tool") != "tact" or manifest.get("command") not in COMMANDS:
                raise UsageError(f"{args.manifest}: not a tact run manifest")
            if args.out:
                manifest["args"]["out"] = str(Path(args.out).resolve())
        else:
            manifest = resolve(args)
        _limit_threads(manifest["args"].get("threads"))
        return _run(manifest)
    except UsageError as exc:
        print(f"tact: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def _run(manifest: dict) -> int:
    from tact.errors import CheckpointError, ConfigError, NumericError, ParseError, VocabularyError

    try:
        execute(manifest)
    except ConfigError as exc:
        print(f"tact: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ParseError, VocabularyError, CheckpointError) as exc:
        print(f"tact: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError) as exc:
        print(f"tact: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

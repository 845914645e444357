"""Command-line entry points.

Subcommands: ingest, run, eval, compare, serve, emb-convert. Batch commands
operate on manifest files (see manifest.py); serve hosts the review API.
All errors go to stderr with an ``error:`` prefix and a nonzero exit status.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import evaluation
from .corpus import CorpusError, load_corpus, load_qrels
from .embeddings import (EmbeddingError, load_embeddings, write_embeddings_binary,
                         write_embeddings_tsv)
from .engine import run_simulation
from .features import FeatureSpace, featurize_corpus, write_feature_cache
from .manifest import ManifestError, RunManifest, load_manifest, topic_seed
from .rerank import RerankError
from .runlog import load_runlog, write_runlog
from .stats import ZeroVarianceError, paired_t_test

KNOWN_ERRORS = (CorpusError, EmbeddingError, ManifestError, RerankError,
                ValueError, OSError)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except KNOWN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="calrank",
                                     description="high-recall review engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build and cache corpus features")
    p.add_argument("corpus")
    p.add_argument("--format", choices=("tsv", "jsonl"), default=None)
    p.add_argument("--out", default="out")
    p.add_argument("--weighting", choices=("tfidf_log", "bm25", "tfidf_bm25"),
                   default="tfidf_log")
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.add_argument("--no-normalize", action="store_true")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="simulate review sessions for every topic")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="override output directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--k", type=int, default=None, help="rerank depth override")
    p.add_argument("--fusion", choices=("e1", "e2", "e3", "e4"), default=None)
    p.add_argument("--negatives", choices=("bmi", "balanced"), default=None)
    p.add_argument("--stop-after", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="recompute metrics from persisted run logs")
    p.add_argument("logs_dir")
    p.add_argument("qrels")
    p.add_argument("--out", default=None, help="where to write reports (default: logs dir)")
    p.add_argument("--ks", default="10,100")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="paired t-test between two run summaries")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("serve", help="host the live review service")
    p.add_argument("manifest")
    p.add_argument("--bind", default=None, help="host:port (default 127.0.0.1:8000)")
    p.add_argument("--data-dir", default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("emb-convert", help="convert embeddings between tsv and binary")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--dim", type=int, default=None, help="required for tsv input")
    p.add_argument("--to", choices=("tsv", "bin"), default=None)
    p.set_defaults(func=cmd_emb_convert)
    return parser


def cmd_ingest(args) -> int:
    corpus = load_corpus(args.corpus, args.format)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    space = FeatureSpace(weighting=args.weighting, k1=args.k1, b=args.b,
                         normalized=not args.no_normalize).for_corpus(corpus)
    cache = out / "features.tsv"
    cached = cache.exists()
    if not cached:
        features = featurize_corpus(corpus, space)
        write_feature_cache(corpus, features, cache)
    print(f"corpus: docs={corpus.n_docs} vocab={len(corpus.vocab)} "
          f"avg_doc_len={corpus.avg_doc_len:.2f} cache={'hit' if cached else 'built'}")
    return 0


def _session_config(manifest: RunManifest, args) -> "SessionConfig":
    config = manifest.session
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.fusion is not None:
        config = replace(config, fusion=args.fusion)
    if args.stop_after is not None:
        config = replace(config, stop_after=args.stop_after)
    if args.negatives is not None:
        kind = "bmi_fixed" if args.negatives == "bmi" else "balanced"
        config = replace(config, negatives=replace(config.negatives, kind=kind))
    if args.k is not None and config.rerank is not None:
        config = replace(config, rerank=replace(config.rerank, k=args.k))
    return config


_WORKER_STATE: dict = {}


def _run_worker_init(manifest_path: str, config_json: str) -> None:
    import pickle

    manifest = load_manifest(manifest_path)
    config = pickle.loads(bytes.fromhex(config_json))
    corpus = manifest.load_corpus()
    space = config.space.for_corpus(corpus)
    _WORKER_STATE.update(
        manifest=manifest, config=config, corpus=corpus,
        features=featurize_corpus(corpus, space),
        topics={t.topic_id: t for t in manifest.load_topics()},
        oracle=manifest.load_qrels(),
        embeddings=manifest.load_embeddings(),
    )


def _run_one_topic(topic_id: str, out_dir: str, ks: tuple[int, ...]) -> dict:
    st = _WORKER_STATE
    topic = st["topics"][topic_id]
    config = replace(st["config"], seed=topic_seed(st["config"].seed, topic_id))
    log = run_simulation(topic, st["corpus"], st["oracle"], config,
                         embeddings=st["embeddings"], features=st["features"])
    r_t = st["oracle"].relevant_count(topic_id)
    report = evaluation.build_report(topic_id, log, r_t, ks)
    topic_dir = Path(out_dir) / topic_id
    topic_dir.mkdir(parents=True, exist_ok=True)
    write_runlog(log, topic_dir / "runlog.tsv")
    evaluation.write_report(report, topic_dir / "report.json")
    evaluation.write_gain_csv(report, topic_dir / "gain.csv")
    return evaluation.report_to_dict(report)


def cmd_run(args) -> int:
    manifest = load_manifest(args.manifest)
    manifest.validate_paths()
    if manifest.qrels_path is None:
        raise ManifestError("run requires a qrels path in the manifest")
    config = _session_config(manifest, args)
    out_dir = Path(args.out) if args.out else manifest.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    topics = manifest.load_topics()
    oracle = manifest.load_qrels()
    for t in topics:
        if not oracle.has_topic(t.topic_id):
            raise ManifestError(f"qrels has no entries for topic {t.topic_id!r}")

    import pickle
    config_hex = pickle.dumps(config).hex()
    topic_ids = [t.topic_id for t in topics]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs, initializer=_run_worker_init,
                                 initargs=(args.manifest, config_hex)) as pool:
            results = list(pool.map(_run_one_topic, topic_ids,
                                    [str(out_dir)] * len(topic_ids),
                                    [manifest.eval_ks] * len(topic_ids)))
    else:
        _run_worker_init(args.manifest, config_hex)
        results = [_run_one_topic(tid, str(out_dir), manifest.eval_ks)
                   for tid in topic_ids]
        _WORKER_STATE.clear()

    _write_summary(results, out_dir)
    print(f"ran {len(results)} topics -> {out_dir}")
    return 0


def _write_summary(report_dicts: list[dict], out_dir: Path) -> None:
    reports = [evaluation.report_from_dict(d) for d in report_dicts]
    summary = {
        "topics": {d["topic_id"]: {k: d[k] for k in
                                   ("p_at", "r_at", "recall_at_4r_1000", "r_t",
                                    "vacuous_recall")}
                   for d in report_dicts},
        "mean": evaluation.aggregate(reports),
    }
    with (out_dir / "summary.json").open("w", encoding="utf-8") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_eval(args) -> int:
    logs_dir = Path(args.logs_dir)
    if not logs_dir.is_dir():
        raise ManifestError(f"logs directory does not exist: {logs_dir}")
    oracle = load_qrels(args.qrels)
    out_dir = Path(args.out) if args.out else logs_dir
    ks = tuple(int(k.strip()) for k in args.ks.split(","))
    report_dicts = []
    topic_dirs = sorted(p for p in logs_dir.iterdir() if (p / "runlog.tsv").exists())
    if not topic_dirs:
        raise ManifestError(f"no runlog.tsv files under {logs_dir}")
    for topic_dir in topic_dirs:
        topic_id = topic_dir.name
        if not oracle.has_topic(topic_id):
            raise ManifestError(f"qrels has no entries for topic {topic_id!r}")
        log = load_runlog(topic_dir / "runlog.tsv")
        report = evaluation.build_report(topic_id, log, oracle.relevant_count(topic_id), ks)
        dest = out_dir / topic_id
        dest.mkdir(parents=True, exist_ok=True)
        evaluation.write_report(report, dest / "report.json")
        evaluation.write_gain_csv(report, dest / "gain.csv")
        report_dicts.append(evaluation.report_to_dict(report))
    _write_summary(report_dicts, out_dir)
    mean = evaluation.aggregate([evaluation.report_from_dict(d) for d in report_dicts])
    print(f"evaluated {len(report_dicts)} topics; "
          f"mean recall@4R+1000 = {evaluation.format_percent(mean['recall_at_4r_1000'])}")
    return 0


def _summary_metrics(path: str) -> dict[str, dict[str, float]]:
    with open(path, "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    out: dict[str, dict[str, float]] = {}
    for topic_id, metrics in summary["topics"].items():
        flat = {"recall_at_4r_1000": metrics["recall_at_4r_1000"]}
        for k, v in metrics["p_at"].items():
            flat[f"p_at.{k}"] = v
        for k, v in metrics["r_at"].items():
            flat[f"r_at.{k}"] = v
        out[topic_id] = flat
    return out


def cmd_compare(args) -> int:
    a = _summary_metrics(args.report_a)
    b = _summary_metrics(args.report_b)
    common = sorted(a.keys() & b.keys())
    if not common:
        raise ManifestError("reports share no topics")
    metrics = sorted(set(a[common[0]]) & set(b[common[0]]))
    results = {}
    for metric in metrics:
        xs = [a[t][metric] for t in common]
        ys = [b[t][metric] for t in common]
        try:
            r = paired_t_test(xs, ys)
            results[metric] = {
                "t_statistic": r.t_statistic,
                "degrees_of_freedom": r.degrees_of_freedom,
                "p_value": r.p_value,
                "mean_difference": r.mean_difference,
            }
            verdict = ("significant" if r.p_value < args.alpha else "not significant")
            print(f"{metric}: p={r.p_value:.4f} ({verdict} at alpha={args.alpha})",
                  file=sys.stderr)
        except ZeroVarianceError:
            results[metric] = {"zero_variance": True, "mean_difference": 0.0}
            print(f"{metric}: zero variance (identical paired values)", file=sys.stderr)
    print(json.dumps({"topics": len(common), "metrics": results}, sort_keys=True, indent=2))
    return 0


def cmd_serve(args) -> int:
    import os

    import uvicorn

    from .service.app import create_app
    from .service.state import ServiceState

    manifest = load_manifest(args.manifest)
    manifest.validate_paths()
    state = ServiceState.from_manifest(manifest, data_dir=args.data_dir)
    bind = args.bind or os.environ.get("BIND_ADDR") or "127.0.0.1:8000"
    host, _, port = bind.rpartition(":")
    app = create_app(state)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def cmd_emb_convert(args) -> int:
    store = load_embeddings(args.input, args.dim)
    to = args.to
    if to is None:
        to = "tsv" if args.output.endswith(".tsv") else "bin"
    if to == "tsv":
        write_embeddings_tsv(store, args.output)
    else:
        write_embeddings_binary(store, args.output)
    print(f"converted {len(store)} vectors (dim={store.dim}) -> {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

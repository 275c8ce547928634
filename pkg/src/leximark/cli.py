"""Command-line surface: embed / score / report / dataset-test / sweep-k /
bench-synonyms / attack / baseline.

Every artifact-producing command writes exactly one JSON manifest
(<out>.manifest.json) holding the argv, the resolved configuration, and
SHA-256 digests of inputs and outputs, so a run can be reproduced and
verified from the manifest alone. Exit codes: 0 success, 2 configuration or
input error, 3 provider failure.

A config file of ``key = value`` lines (keys matching the long flag names)
can prefill any flag; explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .corpus import CorpusError, Label, load_corpus, save_corpus
from . import baselines, detect, embedder, metrics, mia, providers, wordnet
from .entropy import (
    ExclusionPolicy,
    FrequencyTableError,
    default_stoplist,
    heuristic_named_entities,
    load_frequency_table,
    load_stoplist,
)
from .providers import BRIDGE_URL_ENV, ProviderError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROVIDER = 3

_SYNONYM_SOURCE_BY_FLAG = {
    "tsv": "tsv_stub",
    "wndb": "wndb",
    "concat": "remote_concat",
    "dropout": "remote_dropout",
}


class CliError(Exception):
    """Configuration/input problem; maps to exit code 2."""


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_path, argv, args, inputs, outputs, started) -> None:
    manifest = {
        "command": ["leximark", *argv],
        "config": {
            k: v for k, v in sorted(vars(args).items()) if k != "func"
        },
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "tool_version": __version__,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    path = str(out_path) + ".manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _guard_outputs(inputs, outputs) -> None:
    resolved_in = {Path(p).resolve() for p in inputs}
    for out in outputs:
        if Path(out).resolve() in resolved_in:
            raise CliError(f"output path {out} would overwrite an input file")


def _bridge_url(args) -> str:
    url = os.environ.get(BRIDGE_URL_ENV) or getattr(args, "bridge_url", None)
    if not url:
        raise CliError(
            f"a bridge URL is required (--bridge-url or ${BRIDGE_URL_ENV})"
        )
    return url


def _build_synonym_provider(args, source_flag: str):
    if source_flag == "tsv":
        if not args.lexicon:
            raise CliError("--synonyms tsv requires --lexicon FILE")
        return providers.LexiconSynonymProvider(
            wordnet.load_tsv_lexicon(args.lexicon)
        )
    if source_flag == "wndb":
        if not args.wndb_dir:
            raise CliError("--synonyms wndb requires --wndb-dir DIR")
        synsets = wordnet.parse_wndb(args.wndb_dir)
        return providers.LexiconSynonymProvider(wordnet.build_lexicon(synsets))
    return providers.HttpBridgeClient(
        _bridge_url(args), model=getattr(args, "model", None),
        lexsub_mode=source_flag,
    )


def _build_embedding_provider(args):
    if args.embedding == "hash":
        return providers.HashingEmbeddingProvider()
    return providers.HttpBridgeClient(_bridge_url(args))


def _exclusions(args) -> ExclusionPolicy:
    stopwords = (
        load_stoplist(args.stoplist) if args.stoplist else default_stoplist()
    )
    detector = None if args.no_ner else heuristic_named_entities
    return ExclusionPolicy(stopwords, detector)


def _load_docs(path):
    docs = load_corpus(path)
    if not docs:
        raise CliError(f"corpus {path} is empty")
    return docs


def _embed_resources(args):
    if not args.freq_table:
        raise CliError("--freq-table is required")
    table = load_frequency_table(args.freq_table)
    config = embedder.EmbedConfig(
        k=args.k,
        synonym_source=_SYNONYM_SOURCE_BY_FLAG[args.synonyms],
        similarity_threshold=args.sim_threshold,
        top_n_candidates=args.top_n,
        watermark_fraction=args.fraction,
        seed=args.seed,
    )
    bundle = embedder.ProviderBundle(
        synonyms=_build_synonym_provider(args, args.synonyms),
        embeddings=(
            _build_embedding_provider(args)
            if args.sim_threshold is not None
            else None
        ),
    )
    return table, config, bundle


def cmd_embed(args, argv) -> int:
    started = datetime.now(timezone.utc).isoformat()
    docs = _load_docs(args.corpus)
    table, config, bundle = _embed_resources(args)
    log_path = args.log or str(args.out) + ".log.jsonl"
    inputs = [p for p in (args.corpus, args.freq_table, args.lexicon,
                          args.stoplist) if p]
    _guard_outputs(inputs, [args.out, log_path])

    # The corpus-wide cache is built in document order; that sequential pass
    # is the reference output, so --threads does not change embedding.
    marked, log = embedder.embed_corpus(
        docs, table, bundle, config, _exclusions(args)
    )
    save_corpus(marked, args.out)
    log.save(log_path)
    _write_manifest(args.out, argv, args, inputs, [args.out, log_path], started)
    print(f"watermarked {len(log.watermarked_ids)}/{len(docs)} documents -> {args.out}")
    return EXIT_OK


def _logprob_source(args):
    if args.dump:
        return providers.ReplayLogProbSource(args.dump)
    client = providers.HttpBridgeClient(
        _bridge_url(args), model=getattr(args, "model", None)
    )
    return providers.ProviderLogProbSource(client)


def cmd_score(args, argv) -> int:
    started = datetime.now(timezone.utc).isoformat()
    docs = _load_docs(args.corpus)
    methods = args.methods.split(",")
    k_pcts = [float(k) for k in args.k_pct.split(",")]
    columns = mia.score_columns(methods, k_pcts)
    source = _logprob_source(args)
    inputs = [p for p in (args.corpus, args.dump) if p]
    _guard_outputs(inputs, [args.out])

    def score_one(pair):
        doc, result = pair
        return mia.score_document(doc, result, methods, k_pcts)

    # Batched fetch + immediate writes: a provider hard error mid-run leaves
    # the rows scored so far on disk.
    batch_size = 16
    n_scored = 0
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["doc_id", "label", "token_count", *columns])
        fh.flush()
        for i in range(0, len(docs), batch_size):
            batch = docs[i : i + batch_size]
            results = source.records_for_documents(batch)
            pairs = list(zip(batch, results))
            if args.threads > 1:
                with ThreadPoolExecutor(max_workers=args.threads) as pool:
                    scored = list(pool.map(score_one, pairs))
            else:
                scored = [score_one(p) for p in pairs]
            for sd in scored:
                writer.writerow(
                    [sd.doc_id, sd.label.value, sd.token_count]
                    + [repr(sd.scores[c]) for c in columns]
                )
            fh.flush()
            n_scored += len(scored)
    _write_manifest(args.out, argv, args, inputs, [args.out], started)
    print(f"scored {n_scored} documents ({', '.join(columns)}) -> {args.out}")
    return EXIT_OK


def cmd_report(args, argv) -> int:
    started = datetime.now(timezone.utc).isoformat()
    methods = args.methods.split(",") if args.methods else None
    fpr_levels = [float(x) for x in args.fpr.split(",")]
    reports = detect.report(args.scores, methods, fpr_levels)
    _guard_outputs([args.scores], [args.out])
    detect.write_report_csv(reports, args.out)
    _write_manifest(args.out, argv, args, [args.scores], [args.out], started)
    print(detect.format_report_table(reports))
    return EXIT_OK


def _parse_sizes(spec: str) -> list[int]:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) not in (2, 3):
            raise CliError(f"bad --group-sizes {spec!r} (want lo:hi[:step])")
        lo, hi = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
        if lo < 2 or hi < lo or step < 1:
            raise CliError(f"bad --group-sizes range {spec!r}")
        return list(range(lo, hi + 1, step))
    return [int(x) for x in spec.split(",")]


def cmd_dataset_test(args, argv) -> int:
    started = datetime.now(timezone.utc).isoformat()
    _, scored = mia.read_scores_csv(args.scores)
    members = [sd.scores[args.method] for sd in scored if sd.label is Label.MEMBER]
    nonmembers = [
        sd.scores[args.method] for sd in scored if sd.label is Label.NONMEMBER
    ]
    if not members or not nonmembers:
        raise CliError("score file must contain both member and nonmember labels")
    if args.member_subset_fraction is not None:
        if not (0.0 < args.member_subset_fraction <= 1.0):
            raise CliError("--member-subset-fraction outside (0, 1]")
        import random as _random

        keep = max(2, int(len(members) * args.member_subset_fraction))
        members = _random.Random(args.seed).sample(members, keep)
    sizes = _parse_sizes(args.group_sizes)
    try:
        results = detect.dataset_inference_sweep(
            members, nonmembers, sizes, args.reps, args.seed
        )
    except detect.DetectionError as exc:
        raise CliError(str(exc)) from None
    _guard_outputs([args.scores], [args.out])
    detect.write_sweep_csv(results, args.out)
    _write_manifest(args.out, argv, args, [args.scores], [args.out], started)
    first = next((r.group_size for r in results if r.mean_p_value < 0.05), None)
    msg = f"first size with mean p < 0.05: {first}" if first else "no size reached p < 0.05"
    print(f"swept {len(sizes)} group sizes -> {args.out}; {msg}")
    return EXIT_OK


def cmd_sweep_k(args, argv) -> int:
    started = datetime.now(timezone.utc).isoformat()
    docs = _load_docs(args.corpus)
    k_values = [int(k) for k in args.k_list.split(",")]
    if any(k < 1 for k in k_values):
        raise CliError("--k-list values must be >= 1")
    thresholds = [float(t) for t in args.cos_thresholds.split(",")]
    embed_provider = providers.HashingEmbeddingProvider()
    source = providers.ReplayLogProbSource(args.dump) if args.dump else None

    rows = []
    for k in k_values:
        args.k = k
        table, config, bundle = _embed_resources(args)
        marked, _ = embedder.embed_corpus(
            docs, table, bundle, config, _exclusions(args)
        )
        pairs = [(d.text, m.text) for d, m in zip(docs, marked)]
        rep = metrics.semantic_report(pairs, embed_provider, thresholds)
        auroc_value = ""
        if source is not None:
            scored = mia.score_corpus(marked, source, [args.auroc_method_base],
                                      [args.auroc_k_pct])
            col = mia.score_columns([args.auroc_method_base], [args.auroc_k_pct])[0]
            try:
                auroc_value = repr(
                    detect.report_from_scored(scored, [col])[0].auroc
                )
            except detect.DetectionError:
                auroc_value = ""
        rows.append((k, auroc_value, rep))

    _guard_outputs([args.corpus], [args.out])
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["k", "auroc", "mean_bleu", *[f"cos_{t:g}" for t in thresholds],
             "n_pairs"]
        )
        for k, auroc_value, rep in rows:
            writer.writerow(
                [k, auroc_value, repr(rep.mean_bleu),
                 *[repr(rep.cos_fraction[t]) for t in thresholds], rep.n_pairs]
            )
    inputs = [p for p in (args.corpus, args.freq_table, args.lexicon, args.dump) if p]
    _write_manifest(args.out, argv, args, inputs, [args.out], started)
    print(f"swept K over {k_values} -> {args.out}")
    return EXIT_OK


def cmd_bench_synonyms(args, argv) -> int:
    started = datetime.now(timezone.utc).isoformat()
    docs = _load_docs(args.corpus)
    if args.warmup >= len(docs):
        raise CliError("--warmup must leave at least one timed document")
    table = load_frequency_table(args.freq_table)
    exclusions = _exclusions(args)
    rows = []
    for flag in args.methods.split(","):
        if flag not in _SYNONYM_SOURCE_BY_FLAG:
            raise CliError(f"unknown synonym method {flag!r}")
        config = embedder.EmbedConfig(
            k=args.k, synonym_source=_SYNONYM_SOURCE_BY_FLAG[flag],
            top_n_candidates=args.top_n, seed=args.seed,
        )
        try:
            bundle = embedder.ProviderBundle(
                synonyms=_build_synonym_provider(args, flag)
            )
            timings = []
            for i, doc in enumerate(docs):
                # Fresh cache per document: the benchmark isolates the
                # per-document cost of each synonym source.
                t0 = time.perf_counter()
                embedder.embed_document(doc, table, bundle, config, {}, exclusions)
                dt = time.perf_counter() - t0
                if i >= args.warmup:
                    timings.append(dt)
            rows.append((flag, repr(sum(timings) / len(timings)), "ok"))
        except ProviderError as exc:
            print(f"method {flag} failed: {exc}", file=sys.stderr)
            rows.append((flag, "", "failed"))
    _guard_outputs([args.corpus, args.freq_table], [args.out])
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "mean_seconds_per_doc", "status"])
        writer.writerows(rows)
    inputs = [p for p in (args.corpus, args.freq_table, args.lexicon) if p]
    _write_manifest(args.out, argv, args, inputs, [args.out], started)
    for row in rows:
        print(f"{row[0]}: {row[1] or 'failed'}")
    return EXIT_OK


def cmd_attack(args, argv) -> int:
    started = datetime.now(timezone.utc).isoformat()
    docs = _load_docs(args.corpus)
    lexicon = wordnet.load_tsv_lexicon(args.lexicon)
    mode = {"random-syn": "random_synonym", "targeted": "targeted_low_entropy"}
    config = baselines.AttackConfig(mode=mode[args.mode], k=args.k, seed=args.seed)
    table = None
    if config.mode == "targeted_low_entropy":
        if not args.freq_table:
            raise CliError("--mode targeted requires --freq-table")
        table = load_frequency_table(args.freq_table)
    out_docs = [baselines.apply_attack(d, config, lexicon, table) for d in docs]
    inputs = [p for p in (args.corpus, args.lexicon, args.freq_table) if p]
    _guard_outputs(inputs, [args.out])
    save_corpus(out_docs, args.out)
    _write_manifest(args.out, argv, args, inputs, [args.out], started)
    print(f"attacked {len(docs)} documents ({args.mode}) -> {args.out}")
    return EXIT_OK


def cmd_baseline(args, argv) -> int:
    started = datetime.now(timezone.utc).isoformat()
    docs = _load_docs(args.corpus)
    hmap = (
        baselines.load_homoglyph_map(args.map)
        if args.map
        else baselines.HomoglyphMap.default()
    )
    outputs = [args.out]
    inputs = [p for p in (args.corpus, args.map) if p]
    if args.mode == "unicode":
        op = baselines.remove_unicode if args.remove else baselines.watermark_unicode
        out_docs = [op(d, hmap) for d in docs]
    else:  # randomseq
        if args.remove:
            if not args.log:
                raise CliError("randomseq removal requires --log from the embed run")
            records = baselines.load_insertion_log(args.log)
            by_doc: dict[str, list] = {}
            for rec in records:
                by_doc.setdefault(rec.doc_id, []).append(rec)
            out_docs = [
                baselines.remove_random_sequence(d, by_doc.get(d.id, []))
                for d in docs
            ]
            inputs.append(args.log)
        else:
            log_path = args.log or str(args.out) + ".log.jsonl"
            out_docs = []
            all_records = []
            for d in docs:
                marked, records = baselines.watermark_random_sequence(
                    d, args.seed, args.seq_len, args.insertions
                )
                out_docs.append(marked)
                all_records.extend(records)
            baselines.save_insertion_log(all_records, log_path)
            outputs.append(log_path)
    _guard_outputs(inputs, outputs)
    save_corpus(out_docs, args.out)
    _write_manifest(args.out, argv, args, inputs, outputs, started)
    print(f"{args.mode}{' removal' if args.remove else ''} on {len(docs)} docs -> {args.out}")
    return EXIT_OK


def _add_embed_flags(p) -> None:
    p.add_argument("--k", type=int, default=5, help="words substituted per sentence")
    p.add_argument("--synonyms", choices=sorted(_SYNONYM_SOURCE_BY_FLAG),
                   default="tsv")
    p.add_argument("--lexicon", help="TSV lexicon (for --synonyms tsv)")
    p.add_argument("--wndb-dir", help="WNDB database directory (for --synonyms wndb)")
    p.add_argument("--freq-table", help="word<TAB>probability TSV")
    p.add_argument("--stoplist", help="override the bundled function-word list")
    p.add_argument("--no-ner", action="store_true",
                   help="disable the named-entity exclusion heuristic")
    p.add_argument("--sim-threshold", type=float, default=None)
    p.add_argument("--embedding", choices=["hash", "bridge"], default="hash",
                   help="embedding provider for the similarity filter")
    p.add_argument("--fraction", type=float, default=1.0,
                   help="fraction of documents to watermark")
    p.add_argument("--top-n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bridge-url")
    p.add_argument("--model")
    p.add_argument("--threads", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leximark",
        description="Corpus watermarking and training-data membership detection.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="key=value file prefilling any flag")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="watermark a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="watermark log path (default <out>.log.jsonl)")
    _add_embed_flags(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("score", help="compute MIA scores from token log-probs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--methods", default="ppl,zlib,min_k,min_kpp")
    p.add_argument("--k-pct", default="20.0")
    p.add_argument("--dump", help="recorded log-prob dump (JSONL)")
    p.add_argument("--bridge-url")
    p.add_argument("--model")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="AUROC / TPR@FPR per method")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--methods")
    p.add_argument("--fpr", default="0.05")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("dataset-test", help="group-size sweep of the t-test")
    p.add_argument("--scores", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", required=True, help="score column to test")
    p.add_argument("--group-sizes", default="2:100")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--member-subset-fraction", type=float)
    p.set_defaults(func=cmd_dataset_test)

    p = sub.add_parser("sweep-k", help="semantic metrics (and optional AUROC) per K")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k-list", default="3,5,7")
    p.add_argument("--cos-thresholds", default="0.7,0.8,0.9,0.95")
    p.add_argument("--dump", help="log-prob dump enabling the AUROC column")
    p.add_argument("--auroc-method-base", default="min_kpp")
    p.add_argument("--auroc-k-pct", type=float, default=20.0)
    _add_embed_flags(p)
    p.set_defaults(func=cmd_sweep_k)

    p = sub.add_parser("bench-synonyms", help="time synonym sources per document")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--methods", default="tsv")
    p.add_argument("--warmup", type=int, default=1)
    _add_embed_flags(p)
    p.set_defaults(func=cmd_bench_synonyms)

    p = sub.add_parser("attack", help="synonym-substitution removal attacks")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["random-syn", "targeted"], required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--freq-table")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("baseline", help="random-sequence / Unicode watermarks")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["randomseq", "unicode"], required=True)
    p.add_argument("--remove", action="store_true")
    p.add_argument("--log", help="insertion log (written, or read with --remove)")
    p.add_argument("--seq-len", type=int, default=10)
    p.add_argument("--insertions", type=int, default=1)
    p.add_argument("--map", help="homoglyph override TSV")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_baseline)

    return parser


def _config_to_argv(path) -> list[str]:
    """Turn a key=value config file into flags prepended after the command."""
    extra: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise CliError(f"{path}:{lineno}: expected key = value")
            key, value = (part.strip() for part in stripped.split("=", 1))
            flag = "--" + key.replace("_", "-")
            value = value.strip("\"'")
            if value.lower() in ("true", "false"):
                if value.lower() == "true":
                    extra.append(flag)
            else:
                extra.extend([flag, value])
    return extra


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        # A config file contributes defaults by splicing synthetic flags in
        # right after the subcommand, so real flags (later) win.
        if "--config" in argv:
            idx = argv.index("--config")
            cfg_path = argv[idx + 1]
            rest = argv[:idx] + argv[idx + 2 :]
            if not rest:
                raise CliError("--config requires a subcommand")
            extra = _config_to_argv(cfg_path)
            argv = [rest[0], *extra, *rest[1:]]
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args, argv)
    except (CliError, CorpusError, FrequencyTableError,
            wordnet.WndbFormatError, wordnet.LexiconFormatError,
            embedder.EmbedConfigError, mia.ScoringError,
            detect.DetectionError, metrics.MetricsError,
            baselines.HomoglyphMapError, FileNotFoundError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()

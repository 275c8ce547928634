#!/usr/bin/env python3
"""End-to-end demo on synthetic data, no model required.

Builds a labeled corpus, watermarks it, simulates a suspect model whose
log-probs are biased upward on the watermarked member split (standing in for
a model that memorized it), then runs the whole detection side: MIA scoring,
AUROC/TPR report, and the dataset-inference group-size sweep. Also
demonstrates the removal attacks. Artifacts land in --out-dir.
"""

import argparse
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from leximark.cli import main as cli
from leximark.corpus import Document, Label, load_corpus, save_corpus
from leximark.providers import (
    ProviderLogProbSource,
    SyntheticLogProbProvider,
    save_logprob_dump,
)

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

VOCAB = (
    "alpha beta gamma delta epsilon zeta eta theta report shows growth "
    "quick brown fox jumps lazy dog leverages personalize product"
).split()


def build_corpus(path, n_docs, seed):
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        words = rng.choices(VOCAB, k=rng.randint(8, 14))
        label = Label.MEMBER if i < n_docs // 2 else Label.NONMEMBER
        docs.append(Document(f"doc{i:03d}", " ".join(words) + ".", label))
    save_corpus(docs, path)
    return docs


def run(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_path = out / "corpus.jsonl"
    build_corpus(corpus_path, args.n_docs, args.seed)

    print("== embedding the watermark ==")
    marked_path = out / "watermarked.jsonl"
    rc = cli([
        "embed", "--corpus", str(corpus_path), "--out", str(marked_path),
        "--k", "3", "--synonyms", "tsv",
        "--lexicon", str(FIXTURES / "stub_lexicon.tsv"),
        "--freq-table", str(FIXTURES / "frequency.tsv"),
        "--seed", str(args.seed),
    ])
    assert rc == 0

    print("\n== simulating a suspect model (memorized the member split) ==")
    marked = load_corpus(marked_path)
    member_texts = [d.text for d in marked if d.label is Label.MEMBER]
    provider = SyntheticLogProbProvider(
        seed=args.seed, flag_bias=1.5, biased_texts=member_texts
    )
    results = ProviderLogProbSource(provider).records_for_documents(marked)
    dump_path = out / "suspect_model_dump.jsonl"
    save_logprob_dump(dump_path, [d.id for d in marked], results)

    print("== scoring with the MIA kernels ==")
    scores_path = out / "scores.csv"
    rc = cli([
        "score", "--corpus", str(marked_path), "--dump", str(dump_path),
        "--methods", "ppl,zlib,min_k,min_kpp", "--k-pct", "20",
        "--out", str(scores_path),
    ])
    assert rc == 0

    print("\n== record-level detection report ==")
    rc = cli([
        "report", "--scores", str(scores_path), "--out", str(out / "report.csv"),
        "--fpr", "0.01,0.05",
    ])
    assert rc == 0

    print("\n== dataset-level inference sweep ==")
    rc = cli([
        "dataset-test", "--scores", str(scores_path), "--method", "min_kpp_20.0",
        "--group-sizes", f"2:{args.n_docs // 2}", "--reps", "50",
        "--seed", str(args.seed), "--out", str(out / "sweep.csv"),
    ])
    assert rc == 0

    print("\n== removal attacks on the watermarked corpus ==")
    rc = cli([
        "attack", "--corpus", str(marked_path), "--mode", "targeted", "--k", "3",
        "--lexicon", str(FIXTURES / "inverse_lexicon.tsv"),
        "--freq-table", str(FIXTURES / "frequency.tsv"),
        "--out", str(out / "attacked_targeted.jsonl"),
    ])
    assert rc == 0
    rc = cli([
        "baseline", "--corpus", str(corpus_path), "--mode", "unicode",
        "--out", str(out / "unicode_marked.jsonl"),
    ])
    assert rc == 0
    print(f"\nartifacts in {out}/")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--out-dir", default="demo_out")
    parser.add_argument("--n-docs", type=int, default=60)
    parser.add_argument("--seed", type=int, default=7)
    run(parser.parse_args())

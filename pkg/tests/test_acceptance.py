"""Acceptance suite: one test per exit criterion, each printing a PASS line
with its measured runtime (run with ``pytest tests/test_acceptance.py -v -s``).
Budgets are asserted, not aspirational.
"""

import csv
import hashlib
import math
import random
import time

import numpy as np
import pytest
from scipy import stats as scipy_stats

from leximark.baselines import (
    DEFAULT_HOMOGLYPHS,
    attack_targeted,
    remove_random_sequence,
    remove_unicode,
    watermark_random_sequence,
    watermark_unicode,
)
from leximark.cli import EXIT_OK, main
from leximark.corpus import Document, load_corpus
from leximark.detect import auroc, dataset_inference_sweep, welch_t_test
from leximark.embedder import EmbedConfig, ProviderBundle, embed_corpus, embed_document
from leximark.entropy import ExclusionPolicy, FrequencyTable
from leximark.metrics import bleu
from leximark.mia import score_min_k
from leximark.providers import LexiconSynonymProvider, TokenLogProbRecord
from leximark.wordnet import Lexicon

from conftest import (
    ECOMMERCE_ORIGINAL,
    ECOMMERCE_WATERMARKED,
    FIXTURES,
    FOX_ORIGINAL,
    FOX_WATERMARKED,
)
from test_metrics import bleu_oracle


class Budget:
    """Context manager asserting the criterion's runtime budget."""

    def __init__(self, name, seconds):
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        status = "PASS" if exc_type is None else "FAIL"
        print(f"[acceptance] {self.name}: {status} ({elapsed:.2f}s)")
        if exc_type is None:
            assert elapsed < self.seconds, (
                f"{self.name} exceeded budget: {elapsed:.2f}s >= {self.seconds}s"
            )
        return False


def sha256(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


def test_figure1_reproduction(freq_table, stub_bundle):
    with Budget("figure-1 reproduction", 1.0):
        doc = Document("fig1", FOX_ORIGINAL)
        out, _ = embed_document(doc, freq_table, stub_bundle,
                                EmbedConfig(k=3), {})
        assert out.text == FOX_WATERMARKED


def test_figure2_reproduction(freq_table, stub_bundle):
    with Budget("figure-2 reproduction", 1.0):
        doc = Document("fig2", ECOMMERCE_ORIGINAL)
        out, _ = embed_document(doc, freq_table, stub_bundle,
                                EmbedConfig(k=3), {})
        assert out.text == ECOMMERCE_WATERMARKED


def test_entropy_monotonicity_1000_docs():
    with Budget("entropy monotonicity, 1000 random documents", 30.0):
        rng = random.Random(20240817)
        letters = "abcdefghij"
        vocab = ["".join((a, b, c)) for a in letters for b in letters
                 for c in letters][:300]
        table = FrequencyTable({w: 10 ** -rng.uniform(2, 8) for w in vocab})
        lexicon = {w: rng.sample(vocab, 4) for w in vocab if rng.random() < 0.8}
        bundle = ProviderBundle(synonyms=LexiconSynonymProvider(Lexicon(lexicon)))
        k = 4
        docs = []
        for i in range(1000):
            sentences = [
                " ".join(rng.sample(vocab, rng.randint(5, 12))) + "."
                for _ in range(rng.randint(1, 3))
            ]
            docs.append(Document(f"d{i}", " ".join(sentences)))
        _, log = embed_corpus(docs, table, bundle, EmbedConfig(k=k, seed=1),
                              ExclusionPolicy.none())
        assert log.records, "randomized run produced no substitutions"
        per_sentence = {}
        for rec in log.records:
            assert rec.replacement_entropy > rec.original_entropy
            per_sentence.setdefault((rec.doc_id, rec.sentence_index), set()).add(
                rec.original.lower()
            )
        assert max(len(ws) for ws in per_sentence.values()) <= k


def test_kernel_oracles():
    with Budget("kernel oracles (min-k, auroc, welch, bleu)", 60.0):
        rng = random.Random(99)

        # score_min_k: bit-for-bit against a full-sort oracle on 1000 vectors
        for _ in range(1000):
            n = rng.randint(1, 32)
            lps = [-rng.uniform(0, 12) for _ in range(n)]
            k = rng.choice([1, 5, 10, 20, 40, 60, 80, 100])
            records = [
                TokenLogProbRecord(f"t{i}", lp, -2.0, 1.0, position=i, scored=True)
                for i, lp in enumerate(lps)
            ]
            m = max(1, math.floor(k / 100 * n))
            oracle = math.fsum(sorted(lps)[:m]) / m
            assert score_min_k(records, k) == oracle

        # auroc: against exhaustive pairwise enumeration
        for _ in range(200):
            members = [rng.gauss(0.4, 1) for _ in range(rng.randint(1, 25))]
            nonmembers = [rng.gauss(0, 1) for _ in range(rng.randint(1, 25))]
            if rng.random() < 0.25:
                members[0] = nonmembers[0]
            total = 0.0
            for a in members:
                for b in nonmembers:
                    total += 1.0 if a > b else (0.5 if a == b else 0.0)
            oracle = total / (len(members) * len(nonmembers))
            assert abs(auroc(members, nonmembers) - oracle) <= 1e-9

        # welch_t_test: against an independent statistics implementation
        for _ in range(100):
            m = [rng.gauss(rng.uniform(-1, 1), rng.uniform(0.5, 2))
                 for _ in range(rng.randint(2, 50))]
            n = [rng.gauss(0, 1) for _ in range(rng.randint(2, 50))]
            _, _, p = welch_t_test(m, n)
            reference = scipy_stats.ttest_ind(
                m, n, equal_var=False, alternative="greater"
            ).pvalue
            assert abs(p - reference) <= 1e-9

        # bleu: against the brute-force reference oracle
        vocab = [f"w{i}" for i in range(15)]
        for _ in range(50):
            cand = " ".join(rng.choices(vocab, k=rng.randint(1, 18)))
            ref = " ".join(rng.choices(vocab, k=rng.randint(1, 18)))
            assert abs(bleu(cand, ref) - bleu_oracle(cand, ref)) <= 1e-6


def _mc_oracle_crossing(mu_member, sizes, seed, reps=100):
    """Independent Monte-Carlo estimate of the first size with mean p < 0.05,
    built on the reference statistics implementation."""
    rng = np.random.default_rng(seed)
    member = rng.normal(mu_member, 1.0, 400)
    nonmember = rng.normal(0.0, 1.0, 400)
    for size in sizes:
        total = 0.0
        for _ in range(reps):
            gm = rng.choice(member, size, replace=False)
            gn = rng.choice(nonmember, size, replace=False)
            total += scipy_stats.ttest_ind(
                gm, gn, equal_var=False, alternative="greater"
            ).pvalue
        if total / reps < 0.05:
            return size
    return None


def test_dataset_inference_shape():
    with Budget("dataset-inference shape (group-size sweep)", 120.0):
        sizes = list(range(2, 101))
        rng = np.random.default_rng(7)
        member = rng.normal(1.0, 1.0, 400)
        nonmember = rng.normal(0.0, 1.0, 400)
        results = dataset_inference_sweep(member, nonmember, sizes,
                                          repetitions=100, seed=13)
        mean_ps = [r.mean_p_value for r in results]

        rho = scipy_stats.spearmanr(sizes, mean_ps).correlation
        assert rho < -0.9, f"mean p not decreasing in group size (rho={rho:.3f})"

        crossing = next(
            (s for s, p in zip(sizes, mean_ps) if p < 0.05), None
        )
        assert crossing is not None and crossing <= 42, (
            f"+1 sigma shift: mean p first < 0.05 at {crossing}, need <= 42"
        )
        assert all(p < 0.05 for s, p in zip(sizes, mean_ps) if s >= 40)
        oracle_crossing = _mc_oracle_crossing(1.0, sizes, seed=1001)
        assert oracle_crossing is not None
        assert abs(crossing - oracle_crossing) <= 2, (
            f"crossing {crossing} vs Monte-Carlo oracle {oracle_crossing}"
        )

        # strong separation: significant with as few as six records per group
        strong_member = rng.normal(6.0, 1.0, 400)
        strong = dataset_inference_sweep(strong_member, nonmember,
                                         list(range(2, 13)),
                                         repetitions=100, seed=13)
        strong_crossing = next(
            (r.group_size for r in strong if r.mean_p_value < 0.05), None
        )
        assert strong_crossing is not None and strong_crossing <= 8, (
            f"strong separation crossed at {strong_crossing}, need <= 8"
        )
        oracle_strong = _mc_oracle_crossing(6.0, list(range(2, 13)), seed=1002)
        assert oracle_strong is not None
        assert abs(strong_crossing - oracle_strong) <= 2


def _random_utf8_corpus(n_docs, rng):
    # printable-ish BMP ranges plus a supplementary block; the homoglyph image
    # codepoints are excluded so reverse mapping has no false positives
    ranges = [(0x20, 0x7E), (0xA1, 0x2FF), (0x370, 0x3FF), (0x4E00, 0x4FFF),
              (0x1F600, 0x1F64F)]
    image = {ord(c) for c in DEFAULT_HOMOGLYPHS.values()}
    docs = []
    for i in range(n_docs):
        length = rng.randint(20, 160)
        chars = []
        for _ in range(length):
            lo, hi = rng.choice(ranges)
            cp = rng.randint(lo, hi)
            if cp in image:
                cp = 0x20
            chars.append(chr(cp))
        docs.append(Document(f"d{i}", "".join(chars)))
    return docs


def test_unicode_and_randomseq_round_trips():
    with Budget("unicode + random-sequence round trips, 10k documents", 30.0):
        rng = random.Random(555)
        docs = _random_utf8_corpus(10_000, rng)
        for doc in docs:
            assert remove_unicode(watermark_unicode(doc)).text == doc.text
        for doc in docs[:2000]:
            marked, records = watermark_random_sequence(doc, seed=77,
                                                        per_doc_insertions=2)
            restored = remove_random_sequence(marked, records)
            assert hashlib.sha256(restored.text.encode()).digest() == \
                hashlib.sha256(doc.text.encode()).digest()


def test_targeted_attack_inversion(freq_table, inverse_lexicon):
    with Budget("targeted-attack inversion of the figure-1 sentence", 1.0):
        watermarked = Document("d", FOX_WATERMARKED)
        restored = attack_targeted(watermarked, freq_table, inverse_lexicon, k=3)
        assert restored.text == FOX_ORIGINAL


def test_cli_determinism(tmp_path):
    with Budget("cmd_embed determinism (seed + threads)", 60.0):
        def run(out, threads):
            args = [
                "embed",
                "--corpus", str(FIXTURES / "corpus_figures.jsonl"),
                "--out", str(out), "--k", "3", "--seed", "42",
                "--synonyms", "tsv",
                "--lexicon", str(FIXTURES / "stub_lexicon.tsv"),
                "--freq-table", str(FIXTURES / "frequency.tsv"),
                "--threads", str(threads),
            ]
            assert main(args) == EXIT_OK
            return sha256(out), sha256(str(out) + ".log.jsonl")

        first = run(tmp_path / "a.jsonl", 1)
        second = run(tmp_path / "b.jsonl", 1)
        threaded = run(tmp_path / "c.jsonl", 8)
        assert first == second == threaded


def test_appendix_a_trend(tmp_path):
    with Budget("semantic metrics monotone non-increasing in K (3..7)", 60.0):
        out = tmp_path / "sweep.csv"
        args = [
            "sweep-k",
            "--corpus", str(FIXTURES / "corpus_sweep.jsonl"),
            "--out", str(out), "--k-list", "3,4,5,6,7",
            "--synonyms", "tsv",
            "--lexicon", str(FIXTURES / "stub_lexicon.tsv"),
            "--freq-table", str(FIXTURES / "frequency.tsv"),
        ]
        assert main(args) == EXIT_OK
        with open(out) as fh:
            rows = list(csv.DictReader(fh))
        assert [int(r["k"]) for r in rows] == [3, 4, 5, 6, 7]
        bleus = [float(r["mean_bleu"]) for r in rows]
        assert all(a >= b for a, b in zip(bleus, bleus[1:])), bleus
        assert bleus[0] > bleus[-1], "substitution count must grow with K"
        for col in ("cos_0.7", "cos_0.8", "cos_0.9", "cos_0.95"):
            vals = [float(r[col]) for r in rows]
            assert all(a >= b for a, b in zip(vals, vals[1:])), (col, vals)

"""Semantic-preservation and model-impact metrics: BLEU between original and
watermarked text, the fraction of pairs whose embedding cosine clears each
threshold, and the perplexity ratio between an original and a fine-tuned
model on the same texts.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .providers import (
    EmbeddingProvider,
    TokenLogProbRecord,
    cosine_similarity,
    embed_texts,
)

BLEU_MAX_ORDER = 4


class MetricsError(ValueError):
    pass


@dataclass
class SemanticReport:
    mean_bleu: float
    cos_fraction: dict[float, float]
    n_pairs: int


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: str, reference: str) -> float:
    """BLEU-4 with uniform weights, add-one smoothing on orders >= 2, and the
    standard brevity penalty. Tokens are whitespace-separated words."""
    cand = candidate.split()
    ref = reference.split()
    if not cand or not ref:
        raise MetricsError("BLEU inputs must be non-empty")
    log_sum = 0.0
    for n in range(1, BLEU_MAX_ORDER + 1):
        cand_counts = _ngram_counts(cand, n)
        ref_counts = _ngram_counts(ref, n)
        matches = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        guesses = sum(cand_counts.values())
        if n == 1:
            if matches == 0:
                return 0.0
            precision = matches / guesses
        else:
            precision = (matches + 1) / (guesses + 1)
        log_sum += math.log(precision)
    brevity = 1.0
    if len(cand) < len(ref):
        brevity = math.exp(1.0 - len(ref) / len(cand))
    return brevity * math.exp(log_sum / BLEU_MAX_ORDER)


def mean_bleu(pairs: Sequence[tuple[str, str]]) -> float:
    """Average of per-document BLEU(watermarked, original)."""
    if not pairs:
        raise MetricsError("no pairs")
    return sum(bleu(cand, ref) for ref, cand in pairs) / len(pairs)


def cosine_fraction(
    pairs: Sequence[tuple[str, str]],
    provider: EmbeddingProvider,
    thresholds: Sequence[float],
) -> dict[float, float]:
    """Per threshold t, the fraction of (original, modified) pairs whose
    embedding cosine similarity is >= t."""
    if not pairs:
        raise MetricsError("no pairs")
    for t in thresholds:
        if not (0.0 <= t <= 1.0):
            raise MetricsError(f"threshold {t} outside [0, 1]")
    originals = [a for a, _ in pairs]
    modified = [b for _, b in pairs]
    vecs_a = embed_texts(provider, originals)
    vecs_b = embed_texts(provider, modified)
    sims = [cosine_similarity(a, b) for a, b in zip(vecs_a, vecs_b)]
    return {
        t: sum(1 for s in sims if s >= t) / len(sims) for t in thresholds
    }


def semantic_report(
    pairs: Sequence[tuple[str, str]],
    provider: EmbeddingProvider,
    thresholds: Sequence[float] = (0.7, 0.8, 0.9, 0.95),
) -> SemanticReport:
    return SemanticReport(
        mean_bleu=mean_bleu(pairs),
        cos_fraction=cosine_fraction(pairs, provider, thresholds),
        n_pairs=len(pairs),
    )


def _corpus_perplexity(
    records_by_doc: Mapping[str, Sequence[TokenLogProbRecord]]
) -> float:
    total = 0.0
    count = 0
    for records in records_by_doc.values():
        for r in records:
            if r.scored:
                total += r.logprob
                count += 1
    if count == 0:
        raise MetricsError("no scored tokens")
    return math.exp(-total / count)


def perplexity_ratio(
    orig_records: Mapping[str, Sequence[TokenLogProbRecord]],
    finetuned_records: Mapping[str, Sequence[TokenLogProbRecord]],
) -> float:
    """(corpus PPL of the original model / corpus PPL of the fine-tuned
    model) * 100. Values near 100 mean fine-tuning preserved behavior on the
    probe texts. Both record sets must cover the same documents."""
    if set(orig_records) != set(finetuned_records):
        raise MetricsError("record sets cover different documents")
    return 100.0 * _corpus_perplexity(orig_records) / _corpus_perplexity(
        finetuned_records
    )


def write_semantic_csv(
    rows: Sequence[tuple[str, SemanticReport]], path
) -> None:
    """Rows of (config label, report); thresholds become cos_<t> columns."""
    if not rows:
        raise MetricsError("no rows")
    thresholds = sorted(rows[0][1].cos_fraction)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["config", "mean_bleu", *[f"cos_{t:g}" for t in thresholds], "n_pairs"]
        )
        for label, rep in rows:
            writer.writerow(
                [label, repr(rep.mean_bleu),
                 *[repr(rep.cos_fraction[t]) for t in thresholds],
                 rep.n_pairs]
            )

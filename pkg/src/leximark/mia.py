"""Membership-inference score kernels over token log-prob records: loss/PPL,
zlib-ratio, Min-K%, and Min-K%++. Every score is oriented so that higher
means "more likely a training member", so downstream detection never
branches on the method.
"""

from __future__ import annotations

import csv
import logging
import math
import zlib
from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import Document, Label
from .providers import DocumentLogProbSource, TokenLogProbRecord, TokenLogProbResult

logger = logging.getLogger(__name__)

#: zlib level is pinned so compressed lengths are reproducible.
ZLIB_LEVEL = 6


class ScoringError(ValueError):
    pass


@dataclass
class ScoredDocument:
    doc_id: str
    label: Label
    scores: dict[str, float]
    token_count: int
    truncated: bool = False


def _scored_logprobs(records: Sequence[TokenLogProbRecord]) -> list[float]:
    lps = [r.logprob for r in records if r.scored]
    if not lps:
        raise ScoringError("no scored tokens (need at least one)")
    return lps


def perplexity(records: Sequence[TokenLogProbRecord]) -> float:
    """exp of the negative mean log-likelihood over scored tokens; >= 1."""
    lps = _scored_logprobs(records)
    return math.exp(-math.fsum(lps) / len(lps))


def score_ppl(records: Sequence[TokenLogProbRecord]) -> float:
    """Mean token log-prob (the negated loss); higher = member."""
    lps = _scored_logprobs(records)
    return math.fsum(lps) / len(lps)


def zlib_compressed_length(text: str) -> int:
    return len(zlib.compress(text.encode("utf-8"), ZLIB_LEVEL))


def score_zlib(records: Sequence[TokenLogProbRecord], raw_text: str) -> float:
    """-ln(perplexity) / compressed byte length; higher = member, always <= 0."""
    if not raw_text:
        raise ScoringError("raw_text must be non-empty")
    c = zlib_compressed_length(raw_text)
    return -math.log(perplexity(records)) / c


def _min_k_count(n: int, k_pct: float) -> int:
    if not (0.0 < k_pct <= 100.0):
        raise ScoringError(f"k_pct must be in (0, 100], got {k_pct}")
    return max(1, math.floor(k_pct / 100.0 * n))


def score_min_k(records: Sequence[TokenLogProbRecord], k_pct: float) -> float:
    """Mean of the m smallest token log-probs, m = max(1, floor(k% of n))."""
    lps = _scored_logprobs(records)
    m = _min_k_count(len(lps), k_pct)
    lps.sort()
    return math.fsum(lps[:m]) / m


def score_min_k_pp(records: Sequence[TokenLogProbRecord], k_pct: float) -> float:
    """Min-K% over moment-normalized log-probs z = (lp - mu) / sigma.

    Tokens with sigma = 0 are skipped (logged); if all are skipped the
    document cannot be scored.
    """
    zs = []
    skipped = 0
    for r in records:
        if not r.scored:
            continue
        if r.dist_std <= 0.0:
            skipped += 1
            continue
        zs.append((r.logprob - r.dist_mean) / r.dist_std)
    if skipped:
        logger.debug("min_k_pp: skipped %d tokens with sigma=0", skipped)
    if not zs:
        raise ScoringError("min_k_pp: every token was skipped (sigma=0)")
    m = _min_k_count(len(zs), k_pct)
    zs.sort()
    return math.fsum(zs[:m]) / m


def method_column(method: str, k_pct: float | None = None) -> str:
    """Canonical score column name, e.g. ``min_k_20.0``."""
    if method in ("ppl", "zlib"):
        return method
    if method in ("min_k", "min_kpp"):
        if k_pct is None:
            raise ScoringError(f"method {method} requires k_pct")
        return f"{method}_{float(k_pct)}"
    raise ScoringError(f"unknown MIA method {method!r}")


def score_document(
    doc: Document,
    result: TokenLogProbResult,
    methods: Sequence[str],
    k_pcts: Sequence[float] = (20.0,),
) -> ScoredDocument:
    records = result.tokens
    scores: dict[str, float] = {}
    for method in methods:
        if method == "ppl":
            scores["ppl"] = score_ppl(records)
        elif method == "zlib":
            scores["zlib"] = score_zlib(records, doc.text)
        elif method == "min_k":
            for k in k_pcts:
                scores[method_column("min_k", k)] = score_min_k(records, k)
        elif method == "min_kpp":
            for k in k_pcts:
                scores[method_column("min_kpp", k)] = score_min_k_pp(records, k)
        else:
            raise ScoringError(f"unknown MIA method {method!r}")
    return ScoredDocument(
        doc_id=doc.id,
        label=doc.label,
        scores=scores,
        token_count=len([r for r in records if r.scored]),
        truncated=result.truncated,
    )


def score_corpus(
    docs: Sequence[Document],
    source: DocumentLogProbSource,
    methods: Sequence[str],
    k_pcts: Sequence[float] = (20.0,),
    on_scored: Callable[[ScoredDocument], None] | None = None,
) -> list[ScoredDocument]:
    """Score every document; output order = input order.

    ``on_scored`` fires per document so callers can persist partial results
    before a provider hard error aborts the run.
    """
    results = source.records_for_documents(docs)
    scored: list[ScoredDocument] = []
    for doc, result in zip(docs, results):
        sd = score_document(doc, result, methods, k_pcts)
        if on_scored:
            on_scored(sd)
        scored.append(sd)
    return scored


def score_columns(methods: Sequence[str], k_pcts: Sequence[float]) -> list[str]:
    cols = []
    for method in methods:
        if method in ("ppl", "zlib"):
            cols.append(method)
        else:
            cols.extend(method_column(method, k) for k in k_pcts)
    return cols


def write_scores_csv(
    scored: Sequence[ScoredDocument], path, columns: Sequence[str] | None = None
) -> None:
    if columns is None:
        columns = sorted({c for sd in scored for c in sd.scores})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["doc_id", "label", "token_count", *columns])
        for sd in scored:
            writer.writerow(
                [sd.doc_id, sd.label.value, sd.token_count]
                + [repr(sd.scores[c]) for c in columns]
            )


def read_scores_csv(path) -> tuple[list[str], list[ScoredDocument]]:
    """Returns (method columns, scored documents)."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["doc_id", "label", "token_count"]:
            raise ScoringError(f"{path}: not a score CSV")
        columns = header[3:]
        scored = []
        for row in reader:
            if not row:
                continue
            scores = {c: float(v) for c, v in zip(columns, row[3:])}
            scored.append(
                ScoredDocument(
                    doc_id=row[0],
                    label=Label(row[1]),
                    scores=scores,
                    token_count=int(row[2]),
                )
            )
    return columns, scored

"""The watermark embedding pipeline: per sentence, select the top-K
highest-entropy words and replace each with a strictly-higher-entropy synonym
that survives the optional sentence-similarity filter. Decisions are cached
corpus-wide so a word is evaluated once and substituted consistently.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field, asdict
from typing import Sequence

from .corpus import Document, WordToken, document_tokens, tokenize_words
from .entropy import ExclusionPolicy, FrequencyTable, select_top_k, word_entropy
from .providers import (
    EmbeddingProvider,
    SynonymProvider,
    cosine_similarity,
    embed_texts,
    synonym_candidates,
)

WATERMARK_META_KEY = "leximark"

#: Marker stored in the cache when a word was evaluated and kept.
KEEP = None


class EmbedConfigError(ValueError):
    pass


SYNONYM_SOURCES = ("tsv_stub", "wndb", "remote_concat", "remote_dropout")


@dataclass
class EmbedConfig:
    k: int = 5
    synonym_source: str = "tsv_stub"
    similarity_threshold: float | None = None
    top_n_candidates: int = 10
    watermark_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise EmbedConfigError(f"k must be >= 1, got {self.k}")
        if self.synonym_source not in SYNONYM_SOURCES:
            raise EmbedConfigError(
                f"unknown synonym source {self.synonym_source!r}"
            )
        if self.similarity_threshold is not None and not (
            0.0 <= self.similarity_threshold <= 1.0
        ):
            raise EmbedConfigError(
                f"similarity threshold {self.similarity_threshold} outside [0, 1]"
            )
        if self.top_n_candidates < 1:
            raise EmbedConfigError("top_n_candidates must be >= 1")
        if not (0.0 < self.watermark_fraction <= 1.0):
            raise EmbedConfigError(
                f"watermark fraction {self.watermark_fraction} outside (0, 1]"
            )


@dataclass
class ProviderBundle:
    synonyms: SynonymProvider
    embeddings: EmbeddingProvider | None = None


@dataclass(frozen=True)
class SubstitutionRecord:
    doc_id: str
    sentence_index: int
    original: str
    replacement: str
    original_entropy: float
    replacement_entropy: float
    source: str  # "fresh" | "cache"


@dataclass
class WatermarkLog:
    records: list[SubstitutionRecord] = field(default_factory=list)
    watermarked_ids: list[str] = field(default_factory=list)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in self.records:
                fh.write(json.dumps(asdict(rec), ensure_ascii=False))
                fh.write("\n")

    @classmethod
    def load(cls, path) -> "WatermarkLog":
        records = []
        ids = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(SubstitutionRecord(**json.loads(line)))
        for rec in records:
            if rec.doc_id not in ids:
                ids.append(rec.doc_id)
        return cls(records, ids)


# The cache maps normalized word -> replacement string, or KEEP. Once a word
# has a decision, every later selection of it reuses the decision.
SubstitutionCache = dict


def _match_case(replacement: str, original_surface: str) -> str:
    if original_surface[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def choose_replacement(
    word: str,
    sentence: str,
    position: int,
    table: FrequencyTable,
    providers: ProviderBundle,
    config: EmbedConfig,
    cache: SubstitutionCache,
) -> str | None:
    """Decide the corpus-wide replacement for a freshly selected keyword.

    Candidates are tried in provider rank order; the first one that is a
    single all-letter word, has strictly higher entropy than ``word``, and
    (when a threshold is set) keeps the sentence-pair cosine similarity at or
    above it, wins. Returns ``KEEP`` when no candidate qualifies.
    """
    if table is None:
        raise EmbedConfigError("a frequency table is required for embedding")
    original_bits = word_entropy(table, word)
    candidates = synonym_candidates(
        providers.synonyms, word, sentence, position, config.top_n_candidates
    )
    for cand in candidates:
        replacement = cand.word.lower()
        if not replacement.isalpha():
            continue
        if word_entropy(table, replacement) <= original_bits:
            continue
        if config.similarity_threshold is not None:
            if providers.embeddings is None:
                raise EmbedConfigError(
                    "similarity threshold set but no embedding provider given"
                )
            substituted = _substitute_in_sentence(sentence, word, replacement)
            vec_orig, vec_sub = embed_texts(
                providers.embeddings, [sentence, substituted]
            )
            if cosine_similarity(vec_orig, vec_sub) < config.similarity_threshold:
                continue
        return replacement
    return KEEP


def _substitute_in_sentence(sentence: str, word: str, replacement: str) -> str:
    """Rewrite every occurrence of ``word`` (case-insensitive, token-level)
    within a sentence string."""
    edits = []
    for tok in tokenize_words(sentence):
        if tok.normalized == word:
            edits.append((tok.start, tok.end, _match_case(replacement, tok.surface)))
    return _apply_edits(sentence, edits)


def _apply_edits(text: str, edits: list[tuple[int, int, str]]) -> str:
    out = text
    for start, end, new in sorted(edits, reverse=True):
        out = out[:start] + new + out[end:]
    return out


def embed_document(
    doc: Document,
    table: FrequencyTable,
    providers: ProviderBundle,
    config: EmbedConfig,
    cache: SubstitutionCache,
    exclusions: ExclusionPolicy | None = None,
) -> tuple[Document, list[SubstitutionRecord]]:
    """Watermark one document.

    Per sentence at most K distinct words are substituted; every in-sentence
    occurrence of a substituted word is rewritten, re-capitalized when the
    original token started uppercase. Untouched text is preserved exactly.
    """
    if exclusions is None:
        exclusions = ExclusionPolicy.default()
    records: list[SubstitutionRecord] = []
    edits: list[tuple[int, int, str]] = []

    for span, tokens in document_tokens(doc.text):
        if not tokens:
            continue
        selection = select_top_k(tokens, table, config.k, exclusions)
        sentence_text = doc.text[span.start : span.end]
        for tok, bits in selection.chosen:
            word = tok.normalized
            if word in cache:
                replacement = cache[word]
                source = "cache"
            else:
                replacement = choose_replacement(
                    word,
                    sentence_text,
                    _token_index(tokens, tok),
                    table,
                    providers,
                    config,
                    cache,
                )
                cache[word] = replacement
                source = "fresh"
            if replacement is KEEP:
                continue
            replacement_bits = word_entropy(table, replacement)
            for occurrence in tokens:
                if occurrence.normalized != word:
                    continue
                cased = _match_case(replacement, occurrence.surface)
                edits.append((occurrence.start, occurrence.end, cased))
                records.append(
                    SubstitutionRecord(
                        doc_id=doc.id,
                        sentence_index=span.index,
                        original=occurrence.surface,
                        replacement=cased,
                        original_entropy=bits,
                        replacement_entropy=replacement_bits,
                        source=source,
                    )
                )

    new_text = _apply_edits(doc.text, edits)
    new_doc = Document(id=doc.id, text=new_text, label=doc.label, meta=dict(doc.meta))
    return new_doc, records


def _token_index(tokens: Sequence[WordToken], target: WordToken) -> int:
    for i, tok in enumerate(tokens):
        if tok is target:
            return i
    return 0


def embed_corpus(
    docs: Sequence[Document],
    table: FrequencyTable,
    providers: ProviderBundle,
    config: EmbedConfig,
    exclusions: ExclusionPolicy | None = None,
) -> tuple[list[Document], WatermarkLog]:
    """Watermark ceil(fraction * N) documents, chosen by seeded sampling.

    The substitution cache is shared corpus-wide and built in document order,
    which makes the sequential pass the reference output for any parallel
    re-implementation. Watermarked documents get meta ``leximark=1``, skipped
    ones are copied verbatim with ``leximark=0``.
    """
    n = len(docs)
    n_marked = math.ceil(config.watermark_fraction * n)
    rng = random.Random(config.seed)
    marked_indices = set(rng.sample(range(n), n_marked)) if n else set()

    cache: SubstitutionCache = {}
    log = WatermarkLog()
    out_docs: list[Document] = []
    for i, doc in enumerate(docs):
        if i in marked_indices:
            new_doc, records = embed_document(
                doc, table, providers, config, cache, exclusions
            )
            new_doc.meta[WATERMARK_META_KEY] = "1"
            log.records.extend(records)
            log.watermarked_ids.append(doc.id)
            out_docs.append(new_doc)
        else:
            copy = Document(
                id=doc.id, text=doc.text, label=doc.label, meta=dict(doc.meta)
            )
            copy.meta[WATERMARK_META_KEY] = "0"
            out_docs.append(copy)
    return out_docs, log

"""Word self-information from corpus frequencies, and per-sentence selection
of the top-K highest-entropy words.

A word's entropy is -log2 of its corpus probability; rarer words carry more
bits. Out-of-vocabulary words get a finite cap (default -log2 1e-9) so that
comparisons stay total: one OOV word can never strictly beat another.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Sequence

from .corpus import WordToken

logger = logging.getLogger(__name__)

#: Entropy assigned to words absent from the frequency table, in bits.
DEFAULT_OOV_ENTROPY_CAP = -math.log2(1e-9)  # 29.897352853986263


class FrequencyTableError(ValueError):
    """Malformed frequency file."""


@dataclass
class FrequencyTable:
    """Case-insensitive word -> probability map; probabilities in (0, 1]."""

    entries: dict[str, float]
    oov_entropy_cap: float = DEFAULT_OOV_ENTROPY_CAP
    duplicates: int = 0

    def probability(self, word: str) -> float | None:
        return self.entries.get(word.lower())

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def load_frequency_table(
    path, oov_entropy_cap: float = DEFAULT_OOV_ENTROPY_CAP
) -> FrequencyTable:
    """Parse a ``word<TAB>probability`` TSV.

    Duplicate words are resolved last-wins; the number of overwrites is kept
    on the table and logged. A probability outside (0, 1] is an error.
    """
    entries: dict[str, float] = {}
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) != 2:
                raise FrequencyTableError(
                    f"line {lineno}: expected 'word<TAB>probability'"
                )
            word, raw_p = parts
            try:
                p = float(raw_p)
            except ValueError:
                raise FrequencyTableError(
                    f"line {lineno}: probability {raw_p!r} is not a number"
                ) from None
            if not (0.0 < p <= 1.0):
                raise FrequencyTableError(
                    f"line {lineno}: probability {p} outside (0, 1]"
                )
            key = word.lower()
            if key in entries:
                duplicates += 1
            entries[key] = p
    if duplicates:
        logger.warning(
            "frequency table %s: %d duplicate words (last occurrence wins)",
            path,
            duplicates,
        )
    return FrequencyTable(entries, oov_entropy_cap, duplicates)


def word_entropy(table: FrequencyTable, word: str) -> float:
    """Self-information of ``word`` in bits; the OOV cap if unknown."""
    p = table.probability(word)
    if p is None:
        return table.oov_entropy_cap
    return -math.log2(p)


def load_stoplist(path) -> frozenset[str]:
    """One word per line, '#' comments, case-folded."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.split("#", 1)[0].strip()
            if word:
                words.add(word.lower())
    return frozenset(words)


def default_stoplist() -> frozenset[str]:
    """The bundled function-word stoplist."""
    text = resources.files("leximark.data").joinpath("stopwords.txt").read_text("utf-8")
    words = set()
    for line in text.splitlines():
        word = line.split("#", 1)[0].strip()
        if word:
            words.add(word.lower())
    return frozenset(words)


def heuristic_named_entities(tokens: Sequence[WordToken]) -> set[int]:
    """Default NER stand-in: capitalized tokens not at sentence start."""
    flagged = set()
    for i, tok in enumerate(tokens):
        if i > 0 and tok.surface[:1].isupper():
            flagged.add(i)
    return flagged


@dataclass(frozen=True)
class ExclusionPolicy:
    """Which words may never be selected: a stoplist plus a pluggable
    named-entity detector mapping a sentence's tokens to excluded indices."""

    stopwords: frozenset[str] = field(default_factory=frozenset)
    named_entity_detector: Callable[[Sequence[WordToken]], set[int]] | None = None

    @classmethod
    def default(cls) -> "ExclusionPolicy":
        return cls(default_stoplist(), heuristic_named_entities)

    @classmethod
    def none(cls) -> "ExclusionPolicy":
        return cls(frozenset(), None)


@dataclass(frozen=True)
class KeywordSelection:
    """Top-K selection for one sentence: (first occurrence token, bits),
    sorted by entropy descending, ties broken by sentence position."""

    sentence_index: int
    chosen: tuple[tuple[WordToken, float], ...]

    def words(self) -> list[str]:
        return [tok.normalized for tok, _ in self.chosen]


def select_top_k(
    tokens: Sequence[WordToken],
    table: FrequencyTable,
    k: int,
    exclusions: ExclusionPolicy,
) -> KeywordSelection:
    """Choose up to ``k`` distinct highest-entropy words from one sentence.

    Selection is over distinct normalized words (a word's first occurrence
    carries its tie-break position); excluded words never appear. Fewer than
    ``k`` eligible words means all of them are chosen.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    sentence_index = tokens[0].sentence_index if tokens else 0
    flagged = (
        exclusions.named_entity_detector(tokens)
        if exclusions.named_entity_detector
        else set()
    )
    excluded_words = {tokens[i].normalized for i in flagged}

    first_seen: dict[str, tuple[int, WordToken]] = {}
    for pos, tok in enumerate(tokens):
        word = tok.normalized
        if word in exclusions.stopwords or word in excluded_words:
            continue
        if word not in first_seen:
            first_seen[word] = (pos, tok)

    ranked = sorted(
        first_seen.items(),
        key=lambda item: (-word_entropy(table, item[0]), item[1][0]),
    )
    chosen = tuple(
        (tok, word_entropy(table, word)) for word, (_, tok) in ranked[:k]
    )
    return KeywordSelection(sentence_index=sentence_index, chosen=chosen)

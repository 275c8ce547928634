"""Baseline watermarks (random token insertion, Unicode homoglyphs), the
two synonym-substitution removal attacks, and a combinator for stacking
watermarkers. All transforms are pure per-document and deterministic given
their seed.
"""

from __future__ import annotations

import json
import random
import string
from dataclasses import dataclass, asdict
from typing import Callable, Sequence

from .corpus import Document, document_tokens, tokenize_words
from .entropy import ExclusionPolicy, FrequencyTable, select_top_k, word_entropy
from .wordnet import Lexicon

Watermarker = Callable[[Document], tuple[Document, list]]

# Seven unambiguous Cyrillic confusables; a small injective table keeps
# removal exactly invertible.
DEFAULT_HOMOGLYPHS = {
    "a": "а",
    "c": "с",
    "e": "е",
    "o": "о",
    "p": "р",
    "x": "х",
    "y": "у",
}


class HomoglyphMapError(ValueError):
    pass


@dataclass(frozen=True)
class HomoglyphMap:
    forward: dict

    def __post_init__(self) -> None:
        values = list(self.forward.values())
        if len(set(values)) != len(values):
            raise HomoglyphMapError("homoglyph mapping must be injective")
        for k, v in self.forward.items():
            if len(k) != 1 or len(v) != 1:
                raise HomoglyphMapError("homoglyph entries must be single characters")

    @property
    def reverse(self) -> dict:
        return {v: k for k, v in self.forward.items()}

    @classmethod
    def default(cls) -> "HomoglyphMap":
        return cls(dict(DEFAULT_HOMOGLYPHS))


def load_homoglyph_map(path) -> HomoglyphMap:
    """Parse an ``ascii<TAB>codepoint-hex`` override table."""
    forward = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) != 2:
                raise HomoglyphMapError(
                    f"line {lineno}: expected 'ascii<TAB>codepoint-hex'"
                )
            try:
                forward[parts[0]] = chr(int(parts[1], 16))
            except ValueError:
                raise HomoglyphMapError(
                    f"line {lineno}: bad codepoint {parts[1]!r}"
                ) from None
    return HomoglyphMap(forward)


@dataclass(frozen=True)
class InsertionRecord:
    """One inserted token: ``position`` is the offset of ``inserted`` within
    the watermarked text (insertions recorded in application order)."""

    doc_id: str
    position: int
    inserted: str


@dataclass(frozen=True)
class AttackConfig:
    mode: str  # "random_synonym" | "targeted_low_entropy"
    k: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("attack K must be >= 1")
        if self.mode not in ("random_synonym", "targeted_low_entropy"):
            raise ValueError(f"unknown attack mode {self.mode!r}")


_ALPHANUMERIC = string.ascii_letters + string.digits


def watermark_random_sequence(
    doc: Document,
    seed: int,
    seq_len: int = 10,
    per_doc_insertions: int = 1,
) -> tuple[Document, list[InsertionRecord]]:
    """Insert seeded random alphanumeric sequences at word boundaries.

    The log records the exact inserted substring (sequence plus its spacing)
    and its position in the output, so removal is a constructive inverse.
    """
    rng = random.Random(f"{seed}:{doc.id}")
    text = doc.text
    records: list[InsertionRecord] = []
    for _ in range(per_doc_insertions):
        seq = "".join(rng.choice(_ALPHANUMERIC) for _ in range(seq_len))
        boundaries = sorted({t.start for t in tokenize_words(text)} | {len(text)})
        pos = rng.choice(boundaries)
        if pos == len(text):
            inserted = (" " if text and not text[-1].isspace() else "") + seq
        else:
            inserted = seq + " "
        text = text[:pos] + inserted + text[pos:]
        records.append(InsertionRecord(doc_id=doc.id, position=pos, inserted=inserted))
    return (
        Document(id=doc.id, text=text, label=doc.label, meta=dict(doc.meta)),
        records,
    )


def remove_random_sequence(
    doc: Document, records: Sequence[InsertionRecord]
) -> Document:
    """Undo :func:`watermark_random_sequence` using its log."""
    text = doc.text
    for rec in reversed(list(records)):
        segment = text[rec.position : rec.position + len(rec.inserted)]
        if segment != rec.inserted:
            raise ValueError(
                f"doc {doc.id}: logged insertion not found at position {rec.position}"
            )
        text = text[: rec.position] + text[rec.position + len(rec.inserted) :]
    return Document(id=doc.id, text=text, label=doc.label, meta=dict(doc.meta))


def watermark_unicode(doc: Document, hmap: HomoglyphMap | None = None) -> Document:
    """Replace every mapped ASCII character with its homoglyph."""
    hmap = hmap or HomoglyphMap.default()
    table = str.maketrans(hmap.forward)
    return Document(
        id=doc.id, text=doc.text.translate(table), label=doc.label, meta=dict(doc.meta)
    )


def remove_unicode(doc: Document, hmap: HomoglyphMap | None = None) -> Document:
    """Exact inverse of :func:`watermark_unicode`, provided the original text
    contained none of the mapped homoglyph codepoints."""
    hmap = hmap or HomoglyphMap.default()
    table = str.maketrans(hmap.reverse)
    return Document(
        id=doc.id, text=doc.text.translate(table), label=doc.label, meta=dict(doc.meta)
    )


def _rewrite_words(text: str, replacements: list[tuple]) -> str:
    out = text
    for start, end, new in sorted(replacements, reverse=True):
        out = out[:start] + new + out[end:]
    return out


def _match_case(replacement: str, original_surface: str) -> str:
    if original_surface[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def attack_random_synonyms(
    doc: Document, lexicon: Lexicon, k: int, seed: int
) -> Document:
    """Unaware-adversary attack: per sentence, replace K random words that
    have lexicon candidates with a random candidate each."""
    rng = random.Random(f"{seed}:{doc.id}")
    edits = []
    for span, tokens in document_tokens(doc.text):
        eligible: dict[str, list] = {}
        for tok in tokens:
            if lexicon.candidates(tok.normalized):
                eligible.setdefault(tok.normalized, []).append(tok)
        words = sorted(eligible)
        rng.shuffle(words)
        for word in words[:k]:
            candidates = lexicon.candidates(word)
            replacement = rng.choice(candidates)
            for tok in eligible[word]:
                edits.append((tok.start, tok.end, _match_case(replacement, tok.surface)))
    return Document(
        id=doc.id,
        text=_rewrite_words(doc.text, edits),
        label=doc.label,
        meta=dict(doc.meta),
    )


def attack_targeted(
    doc: Document, table: FrequencyTable, lexicon: Lexicon, k: int
) -> Document:
    """Aware-adversary attack: per sentence, replace each of the K
    highest-entropy words (no exclusions) with its lowest-entropy candidate,
    when that candidate's entropy is strictly lower."""
    edits = []
    for span, tokens in document_tokens(doc.text):
        if not tokens:
            continue
        selection = select_top_k(tokens, table, k, ExclusionPolicy.none())
        for tok, bits in selection.chosen:
            word = tok.normalized
            candidates = [c for c in lexicon.candidates(word) if c.isalpha()]
            if not candidates:
                continue
            best = min(candidates, key=lambda c: (word_entropy(table, c)))
            if word_entropy(table, best) >= bits:
                continue
            for occurrence in tokens:
                if occurrence.normalized == word:
                    edits.append(
                        (occurrence.start, occurrence.end,
                         _match_case(best, occurrence.surface))
                    )
    return Document(
        id=doc.id,
        text=_rewrite_words(doc.text, edits),
        label=doc.label,
        meta=dict(doc.meta),
    )


def apply_attack(
    doc: Document,
    config: AttackConfig,
    lexicon: Lexicon,
    table: FrequencyTable | None = None,
) -> Document:
    """Dispatch on the attack mode; the targeted variant needs a table."""
    if config.mode == "random_synonym":
        return attack_random_synonyms(doc, lexicon, config.k, config.seed)
    if table is None:
        raise ValueError("targeted_low_entropy attack requires a frequency table")
    return attack_targeted(doc, table, lexicon, config.k)


def combine(doc: Document, pipeline: Sequence[Watermarker]) -> tuple[Document, list]:
    """Apply watermarkers in order; their logs are concatenated."""
    if not pipeline:
        raise ValueError("watermarker pipeline must be non-empty")
    log: list = []
    current = doc
    for watermarker in pipeline:
        current, records = watermarker(current)
        log.extend(records)
    return current, log


def save_insertion_log(records: Sequence[InsertionRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(asdict(rec), ensure_ascii=False))
            fh.write("\n")


def load_insertion_log(path) -> list[InsertionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(InsertionRecord(**json.loads(line)))
    return records

"""Document model, sentence segmentation, word tokenization, JSONL corpus I/O.

Segmentation and tokenization are rule-based and deterministic so that
fixtures stay stable: a sentence ends at a run of ``. ! ?`` followed by
whitespace and an uppercase letter (or end of text); words are maximal runs
of letters/digits, apostrophes allowed word-internally, hyphens split.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable


class CorpusError(ValueError):
    """Malformed corpus file or violated document invariant."""


class Label(str, Enum):
    MEMBER = "member"
    NONMEMBER = "nonmember"
    UNKNOWN = "unknown"


@dataclass
class Document:
    """One corpus record. ``meta`` values are strings; unknown JSONL fields
    are folded into it on load."""

    id: str
    text: str
    label: Label = Label.UNKNOWN
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise CorpusError("document id must be non-empty")


@dataclass(frozen=True)
class SentenceSpan:
    """Half-open character span [start, end) of one sentence, whitespace-trimmed."""

    start: int
    end: int
    index: int


@dataclass(frozen=True)
class WordToken:
    surface: str
    start: int
    end: int
    sentence_index: int
    normalized: str


_TERMINATORS = ".!?"

# Letters/digits (not underscore); apostrophes only between such runs.
_WORD_RE = re.compile(r"[^\W_]+(?:['’][^\W_]+)*", re.UNICODE)


def split_sentences(text: str) -> list[SentenceSpan]:
    """Split ``text`` into sentence spans.

    A run of terminator characters closes a sentence when it is followed by
    whitespace and then an uppercase letter, or by nothing but whitespace.
    Text without any qualifying terminator is a single sentence. Spans are
    trimmed: concatenating spans with the whitespace between them restores
    the input exactly.
    """
    boundaries: list[int] = []  # exclusive end positions of sentences
    i = 0
    n = len(text)
    while i < n:
        if text[i] in _TERMINATORS:
            j = i
            while j < n and text[j] in _TERMINATORS:
                j += 1
            rest = text[j:]
            stripped = rest.lstrip()
            if not stripped:
                boundaries.append(j)
            elif rest[0].isspace() and stripped[0].isupper():
                boundaries.append(j)
            i = j
        else:
            i += 1

    spans: list[SentenceSpan] = []
    seg_start = 0
    for b in boundaries + [n]:
        seg = text[seg_start:b]
        if seg.strip():
            lead = len(seg) - len(seg.lstrip())
            trail = len(seg) - len(seg.rstrip())
            spans.append(
                SentenceSpan(seg_start + lead, b - trail, len(spans))
            )
        seg_start = b
    return spans


def tokenize_words(
    sentence: str, *, base_offset: int = 0, sentence_index: int = 0
) -> list[WordToken]:
    """Tokenize one sentence into words.

    Offsets are relative to the enclosing document when ``base_offset`` is
    the sentence's document offset. Hyphens and other punctuation separate
    tokens; apostrophes inside a word do not.
    """
    tokens = []
    for m in _WORD_RE.finditer(sentence):
        surface = m.group(0)
        tokens.append(
            WordToken(
                surface=surface,
                start=base_offset + m.start(),
                end=base_offset + m.end(),
                sentence_index=sentence_index,
                normalized=surface.lower(),
            )
        )
    return tokens


def document_tokens(text: str) -> list[tuple[SentenceSpan, list[WordToken]]]:
    """Sentence spans of ``text`` paired with their document-offset tokens."""
    out = []
    for span in split_sentences(text):
        toks = tokenize_words(
            text[span.start : span.end],
            base_offset=span.start,
            sentence_index=span.index,
        )
        out.append((span, toks))
    return out


_KNOWN_FIELDS = ("id", "text", "label", "meta")


def _doc_from_obj(obj: dict, lineno: int) -> Document:
    if not isinstance(obj, dict):
        raise CorpusError(f"line {lineno}: expected a JSON object")
    if "id" not in obj or "text" not in obj:
        raise CorpusError(f"line {lineno}: missing required field 'id' or 'text'")
    if not isinstance(obj["id"], str) or not isinstance(obj["text"], str):
        raise CorpusError(f"line {lineno}: 'id' and 'text' must be strings")
    label = Label.UNKNOWN
    if "label" in obj:
        try:
            label = Label(obj["label"])
        except ValueError:
            raise CorpusError(
                f"line {lineno}: unknown label {obj['label']!r}"
            ) from None
    meta: dict[str, str] = {}
    raw_meta = obj.get("meta", {})
    if not isinstance(raw_meta, dict):
        raise CorpusError(f"line {lineno}: 'meta' must be an object")
    for k, v in raw_meta.items():
        meta[str(k)] = v if isinstance(v, str) else json.dumps(v)
    # Unknown top-level fields are preserved by relocating them into meta.
    for k, v in obj.items():
        if k not in _KNOWN_FIELDS:
            meta[k] = v if isinstance(v, str) else json.dumps(v)
    return Document(id=obj["id"], text=obj["text"], label=label, meta=meta)


def load_corpus(path) -> list[Document]:
    """Load a JSONL corpus. Raises :class:`CorpusError` with a 1-based line
    number for malformed lines and duplicate ids (citing the later line)."""
    docs: list[Document] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            doc = _doc_from_obj(obj, lineno)
            if doc.id in seen:
                raise CorpusError(
                    f"line {lineno}: duplicate document id {doc.id!r} "
                    f"(first seen on line {seen[doc.id]})"
                )
            seen[doc.id] = lineno
            docs.append(doc)
    return docs


def save_corpus(docs: Iterable[Document], path) -> None:
    """Write documents as JSONL, UTF-8, LF endings, order preserved.

    ``label`` is omitted when unknown and ``meta`` when empty, so a load of a
    file written by this function round-trips byte-exactly modulo key order.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            obj: dict = {"id": doc.id, "text": doc.text}
            if doc.label is not Label.UNKNOWN:
                obj["label"] = doc.label.value
            if doc.meta:
                obj["meta"] = doc.meta
            fh.write(json.dumps(obj, ensure_ascii=False))
            fh.write("\n")

"""Offline synonym sources: a parser for WNDB-format lexical databases
(data.noun / data.verb / data.adj / data.adv) and a plain TSV lexicon used
as the deterministic stub provider in tests and demos.
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)


class WndbFormatError(ValueError):
    """Malformed WNDB data file."""


class LexiconFormatError(ValueError):
    """Malformed TSV lexicon."""


class PartOfSpeech(str, Enum):
    NOUN = "noun"
    VERB = "verb"
    ADJ = "adj"
    ADV = "adv"


# ss_type codes from the data files; 's' (adjective satellite) folds into adj.
_SS_TYPE = {
    "n": PartOfSpeech.NOUN,
    "v": PartOfSpeech.VERB,
    "a": PartOfSpeech.ADJ,
    "s": PartOfSpeech.ADJ,
    "r": PartOfSpeech.ADV,
}

_DATA_FILES = {
    "data.noun": PartOfSpeech.NOUN,
    "data.verb": PartOfSpeech.VERB,
    "data.adj": PartOfSpeech.ADJ,
    "data.adv": PartOfSpeech.ADV,
}

# Adjective lemmas may carry a syntactic-position marker suffix.
_ADJ_MARKER_RE = re.compile(r"\((?:a|p|ip)\)$")


@dataclass(frozen=True)
class SynsetEntry:
    offset: int
    pos: PartOfSpeech
    lemmas: tuple[str, ...]


def _parse_data_line(line: str, filename: str, lineno: int) -> SynsetEntry:
    body = line.split(" | ", 1)[0].rstrip()
    fields = body.split(" ")
    if len(fields) < 4:
        raise WndbFormatError(
            f"{filename}:{lineno}: expected at least 4 fields, got {len(fields)}"
        )
    try:
        offset = int(fields[0])
        pos = _SS_TYPE[fields[2]]
        w_cnt = int(fields[3], 16)
    except (ValueError, KeyError):
        raise WndbFormatError(
            f"{filename}:{lineno}: bad synset header fields {fields[:4]!r}"
        ) from None
    if w_cnt < 1 or len(fields) < 4 + 2 * w_cnt:
        raise WndbFormatError(
            f"{filename}:{lineno}: word count {w_cnt} exceeds available fields"
        )
    lemmas = []
    for i in range(w_cnt):
        raw = fields[4 + 2 * i]
        raw = _ADJ_MARKER_RE.sub("", raw)
        lemmas.append(raw.replace("_", " "))
    return SynsetEntry(offset=offset, pos=pos, lemmas=tuple(lemmas))


def parse_wndb(dir_path) -> list[SynsetEntry]:
    """Parse every data.* file present in ``dir_path``.

    License header lines (two leading spaces) are skipped; every other line
    must be a well-formed synset record.
    """
    entries: list[SynsetEntry] = []
    found_any = False
    for filename in sorted(_DATA_FILES):
        path = os.path.join(dir_path, filename)
        if not os.path.exists(path):
            continue
        found_any = True
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if line.startswith("  ") or not line.strip():
                    continue
                entries.append(_parse_data_line(line, filename, lineno))
    if not found_any:
        raise WndbFormatError(f"no data.* files found in {dir_path!r}")
    return entries


@dataclass
class Lexicon:
    """Word -> ordered synonym candidates. A word never lists itself;
    candidate lists are deduplicated and keep first-seen order."""

    entries: dict[str, list[str]]

    def candidates(self, word: str) -> list[str]:
        return self.entries.get(word.lower(), [])

    def __len__(self) -> int:
        return len(self.entries)

    def words(self) -> Iterable[str]:
        return self.entries.keys()


def build_lexicon(
    synsets: Sequence[SynsetEntry], pos: PartOfSpeech | None = None
) -> Lexicon:
    """Materialize synsets into a synonym lookup.

    Each word maps to the union of its co-lemmas across synsets, in file
    order. Multiword lemmas are dropped from candidate lists. ``pos``
    restricts the view to synsets of that part of speech.
    """
    entries: dict[str, list[str]] = {}
    for synset in synsets:
        if pos is not None and synset.pos is not pos:
            continue
        lemmas = [lemma.lower() for lemma in synset.lemmas]
        for lemma in lemmas:
            if " " in lemma:
                continue
            bucket = entries.setdefault(lemma, [])
            for other in lemmas:
                if other != lemma and " " not in other and other not in bucket:
                    bucket.append(other)
    return Lexicon(entries)


def load_tsv_lexicon(path) -> Lexicon:
    """Load a ``word<TAB>syn1,syn2,...`` lexicon.

    Self-references are dropped, duplicates deduplicated in order; a line
    whose candidate list comes up empty is skipped with a warning.
    """
    entries: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split("\t")
            if len(parts) != 2:
                raise LexiconFormatError(
                    f"line {lineno}: expected 'word<TAB>syn1,syn2,...'"
                )
            word = parts[0].lower()
            candidates = []
            for cand in parts[1].split(","):
                cand = cand.strip().lower()
                if cand and cand != word and cand not in candidates:
                    candidates.append(cand)
            if not candidates:
                logger.warning("lexicon %s line %d: no usable candidates for %r",
                               path, lineno, word)
                continue
            entries[word] = candidates
    return Lexicon(entries)

"""Provider abstractions for the three external capabilities the toolkit
consumes: synonym candidates, text embeddings, and token log-probabilities.

Every remote provider speaks one JSON-over-HTTP protocol (POST /v1/logprobs,
/v1/embeddings, /v1/lexsub), so a live model bridge, a recorded-dump
replayer, and in-process test stubs are drop-in equals. Log-probabilities
are natural-log throughout; conversion to bits happens only in the entropy
module.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

import requests

from .corpus import Document

logger = logging.getLogger(__name__)

DEFAULT_TOP_N = 10
BRIDGE_URL_ENV = "LEXIMARK_BRIDGE_URL"


class ProviderError(RuntimeError):
    """Hard provider failure (after retries, or a protocol violation)."""


class TransportError(ProviderError):
    """Retryable transport-level failure."""


@dataclass(frozen=True)
class SynonymCandidate:
    word: str
    rank: int
    provider_score: float | None = None


@dataclass(frozen=True)
class TokenLogProbRecord:
    """One token position from a causal LM.

    ``logprob`` is ln P(token | prefix); ``dist_mean``/``dist_std`` are the
    mean and standard deviation of log-probabilities over the vocabulary at
    this position (what Min-K%++ normalizes with). The first token of a text
    has no conditioning prefix and arrives with ``scored=False``.
    """

    token_text: str
    logprob: float
    dist_mean: float
    dist_std: float
    position: int
    scored: bool = True

    def __post_init__(self) -> None:
        if self.logprob > 0.0:
            raise ValueError(f"logprob must be <= 0, got {self.logprob}")
        if self.dist_std < 0.0:
            raise ValueError(f"dist_std must be >= 0, got {self.dist_std}")


@dataclass(frozen=True)
class TokenLogProbResult:
    """All token records for one text, plus the provider's truncation flag."""

    tokens: tuple[TokenLogProbRecord, ...]
    truncated: bool = False

    def scored_tokens(self) -> list[TokenLogProbRecord]:
        return [t for t in self.tokens if t.scored]


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.values)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """dot(a, b) / (||a|| ||b||); zero vectors are an error."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    dot = sum(x * y for x, y in zip(a.values, b.values))
    na = math.sqrt(sum(x * x for x in a.values))
    nb = math.sqrt(sum(y * y for y in b.values))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine similarity of a zero vector is undefined")
    return dot / (na * nb)


class SynonymProvider(Protocol):
    def synonym_candidates(
        self, word: str, sentence: str, position: int, top_n: int
    ) -> list[SynonymCandidate]: ...


class EmbeddingProvider(Protocol):
    def embed_texts(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


class LogProbProvider(Protocol):
    def token_logprobs(self, texts: Sequence[str]) -> list[TokenLogProbResult]: ...


def synonym_candidates(
    provider: SynonymProvider,
    word: str,
    sentence: str,
    target_position: int,
    top_n: int = DEFAULT_TOP_N,
) -> list[SynonymCandidate]:
    """Query ``provider`` and enforce the response contract: the query word
    never appears, duplicates are dropped, ranks are reassigned densely."""
    raw = provider.synonym_candidates(word, sentence, target_position, top_n)
    out: list[SynonymCandidate] = []
    seen = set()
    for cand in raw:
        w = cand.word
        if w.lower() == word.lower() or w.lower() in seen:
            continue
        seen.add(w.lower())
        out.append(SynonymCandidate(w, rank=len(out), provider_score=cand.provider_score))
        if len(out) >= top_n:
            break
    return out


def embed_texts(
    provider: EmbeddingProvider, texts: Sequence[str]
) -> list[EmbeddingVector]:
    """One vector per text; mismatched dimensions within a batch are a hard
    error."""
    if not texts:
        raise ValueError("texts must be non-empty")
    vectors = provider.embed_texts(texts)
    if len(vectors) != len(texts):
        raise ProviderError(
            f"provider returned {len(vectors)} vectors for {len(texts)} texts"
        )
    dims = {v.dim for v in vectors}
    if len(dims) > 1:
        raise ProviderError(f"inconsistent embedding dimensions in batch: {dims}")
    return vectors


def token_logprobs(
    provider: LogProbProvider, texts: Sequence[str]
) -> list[TokenLogProbResult]:
    if not texts:
        raise ValueError("texts must be non-empty")
    for t in texts:
        if not t:
            raise ValueError("empty input")
    results = provider.token_logprobs(texts)
    if len(results) != len(texts):
        raise ProviderError(
            f"provider returned {len(results)} results for {len(texts)} texts"
        )
    return results


def _records_from_wire(tokens: Iterable[dict]) -> tuple[TokenLogProbRecord, ...]:
    records = []
    for pos, tok in enumerate(tokens):
        records.append(
            TokenLogProbRecord(
                token_text=tok["t"],
                logprob=float(tok["lp"]),
                dist_mean=float(tok["mu"]),
                dist_std=float(tok["sigma"]),
                position=pos,
                scored=pos > 0,
            )
        )
    return tuple(records)


@dataclass
class Telemetry:
    requests: int = 0
    retries: int = 0
    failures: int = 0


class HttpBridgeClient:
    """Client for the bridge protocol; implements all three capabilities.

    Transport failures are retried up to ``max_retries`` times with a short
    backoff; exhausting retries raises :class:`ProviderError` naming the
    endpoint. Retry counts are visible on ``telemetry``.
    """

    def __init__(
        self,
        base_url: str,
        model: str | None = None,
        lexsub_mode: str = "concat",
        bearer_token: str | None = None,
        max_retries: int = 3,
        timeout: float = 60.0,
        backoff: float = 0.2,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.lexsub_mode = lexsub_mode
        self.max_retries = max_retries
        self.timeout = timeout
        self.backoff = backoff
        self.telemetry = Telemetry()
        self._session = session or requests.Session()
        self._headers = {"Content-Type": "application/json"}
        if bearer_token:
            self._headers["Authorization"] = f"Bearer {bearer_token}"

    def _post(self, endpoint: str, payload: dict) -> dict:
        url = f"{self.base_url}{endpoint}"
        attempts = 0
        while True:
            self.telemetry.requests += 1
            try:
                resp = self._session.post(
                    url, json=payload, headers=self._headers, timeout=self.timeout
                )
                if resp.status_code >= 500:
                    raise TransportError(f"{endpoint}: HTTP {resp.status_code}")
                if resp.status_code != 200:
                    raise ProviderError(
                        f"{endpoint}: HTTP {resp.status_code}: {resp.text[:200]}"
                    )
                return resp.json()
            except (requests.RequestException, TransportError) as exc:
                attempts += 1
                if attempts > self.max_retries:
                    self.telemetry.failures += 1
                    raise ProviderError(
                        f"provider {self.base_url} failed on {endpoint} "
                        f"after {self.max_retries} retries: {exc}"
                    ) from exc
                self.telemetry.retries += 1
                time.sleep(self.backoff * attempts)

    def token_logprobs(self, texts: Sequence[str]) -> list[TokenLogProbResult]:
        payload: dict = {"texts": list(texts)}
        if self.model:
            payload["model"] = self.model
        data = self._post("/v1/logprobs", payload)
        results = []
        for item in data["results"]:
            results.append(
                TokenLogProbResult(
                    tokens=_records_from_wire(item["tokens"]),
                    truncated=bool(item.get("truncated", False)),
                )
            )
        return results

    def embed_texts(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        data = self._post("/v1/embeddings", {"texts": list(texts)})
        return [EmbeddingVector(tuple(float(x) for x in vec)) for vec in data["vectors"]]

    def synonym_candidates(
        self, word: str, sentence: str, position: int, top_n: int
    ) -> list[SynonymCandidate]:
        data = self._post(
            "/v1/lexsub",
            {
                "word": word,
                "sentence": sentence,
                "pos": position,
                "mode": self.lexsub_mode,
                "top_n": top_n,
            },
        )
        return [
            SynonymCandidate(c["w"], rank=i, provider_score=c.get("score"))
            for i, c in enumerate(data["candidates"])
        ]


class LexiconSynonymProvider:
    """Offline provider over a :class:`~leximark.wordnet.Lexicon`; ignores
    sentence context, rank order is lexicon order."""

    def __init__(self, lexicon):
        self.lexicon = lexicon

    def synonym_candidates(
        self, word: str, sentence: str, position: int, top_n: int
    ) -> list[SynonymCandidate]:
        return [
            SynonymCandidate(w, rank=i)
            for i, w in enumerate(self.lexicon.candidates(word)[:top_n])
        ]


class HashingEmbeddingProvider:
    """Deterministic local embeddings: words hashed into a fixed-dimension
    count vector. Not semantically meaningful, but stable, nonzero for
    non-empty text, and sensitive to word substitutions."""

    def __init__(self, dim: int = 256):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim

    def embed_texts(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        vectors = []
        for text in texts:
            values = [0.0] * self.dim
            for word in text.lower().split():
                digest = hashlib.sha256(word.encode("utf-8")).digest()
                bucket = int.from_bytes(digest[:4], "big") % self.dim
                values[bucket] += 1.0
            if not any(values):
                values[0] = 1.0  # blank text still embeds
            vectors.append(EmbeddingVector(tuple(values)))
        return vectors


class MappingEmbeddingProvider:
    """Test helper: explicit text -> vector mapping."""

    def __init__(self, mapping: dict[str, Sequence[float]]):
        self.mapping = {k: tuple(float(x) for x in v) for k, v in mapping.items()}

    def embed_texts(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        try:
            return [EmbeddingVector(self.mapping[t]) for t in texts]
        except KeyError as exc:
            raise ProviderError(f"no embedding recorded for text {exc}") from None


class SyntheticLogProbProvider:
    """Deterministic synthetic log-probs derived from a text hash, for tests
    and demos that need a model-free source. ``flag_bias`` raises the
    log-probs of texts listed in ``biased_texts`` (a crude stand-in for a
    model that memorized them)."""

    def __init__(
        self,
        seed: int = 0,
        flag_bias: float = 0.0,
        biased_texts: Iterable[str] = (),
        max_length: int = 512,
    ):
        self.seed = seed
        self.flag_bias = flag_bias
        self.biased = set(biased_texts)
        self.max_length = max_length

    def _token_records(self, text: str) -> TokenLogProbResult:
        words = text.split()
        truncated = len(words) > self.max_length
        words = words[: self.max_length]
        bias = self.flag_bias if text in self.biased else 0.0
        records = []
        for pos, word in enumerate(words):
            digest = hashlib.sha256(
                f"{self.seed}:{pos}:{word}".encode("utf-8")
            ).digest()
            u1 = int.from_bytes(digest[:8], "big") / 2**64
            u2 = int.from_bytes(digest[8:16], "big") / 2**64
            lp = min(0.0, -0.5 - 3.0 * u1 + bias)
            mu = -2.0 - 2.0 * u2
            sigma = 0.5 + u2
            records.append(
                TokenLogProbRecord(word, lp, mu, sigma, position=pos, scored=pos > 0)
            )
        return TokenLogProbResult(tuple(records), truncated=truncated)

    def token_logprobs(self, texts: Sequence[str]) -> list[TokenLogProbResult]:
        return [self._token_records(t) for t in texts]


class DocumentLogProbSource:
    """How corpus scoring obtains records per document: a text-keyed
    provider, or a doc-id-keyed recorded dump."""

    def records_for_documents(
        self, docs: Sequence[Document]
    ) -> list[TokenLogProbResult]:
        raise NotImplementedError


class ProviderLogProbSource(DocumentLogProbSource):
    def __init__(self, provider: LogProbProvider, batch_size: int = 16):
        self.provider = provider
        self.batch_size = batch_size

    def records_for_documents(
        self, docs: Sequence[Document]
    ) -> list[TokenLogProbResult]:
        results: list[TokenLogProbResult] = []
        for i in range(0, len(docs), self.batch_size):
            batch = docs[i : i + self.batch_size]
            results.extend(token_logprobs(self.provider, [d.text for d in batch]))
        return results


class ReplayLogProbSource(DocumentLogProbSource):
    """Replays a recorded dump: JSONL, one object per document,
    ``{"id": ..., "tokens": [{"t","lp","mu","sigma"}, ...], "truncated": bool}``."""

    def __init__(self, path):
        self.path = path
        self._by_id: dict[str, TokenLogProbResult] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    doc_id = obj["id"]
                    result = TokenLogProbResult(
                        tokens=_records_from_wire(obj["tokens"]),
                        truncated=bool(obj.get("truncated", False)),
                    )
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ProviderError(
                        f"{path}: line {lineno}: malformed dump record ({exc})"
                    ) from None
                self._by_id[doc_id] = result

    def records_for_documents(
        self, docs: Sequence[Document]
    ) -> list[TokenLogProbResult]:
        missing = [d.id for d in docs if d.id not in self._by_id]
        if missing:
            raise ProviderError(
                f"dump {self.path} has no records for doc ids: {missing[:5]}"
            )
        return [self._by_id[d.id] for d in docs]


def save_logprob_dump(
    path, ids: Sequence[str], results: Sequence[TokenLogProbResult]
) -> None:
    """Write results in the replayable dump format."""
    if len(ids) != len(results):
        raise ValueError("ids and results must align")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc_id, result in zip(ids, results):
            obj = {
                "id": doc_id,
                "tokens": [
                    {"t": r.token_text, "lp": r.logprob, "mu": r.dist_mean,
                     "sigma": r.dist_std}
                    for r in result.tokens
                ],
                "truncated": result.truncated,
            }
            fh.write(json.dumps(obj, ensure_ascii=False))
            fh.write("\n")


# JSON Schemas for protocol responses; the bridge conformance tests and the
# dump loader validate against these.
TOKEN_SCHEMA = {
    "type": "object",
    "required": ["t", "lp", "mu", "sigma"],
    "properties": {
        "t": {"type": "string"},
        "lp": {"type": "number", "maximum": 0.0},
        "mu": {"type": "number"},
        "sigma": {"type": "number", "minimum": 0.0},
    },
}

LOGPROBS_RESPONSE_SCHEMA = {
    "type": "object",
    "required": ["results"],
    "properties": {
        "results": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["tokens"],
                "properties": {
                    "tokens": {"type": "array", "items": TOKEN_SCHEMA},
                    "truncated": {"type": "boolean"},
                },
            },
        }
    },
}

EMBEDDINGS_RESPONSE_SCHEMA = {
    "type": "object",
    "required": ["vectors", "dim"],
    "properties": {
        "vectors": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}},
        },
        "dim": {"type": "integer", "minimum": 1},
    },
}

LEXSUB_RESPONSE_SCHEMA = {
    "type": "object",
    "required": ["candidates"],
    "properties": {
        "candidates": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["w"],
                "properties": {
                    "w": {"type": "string"},
                    "score": {"type": "number"},
                },
            },
        }
    },
}

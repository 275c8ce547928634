"""Deterministic tiny-weights backends for integration tests: no downloads,
no GPU, byte-stable responses. The language model is a fixed random bigram
table over hashed token buckets; moments are computed exactly over its
(small) output distribution, mirroring what the real backend does over a full
vocabulary softmax.
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

# Word list backing the stub lexical-substitution endpoint.
_STUB_WORDS = (
    "able acute big bright calm clear deep fast fine firm fresh good grand "
    "great happy high keen kind large light little lively long loud low "
    "mild neat new nice plain proud pure quick quiet rapid rare rich sharp "
    "short simple slow small smart soft solid sound spare steep stern still "
    "strong sweet swift tall thick thin tight true vast warm wide wild wise"
).split()


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


class StubLanguageModel:
    """Causal LM stand-in with fixed seeded weights."""

    def __init__(self, seed: int = 0xC0FFEE, vocab_size: int = 64,
                 context_buckets: int = 257):
        rng = np.random.default_rng(seed)
        self.vocab_size = vocab_size
        self.context_buckets = context_buckets
        self.weights = rng.normal(0.0, 2.0, size=(context_buckets, vocab_size))
        self._log_softmax = None

    def tokenize(self, text: str) -> list[str]:
        return _TOKEN_RE.findall(text)

    def _bucket(self, token: str) -> int:
        return _stable_hash("ctx:" + token) % self.context_buckets

    def _token_id(self, token: str) -> int:
        return _stable_hash("tok:" + token) % self.vocab_size

    def _distribution(self, context_token: str) -> np.ndarray:
        logits = self.weights[self._bucket(context_token)]
        shifted = logits - logits.max()
        return shifted - np.log(np.exp(shifted).sum())

    def token_records(self, text: str, max_length: int) -> tuple[list[dict], bool]:
        tokens = self.tokenize(text)
        truncated = len(tokens) > max_length
        tokens = tokens[:max_length]
        records = []
        prev = "<s>"
        for tok in tokens:
            log_probs = self._distribution(prev)
            probs = np.exp(log_probs)
            lp = float(min(log_probs[self._token_id(tok)], 0.0))
            mu = float((probs * log_probs).sum())
            var = float((probs * (log_probs - mu) ** 2).sum())
            records.append(
                {"t": tok, "lp": lp, "mu": mu, "sigma": float(np.sqrt(max(var, 0.0)))}
            )
            prev = tok
        return records, truncated


class StubEmbedder:
    """Hashed character-bigram embeddings, L2-normalized."""

    def __init__(self, dim: int = 32):
        self.dim = dim

    def embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            values = np.zeros(self.dim)
            padded = f"^{text.lower()}$"
            for i in range(len(padded) - 1):
                values[_stable_hash(padded[i : i + 2]) % self.dim] += 1.0
            norm = float(np.linalg.norm(values))
            if norm == 0.0:
                values[0] = 1.0
                norm = 1.0
            out.append([float(x) for x in values / norm])
        return out


class StubLexsub:
    """Ranks a fixed word list by a keyed hash of (word, sentence, position,
    mode), so the two modes give different but stable candidate orders."""

    def candidates(self, word: str, sentence: str, pos: int, mode: str,
                   top_n: int) -> list[dict]:
        scored = []
        for cand in _STUB_WORDS:
            if cand.lower() == word.lower():
                continue
            h = _stable_hash(f"{mode}|{cand}|{word}|{pos}|{sentence}")
            scored.append((h / 2**64, cand))
        scored.sort(reverse=True)
        return [{"w": cand, "score": round(score, 6)}
                for score, cand in scored[:top_n]]

"""Real model backends. Imports of torch/transformers are deferred to
construction time so the stub-only configuration works without them
installed. Distribution moments are computed exactly over the full softmax.
"""

from __future__ import annotations


class ModelLoadError(RuntimeError):
    pass


def _require_torch():
    try:
        import torch  # noqa: F401
        import transformers  # noqa: F401
    except ImportError as exc:
        raise ModelLoadError(
            "real-model mode needs the 'models' extra (torch, transformers)"
        ) from exc


class CausalLMBackend:
    def __init__(self, model_id: str, device: str = "cpu"):
        _require_torch()
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self.torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForCausalLM.from_pretrained(model_id).to(device)
        self.model.eval()
        self.device = device

    def token_records(self, text: str, max_length: int) -> tuple[list[dict], bool]:
        torch = self.torch
        enc = self.tokenizer(text, return_tensors="pt", truncation=True,
                             max_length=max_length)
        ids = enc["input_ids"][0]
        truncated = len(self.tokenizer(text)["input_ids"]) > len(ids)
        with torch.no_grad():
            logits = self.model(enc["input_ids"].to(self.device)).logits[0].float()
        records = []
        for pos in range(len(ids)):
            token_text = self.tokenizer.decode(ids[pos])
            if pos == 0:
                # no conditioning prefix; serve a flat placeholder row
                records.append({"t": token_text, "lp": 0.0, "mu": 0.0, "sigma": 0.0})
                continue
            log_probs = torch.log_softmax(logits[pos - 1], dim=-1)
            probs = log_probs.exp()
            lp = float(log_probs[ids[pos]].clamp(max=0.0))
            mu = float((probs * log_probs).sum())
            var = float((probs * (log_probs - mu) ** 2).sum())
            records.append(
                {"t": token_text, "lp": lp, "mu": mu,
                 "sigma": max(var, 0.0) ** 0.5}
            )
        return records, truncated


class EmbeddingBackend:
    def __init__(self, model_id: str, device: str = "cpu"):
        _require_torch()
        import torch
        from transformers import AutoModel, AutoTokenizer

        self.torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModel.from_pretrained(model_id).to(device)
        self.model.eval()
        self.device = device

    def embed(self, texts: list[str]) -> list[list[float]]:
        torch = self.torch
        enc = self.tokenizer(texts, return_tensors="pt", padding=True,
                             truncation=True).to(self.device)
        with torch.no_grad():
            hidden = self.model(**enc).last_hidden_state
        mask = enc["attention_mask"].unsqueeze(-1).float()
        pooled = (hidden * mask).sum(1) / mask.sum(1).clamp(min=1e-9)
        normalized = torch.nn.functional.normalize(pooled, dim=-1)
        return [[float(x) for x in row] for row in normalized]


class MaskedLexsubBackend:
    """Masked-LM candidate generation: 'concat' masks the target word and
    predicts it; 'dropout' zeroes 30% of the target word's input embedding
    (fixed seed) and ranks the vocabulary at its position."""

    DROPOUT_RATE = 0.3

    def __init__(self, model_id: str, device: str = "cpu"):
        _require_torch()
        import torch
        from transformers import AutoModelForMaskedLM, AutoTokenizer

        self.torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForMaskedLM.from_pretrained(model_id).to(device)
        self.model.eval()
        self.device = device

    def _clean_candidates(self, token_ids, scores, word: str, top_n: int):
        out = []
        for tid, score in zip(token_ids, scores):
            cand = self.tokenizer.decode([int(tid)]).strip()
            if not cand.isalpha() or cand.lower() == word.lower():
                continue
            out.append({"w": cand, "score": float(score)})
            if len(out) >= top_n:
                break
        return out

    def candidates(self, word: str, sentence: str, pos: int, mode: str,
                   top_n: int) -> list[dict]:
        torch = self.torch
        words = sentence.split()
        if not (0 <= pos < len(words)):
            raise IndexError(f"position {pos} outside sentence of {len(words)} words")
        if mode == "concat":
            masked = words.copy()
            masked[pos] = self.tokenizer.mask_token
            enc = self.tokenizer(" ".join(masked), return_tensors="pt").to(self.device)
            with torch.no_grad():
                logits = self.model(**enc).logits[0]
            mask_positions = (
                enc["input_ids"][0] == self.tokenizer.mask_token_id
            ).nonzero(as_tuple=True)[0]
            row = logits[int(mask_positions[0])].softmax(-1)
        else:  # dropout
            enc = self.tokenizer(sentence, return_tensors="pt").to(self.device)
            span = self.tokenizer(" " + word, add_special_tokens=False)["input_ids"]
            ids = enc["input_ids"][0].tolist()
            target_pos = next(
                (i for i in range(len(ids) - len(span) + 1)
                 if ids[i : i + len(span)] == span), 1,
            )
            embeddings = self.model.get_input_embeddings()(enc["input_ids"])
            gen = torch.Generator(device="cpu").manual_seed(0)
            keep = (torch.rand(embeddings.shape[-1], generator=gen)
                    >= self.DROPOUT_RATE).to(embeddings.dtype)
            embeddings[0, target_pos] = embeddings[0, target_pos] * keep
            with torch.no_grad():
                logits = self.model(inputs_embeds=embeddings).logits[0]
            row = logits[target_pos].softmax(-1)
        scores, token_ids = row.topk(max(top_n * 4, 40))
        return self._clean_candidates(token_ids, scores, word, top_n)

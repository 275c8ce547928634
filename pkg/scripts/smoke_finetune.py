#!/usr/bin/env python3
"""Optional end-to-end smoke: watermark a small corpus, briefly fine-tune a
small public causal LM on the watermarked member split, then check that
Min-K%++(20%) separates member from held-out documents (AUROC > 0.6).

Needs model downloads and ideally a GPU; nothing in the regular test suite
depends on it. Example:

    python3 scripts/smoke_finetune.py --corpus data/docs.jsonl \
        --model EleutherAI/pythia-160m --device cuda --out-dir smoke_out
"""

import argparse
import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from leximark.corpus import Document, Label, load_corpus, save_corpus
from leximark.detect import auroc
from leximark.embedder import EmbedConfig, ProviderBundle, embed_corpus
from leximark.entropy import load_frequency_table
from leximark.mia import score_corpus
from leximark.providers import (
    LexiconSynonymProvider,
    ProviderLogProbSource,
    TokenLogProbRecord,
    TokenLogProbResult,
)
from leximark.wordnet import build_lexicon, load_tsv_lexicon, parse_wndb


class LocalModelLogProbs:
    """In-process log-prob provider over a transformers causal LM."""

    def __init__(self, model, tokenizer, device, max_length=512):
        import torch

        self.torch = torch
        self.model = model.eval()
        self.tokenizer = tokenizer
        self.device = device
        self.max_length = max_length

    def token_logprobs(self, texts):
        torch = self.torch
        out = []
        for text in texts:
            enc = self.tokenizer(text, return_tensors="pt", truncation=True,
                                 max_length=self.max_length)
            ids = enc["input_ids"][0]
            with torch.no_grad():
                logits = self.model(
                    enc["input_ids"].to(self.device)
                ).logits[0].float().cpu()
            records = []
            for pos in range(len(ids)):
                if pos == 0:
                    records.append(TokenLogProbRecord(
                        self.tokenizer.decode(ids[0]), 0.0, 0.0, 0.0, 0,
                        scored=False))
                    continue
                log_probs = torch.log_softmax(logits[pos - 1], dim=-1)
                probs = log_probs.exp()
                mu = float((probs * log_probs).sum())
                var = float((probs * (log_probs - mu) ** 2).sum())
                records.append(TokenLogProbRecord(
                    self.tokenizer.decode(ids[pos]),
                    float(log_probs[ids[pos]].clamp(max=0.0)),
                    mu, max(var, 0.0) ** 0.5, pos))
            out.append(TokenLogProbResult(tuple(records)))
        return out


def fine_tune(model_id, texts, device, epochs, out_dir):
    import torch
    from torch.utils.data import DataLoader
    from transformers import AutoModelForCausalLM, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_id)
    if tokenizer.pad_token is None:
        tokenizer.pad_token = tokenizer.eos_token
    model = AutoModelForCausalLM.from_pretrained(model_id).to(device)
    enc = tokenizer(texts, truncation=True, max_length=256, padding=True,
                    return_tensors="pt")
    dataset = list(zip(enc["input_ids"], enc["attention_mask"]))
    loader = DataLoader(dataset, batch_size=2, shuffle=True)
    optimizer = torch.optim.AdamW(model.parameters(), lr=2e-5)
    model.train()
    for epoch in range(epochs):
        for input_ids, attention_mask in loader:
            input_ids = input_ids.to(device)
            attention_mask = attention_mask.to(device)
            labels = input_ids.masked_fill(attention_mask == 0, -100)
            loss = model(input_ids=input_ids, attention_mask=attention_mask,
                         labels=labels).loss
            loss.backward()
            optimizer.step()
            optimizer.zero_grad()
        print(f"epoch {epoch}: loss {loss.item():.3f}")
    model.save_pretrained(out_dir / "model")
    tokenizer.save_pretrained(out_dir / "model")
    return model, tokenizer


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--corpus", required=True,
                        help="JSONL corpus; >= 400 docs recommended")
    parser.add_argument("--model", default="EleutherAI/pythia-160m")
    parser.add_argument("--device", default="cuda")
    parser.add_argument("--epochs", type=int, default=1)
    parser.add_argument("--n-member", type=int, default=200)
    parser.add_argument("--freq-table", required=True)
    parser.add_argument("--lexicon", help="TSV lexicon")
    parser.add_argument("--wndb-dir", help="WNDB directory")
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default="smoke_out")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    docs = load_corpus(args.corpus)
    rng = random.Random(args.seed)
    rng.shuffle(docs)
    members = docs[: args.n_member]
    holdout = docs[args.n_member : 2 * args.n_member]
    if len(holdout) < args.n_member:
        sys.exit("corpus too small for the requested member split")

    table = load_frequency_table(args.freq_table)
    if args.lexicon:
        lexicon = load_tsv_lexicon(args.lexicon)
    elif args.wndb_dir:
        lexicon = build_lexicon(parse_wndb(args.wndb_dir))
    else:
        sys.exit("need --lexicon or --wndb-dir")
    bundle = ProviderBundle(synonyms=LexiconSynonymProvider(lexicon))
    config = EmbedConfig(k=args.k, seed=args.seed)

    marked_members, _ = embed_corpus(
        [Document(d.id, d.text, Label.MEMBER) for d in members],
        table, bundle, config)
    marked_holdout, _ = embed_corpus(
        [Document(d.id, d.text, Label.NONMEMBER) for d in holdout],
        table, bundle, config)
    eval_docs = marked_members + marked_holdout
    save_corpus(eval_docs, out_dir / "eval_corpus.jsonl")

    model, tokenizer = fine_tune(
        args.model, [d.text for d in marked_members], args.device,
        args.epochs, out_dir)
    model.eval()

    provider = LocalModelLogProbs(model, tokenizer, args.device)
    scored = score_corpus(eval_docs, ProviderLogProbSource(provider),
                          ["min_kpp"], [20.0])
    member_scores = [sd.scores["min_kpp_20.0"] for sd in scored
                     if sd.label is Label.MEMBER]
    holdout_scores = [sd.scores["min_kpp_20.0"] for sd in scored
                      if sd.label is Label.NONMEMBER]
    value = auroc(member_scores, holdout_scores)
    result = {"auroc_min_kpp_20": value, "n_member": len(member_scores),
              "n_holdout": len(holdout_scores), "model": args.model,
              "threshold": 0.6, "pass": value > 0.6}
    (out_dir / "smoke_result.json").write_text(json.dumps(result, indent=2))
    print(json.dumps(result, indent=2))
    sys.exit(0 if result["pass"] else 1)


if __name__ == "__main__":
    main()

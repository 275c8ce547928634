import random

import pytest

from leximark.corpus import Document, document_tokens
from leximark.entropy import ExclusionPolicy, FrequencyTable
from leximark.embedder import (
    KEEP,
    EmbedConfig,
    EmbedConfigError,
    ProviderBundle,
    SubstitutionRecord,
    WatermarkLog,
    choose_replacement,
    embed_corpus,
    embed_document,
)
from leximark.providers import (
    LexiconSynonymProvider,
    MappingEmbeddingProvider,
    cosine_similarity,
    embed_texts,
)
from leximark.wordnet import Lexicon

from conftest import (
    ECOMMERCE_ORIGINAL,
    ECOMMERCE_WATERMARKED,
    FOX_ORIGINAL,
    FOX_WATERMARKED,
)


def bundle_for(mapping):
    return ProviderBundle(synonyms=LexiconSynonymProvider(Lexicon(mapping)))


def test_choose_replacement_takes_first_qualified(freq_table, stub_bundle, k3_config):
    result = choose_replacement(
        "quick", FOX_ORIGINAL, 1, freq_table, stub_bundle, k3_config, {}
    )
    assert result == "speedy"


def test_choose_replacement_skips_lower_entropy_rank(freq_table, stub_bundle, k3_config):
    # idle is ranked first in the stub lexicon but is more common than lazy
    result = choose_replacement(
        "lazy", FOX_ORIGINAL, 7, freq_table, stub_bundle, k3_config, {}
    )
    assert result == "sluggish"


def test_choose_replacement_keeps_without_higher_entropy():
    table = FrequencyTable({"rare": 1e-6, "common": 1e-2})
    bundle = bundle_for({"rare": ["common"]})
    result = choose_replacement("rare", "rare words", 0, table, bundle,
                                EmbedConfig(k=1), {})
    assert result is KEEP


def test_choose_replacement_requires_alphabetic_candidate():
    table = FrequencyTable({"x": 1e-2, "y2k": 1e-8, "rare": 1e-8})
    bundle = bundle_for({"x": ["y2k", "rare"]})
    assert choose_replacement("x", "x marks", 0, table, bundle,
                              EmbedConfig(k=1), {}) == "rare"


def test_oov_original_never_replaced_by_oov_candidate():
    table = FrequencyTable({})
    bundle = bundle_for({"unseen": ["alsounseen"]})
    assert choose_replacement("unseen", "unseen words", 0, table, bundle,
                              EmbedConfig(k=1), {}) is KEEP


def test_similarity_threshold_filters_candidates():
    table = FrequencyTable({"quick": 1e-3, "speedy": 1e-5, "fox": 1e-2})
    embeddings = MappingEmbeddingProvider(
        {"quick fox": (1.0, 0.0), "speedy fox": (0.9, 0.43588989435406733)}
    )
    bundle = ProviderBundle(
        synonyms=LexiconSynonymProvider(Lexicon({"quick": ["speedy"]})),
        embeddings=embeddings,
    )
    accept = EmbedConfig(k=1, similarity_threshold=0.8)
    reject = EmbedConfig(k=1, similarity_threshold=0.95)
    assert choose_replacement("quick", "quick fox", 0, table, bundle,
                              accept, {}) == "speedy"
    assert choose_replacement("quick", "quick fox", 0, table, bundle,
                              reject, {}) is KEEP


def test_threshold_without_embedding_provider_is_config_error():
    table = FrequencyTable({"quick": 1e-3, "speedy": 1e-5})
    bundle = bundle_for({"quick": ["speedy"]})
    with pytest.raises(EmbedConfigError):
        choose_replacement("quick", "quick fox", 0, table, bundle,
                           EmbedConfig(k=1, similarity_threshold=0.9), {})


def test_embed_document_fox_sentence(freq_table, stub_bundle, k3_config):
    doc = Document("fig1", FOX_ORIGINAL)
    out, records = embed_document(doc, freq_table, stub_bundle, k3_config, {})
    assert out.text == FOX_WATERMARKED
    assert [(r.original, r.replacement) for r in records] == [
        ("quick", "speedy"),
        ("jumps", "leaps"),
        ("lazy", "sluggish"),
    ]


def test_embed_document_ecommerce_sentence(freq_table, stub_bundle, k3_config):
    doc = Document("fig2", ECOMMERCE_ORIGINAL)
    out, _ = embed_document(doc, freq_table, stub_bundle, k3_config, {})
    assert out.text == ECOMMERCE_WATERMARKED


def test_embed_document_no_eligible_words(freq_table, stub_bundle, k3_config):
    doc = Document("d", "The the over THE")
    out, records = embed_document(doc, freq_table, stub_bundle, k3_config, {})
    assert out.text == doc.text
    assert records == []


def test_capitalization_preserved():
    table = FrequencyTable({"quick": 1e-3, "speedy": 1e-5, "words": 1e-2})
    bundle = bundle_for({"quick": ["speedy"]})
    doc = Document("d", "Quick words")
    out, records = embed_document(doc, table, bundle, EmbedConfig(k=1), {},
                                  ExclusionPolicy.none())
    assert out.text == "Speedy words"
    assert records[0].replacement == "Speedy"


def test_all_occurrences_in_sentence_rewritten():
    table = FrequencyTable({"quick": 1e-3, "speedy": 1e-5, "dog": 1e-2})
    bundle = bundle_for({"quick": ["speedy"]})
    doc = Document("d", "quick dog quick")
    out, records = embed_document(doc, table, bundle, EmbedConfig(k=1), {},
                                  ExclusionPolicy.none())
    assert out.text == "speedy dog speedy"
    assert len(records) == 2
    assert all(r.source == "fresh" for r in records)


def test_cache_reused_across_documents(freq_table, stub_bundle, k3_config):
    cache = {}
    doc1 = Document("d1", FOX_ORIGINAL)
    doc2 = Document("d2", "A quick look")
    embed_document(doc1, freq_table, stub_bundle, k3_config, cache)
    _, records = embed_document(doc2, freq_table, stub_bundle, k3_config, cache)
    assert [(r.original, r.replacement, r.source) for r in records] == [
        ("quick", "speedy", "cache")
    ]


def test_cache_keep_decision_reused():
    table = FrequencyTable({"rare": 1e-6, "common": 1e-2, "stuff": 1e-2})

    class CountingProvider:
        calls = 0

        def synonym_candidates(self, word, sentence, position, top_n):
            CountingProvider.calls += 1
            return []

    bundle = ProviderBundle(synonyms=CountingProvider())
    cache = {}
    config = EmbedConfig(k=1)
    embed_document(Document("a", "rare stuff"), table, bundle, config, cache,
                   ExclusionPolicy.none())
    embed_document(Document("b", "rare stuff"), table, bundle, config, cache,
                   ExclusionPolicy.none())
    assert CountingProvider.calls == 1
    assert cache["rare"] is KEEP


def test_strict_entropy_increase_over_records(freq_table, stub_bundle):
    from leximark.entropy import word_entropy

    docs = [
        Document("a", FOX_ORIGINAL),
        Document("b", ECOMMERCE_ORIGINAL),
        Document("c", FOX_ORIGINAL + ". " + FOX_ORIGINAL),
    ]
    _, log = embed_corpus(docs, freq_table, stub_bundle, EmbedConfig(k=5))
    assert log.records
    for rec in log.records:
        assert rec.replacement_entropy > rec.original_entropy
        assert rec.original_entropy == word_entropy(freq_table, rec.original)


def test_k_bound_per_sentence(freq_table, stub_bundle):
    docs = [Document("a", FOX_ORIGINAL), Document("b", ECOMMERCE_ORIGINAL)]
    for k in (1, 2, 3):
        _, log = embed_corpus(docs, freq_table, stub_bundle, EmbedConfig(k=k))
        per_sentence = {}
        for rec in log.records:
            per_sentence.setdefault((rec.doc_id, rec.sentence_index), set()).add(
                rec.original.lower()
            )
        assert all(len(words) <= k for words in per_sentence.values())


def test_fraction_selects_exact_count_deterministically(freq_table, stub_bundle):
    docs = [Document(f"d{i}", FOX_ORIGINAL) for i in range(100)]
    config = EmbedConfig(k=3, watermark_fraction=0.05, seed=42)
    out1, log1 = embed_corpus(docs, freq_table, stub_bundle, config)
    out2, log2 = embed_corpus(docs, freq_table, stub_bundle, config)
    assert len(log1.watermarked_ids) == 5
    assert log1.watermarked_ids == log2.watermarked_ids
    assert [d.text for d in out1] == [d.text for d in out2]
    marked = {d.id for d in out1 if d.meta.get("leximark") == "1"}
    assert marked == set(log1.watermarked_ids)
    untouched = [d for d in out1 if d.meta.get("leximark") == "0"]
    assert all(d.text == FOX_ORIGINAL for d in untouched)


def test_fraction_one_marks_all(freq_table, stub_bundle, k3_config):
    docs = [Document(f"d{i}", FOX_ORIGINAL) for i in range(7)]
    out, log = embed_corpus(docs, freq_table, stub_bundle, k3_config)
    assert len(log.watermarked_ids) == 7
    assert all(d.meta.get("leximark") == "1" for d in out)


def test_similarity_guarantee_holds_post_hoc(freq_table, stub_lexicon):
    from leximark.providers import HashingEmbeddingProvider

    threshold = 0.6
    embeddings = HashingEmbeddingProvider(dim=64)
    bundle = ProviderBundle(
        synonyms=LexiconSynonymProvider(stub_lexicon), embeddings=embeddings
    )
    config = EmbedConfig(k=3, similarity_threshold=threshold)
    doc = Document("d", FOX_ORIGINAL + ". " + ECOMMERCE_ORIGINAL)
    out, records = embed_document(doc, freq_table, bundle, config, {})
    # re-verify each modified sentence against its original with the same provider
    orig_sentences = [doc.text[s.start:s.end] for s, _ in document_tokens(doc.text)]
    new_sentences = [out.text[s.start:s.end] for s, _ in document_tokens(out.text)]
    changed = 0
    for a, b in zip(orig_sentences, new_sentences):
        if a != b:
            va, vb = embed_texts(embeddings, [a, b])
            assert cosine_similarity(va, vb) >= threshold
            changed += 1
    assert changed >= 1


def test_watermark_log_round_trip(tmp_path, freq_table, stub_bundle, k3_config):
    docs = [Document("a", FOX_ORIGINAL)]
    _, log = embed_corpus(docs, freq_table, stub_bundle, k3_config)
    path = tmp_path / "log.jsonl"
    log.save(path)
    loaded = WatermarkLog.load(path)
    assert loaded.records == log.records


def test_randomized_corpus_invariants():
    rng = random.Random(1234)
    vocab = [f"word{i}" for i in range(120)]
    probs = {w: 10 ** -rng.uniform(2, 8) for w in vocab}
    table = FrequencyTable(dict(probs))
    lexicon = {
        w: rng.sample(vocab, 3) for w in vocab if rng.random() < 0.7
    }
    bundle = bundle_for(lexicon)
    docs = []
    for i in range(50):
        sentences = []
        for _ in range(rng.randint(1, 4)):
            sentences.append(" ".join(rng.sample(vocab, rng.randint(4, 10))) + ".")
        docs.append(Document(f"d{i}", " ".join(sentences)))
    k = 3
    _, log = embed_corpus(docs, table, bundle, EmbedConfig(k=k, seed=9),
                          ExclusionPolicy.none())
    per_sentence = {}
    for rec in log.records:
        assert rec.replacement_entropy > rec.original_entropy
        per_sentence.setdefault((rec.doc_id, rec.sentence_index), set()).add(
            rec.original.lower()
        )
    assert all(len(ws) <= k for ws in per_sentence.values())

import pytest

from leximark.wordnet import (
    LexiconFormatError,
    PartOfSpeech,
    SynsetEntry,
    WndbFormatError,
    build_lexicon,
    load_tsv_lexicon,
    parse_wndb,
)


def write_wndb(tmp_path, **files):
    d = tmp_path / "wndb"
    d.mkdir()
    for name, content in files.items():
        (d / name.replace("_", ".")).write_text(content, encoding="utf-8")
    return d


def test_parse_single_synset(tmp_path):
    d = write_wndb(
        tmp_path,
        data_adj="00001740 00 a 02 quick 0 speedy 0 000 | moving fast\n",
    )
    entries = parse_wndb(d)
    assert entries == [
        SynsetEntry(offset=1740, pos=PartOfSpeech.ADJ, lemmas=("quick", "speedy"))
    ]


def test_header_only_file_yields_empty(tmp_path):
    d = write_wndb(tmp_path, data_noun="  1 license line one\n  2 line two\n")
    assert parse_wndb(d) == []


def test_three_synsets_across_two_pos_files(fixtures_dir):
    entries = parse_wndb(fixtures_dir / "wndb")
    assert len(entries) == 3
    assert {e.pos for e in entries} == {PartOfSpeech.ADJ, PartOfSpeech.VERB}


def test_entry_count_equals_data_line_count(fixtures_dir):
    data_lines = 0
    for name in ("data.adj", "data.verb"):
        for line in (fixtures_dir / "wndb" / name).read_text().splitlines():
            if line and not line.startswith("  "):
                data_lines += 1
    assert len(parse_wndb(fixtures_dir / "wndb")) == data_lines


def test_malformed_field_count_names_file_and_line(tmp_path):
    d = write_wndb(tmp_path, data_verb="00001740 29 v 05 jump 0 000\n")
    with pytest.raises(WndbFormatError, match=r"data\.verb:1"):
        parse_wndb(d)


def test_adjective_marker_stripped(tmp_path):
    d = write_wndb(
        tmp_path,
        data_adj="00001740 00 a 02 galore(ip) 0 abundant 0 000 | plentiful\n",
    )
    assert parse_wndb(d)[0].lemmas == ("galore", "abundant")


def test_missing_directory_rejected(tmp_path):
    with pytest.raises(WndbFormatError):
        parse_wndb(tmp_path / "nowhere")


def test_build_lexicon_symmetry():
    synsets = [SynsetEntry(1, PartOfSpeech.ADJ, ("quick", "speedy"))]
    lex = build_lexicon(synsets)
    assert lex.candidates("quick") == ["speedy"]
    assert lex.candidates("speedy") == ["quick"]


def test_build_lexicon_union_in_file_order():
    synsets = [
        SynsetEntry(1, PartOfSpeech.ADJ, ("quick", "speedy")),
        SynsetEntry(2, PartOfSpeech.ADJ, ("quick", "fast")),
    ]
    lex = build_lexicon(synsets)
    assert lex.candidates("quick") == ["speedy", "fast"]


def test_build_lexicon_drops_multiword_lemmas():
    synsets = [SynsetEntry(1, PartOfSpeech.ADV, ("immediately", "at once"))]
    lex = build_lexicon(synsets)
    assert lex.candidates("immediately") == []
    assert lex.candidates("at once") == []


def test_build_lexicon_pos_filter():
    synsets = [
        SynsetEntry(1, PartOfSpeech.ADJ, ("quick", "speedy")),
        SynsetEntry(2, PartOfSpeech.VERB, ("jump", "leap")),
    ]
    lex = build_lexicon(synsets, pos=PartOfSpeech.VERB)
    assert lex.candidates("quick") == []
    assert lex.candidates("jump") == ["leap"]


def test_single_synset_symmetry_property():
    lemmas = ("one", "two", "three")
    lex = build_lexicon([SynsetEntry(9, PartOfSpeech.NOUN, lemmas)])
    for a in lemmas:
        for b in lemmas:
            if a != b:
                assert (b in lex.candidates(a)) == (a in lex.candidates(b))


def test_load_tsv_lexicon(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("quick\tspeedy\nlazy\tsluggish,idle\n", encoding="utf-8")
    lex = load_tsv_lexicon(path)
    assert lex.candidates("quick") == ["speedy"]
    assert lex.candidates("lazy") == ["sluggish", "idle"]


def test_tsv_lexicon_word_never_its_own_candidate(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("quick\tquick,speedy\n", encoding="utf-8")
    assert load_tsv_lexicon(path).candidates("quick") == ["speedy"]


def test_tsv_lexicon_empty_candidates_skipped_with_warning(tmp_path, caplog):
    path = tmp_path / "lex.tsv"
    path.write_text("quick\tquick\nlazy\tidle\n", encoding="utf-8")
    with caplog.at_level("WARNING"):
        lex = load_tsv_lexicon(path)
    assert "quick" in caplog.text
    assert len(lex) == 1


def test_tsv_lexicon_malformed_line(tmp_path):
    path = tmp_path / "lex.tsv"
    path.write_text("quick speedy\n", encoding="utf-8")
    with pytest.raises(LexiconFormatError, match="line 1"):
        load_tsv_lexicon(path)

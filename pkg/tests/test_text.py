from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from traitgen.errors import EncodingError, InvalidIdError, ShapeError, ValidationError
from traitgen.textproc import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    UNK_ID,
    Document,
    EncodedText,
    Vocabulary,
    decode,
    encode,
    read_corpus,
    tokenize,
    write_corpus,
)

# ------------------------------------------------------------------- tokenize


def test_whitespace_mode_collapses_runs() -> None:
    assert tokenize("a b  c") == ["a", "b", "c"]
    assert tokenize(" a\tb\nc ") == ["a", "b", "c"]


def test_empty_text_yields_no_tokens() -> None:
    assert tokenize("") == []
    assert tokenize("   ") == []
    assert tokenize("", mode="cjk_char") == []


def test_cjk_char_mode_splits_ideographs_and_groups_latin() -> None:
    assert tokenize("我爱NLP", mode="cjk_char") == ["我", "爱", "NLP"]
    assert tokenize("深度learning模型", mode="cjk_char") == ["深", "度", "learning", "模", "型"]
    assert tokenize("hello 世界!", mode="cjk_char") == ["hello", "世", "界", "!"]


def test_cjk_char_mode_keeps_emoticons_as_tokens() -> None:
    assert tokenize("好开心😊", mode="cjk_char") == ["好", "开", "心", "😊"]


def test_unknown_mode_rejected() -> None:
    with pytest.raises(ValidationError):
        tokenize("abc", mode="bpe")


def test_lone_surrogate_rejected() -> None:
    with pytest.raises(EncodingError):
        tokenize("bad \ud800 text")


# ----------------------------------------------------------------- vocabulary


def test_empty_corpus_gives_specials_only() -> None:
    v = Vocabulary.build([])
    assert len(v) == 4
    assert v.token_of(PAD_ID) == "<pad>"
    assert v.token_of(UNK_ID) == "<unk>"
    assert v.token_of(BOS_ID) == "<s>"
    assert v.token_of(EOS_ID) == "</s>"


def test_min_count_filters_rare_tokens() -> None:
    v = Vocabulary.build([["x", "x"], ["x", "y"]], min_count=2)
    assert len(v) == 5
    assert v.id_of("x") == 4
    assert v.id_of("y") == UNK_ID


def test_frequency_ties_break_lexicographically() -> None:
    v = Vocabulary.build([["b", "a", "c"]], min_count=1)
    assert [v.token_of(i) for i in range(4, 7)] == ["a", "b", "c"]


def test_ranking_is_frequency_first() -> None:
    v = Vocabulary.build([["z", "z", "z", "a"]], min_count=1)
    assert v.token_of(4) == "z"
    assert v.token_of(5) == "a"


def test_max_size_truncates() -> None:
    corpus = [[f"t{i:02d}"] * (i + 1) for i in range(10)]
    v = Vocabulary.build(corpus, min_count=1, max_size=7)
    assert len(v) == 7
    # the three most frequent survive
    assert v.id_of("t09") == 4
    assert v.id_of("t08") == 5
    assert v.id_of("t07") == 6
    assert v.id_of("t00") == UNK_ID


def test_build_is_deterministic() -> None:
    corpus = [["m", "n", "m"], ["n", "o"]]
    assert Vocabulary.build(corpus).to_list() == Vocabulary.build(corpus).to_list()


def test_special_surface_forms_are_escaped_not_collided() -> None:
    v = Vocabulary.build([["<pad>", "<pad>", "</s>", "</s>"]], min_count=1)
    tok_id = v.id_of("<pad>")
    assert tok_id >= 4
    assert v.token_of(tok_id) == "<pad>"
    assert v.token_of(PAD_ID) == "<pad>"  # the true special keeps its surface
    enc = encode(["<pad>", "</s>"], v, max_len=6)
    assert enc.ids[1] == tok_id
    assert decode(enc.ids, v) == ["<pad>", "</s>"]


def test_token_of_rejects_out_of_range() -> None:
    v = Vocabulary.build([])
    with pytest.raises(InvalidIdError):
        v.token_of(4)
    with pytest.raises(InvalidIdError):
        v.token_of(-1)


# --------------------------------------------------------------------- encode


def test_encode_empty_tokens() -> None:
    v = Vocabulary.build([])
    enc = encode([], v, max_len=4)
    assert enc.ids == [BOS_ID, EOS_ID, PAD_ID, PAD_ID]
    assert enc.mask == [1, 1, 0, 0]
    assert enc.length == 2


def test_encode_unknown_token_maps_to_unk() -> None:
    v = Vocabulary.build([])
    enc = encode(["mystery"], v, max_len=4)
    assert enc.ids[1] == UNK_ID


def test_encode_truncates_keeping_prefix_and_eos() -> None:
    corpus = [[f"w{i}" for i in range(10)]]
    v = Vocabulary.build(corpus, min_count=1)
    tokens = [f"w{i}" for i in range(10)]
    enc = encode(tokens, v, max_len=6)
    assert len(enc.ids) == 6
    assert enc.ids[0] == BOS_ID
    assert enc.ids[5] == EOS_ID
    assert decode(enc.ids, v) == tokens[:4]


def test_encode_rejects_tiny_max_len() -> None:
    with pytest.raises(ShapeError):
        encode([], Vocabulary.build([]), max_len=1)


def test_pad_exactly_where_mask_zero() -> None:
    v = Vocabulary.build([["a", "b", "a", "b"]], min_count=1)
    enc = encode(["a", "b"], v, max_len=8)
    for i, m in zip(enc.ids, enc.mask):
        assert (i == PAD_ID) == (m == 0)


# --------------------------------------------------------------------- decode


def test_decode_strips_specials() -> None:
    v = Vocabulary.build([["q", "q"]], min_count=1)
    assert decode([BOS_ID, 4, EOS_ID, PAD_ID], v) == ["q"]
    assert decode([], v) == []


def test_decode_rejects_out_of_range_id() -> None:
    v = Vocabulary.build([])
    with pytest.raises(InvalidIdError):
        decode([0, 99], v)


_token_alphabet = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd")), min_size=1, max_size=6
)


@given(st.lists(_token_alphabet, min_size=0, max_size=10))
@settings(max_examples=60, deadline=None)
def test_decode_encode_roundtrip_for_in_vocab_tokens(tokens: list[str]) -> None:
    v = Vocabulary.build([tokens], min_count=1, max_size=20000)
    enc = encode(tokens, v, max_len=len(tokens) + 2)
    assert decode(enc.ids, v) == tokens


# --------------------------------------------------------------- corpus files


def test_corpus_roundtrip(tmp_path) -> None:
    docs = [
        Document.from_text("a b c", labels={"E": 1, "A": 0, "C": 1, "N": 0, "O": 1}),
        Document.from_text("d e"),
        Document.from_text(
            "f", levels={"E": "low", "A": "medium", "C": "high", "N": "low", "O": "low"}
        ),
    ]
    path = tmp_path / "corpus.jsonl"
    write_corpus(path, docs)
    loaded = read_corpus(path)
    assert [d.raw_text for d in loaded] == ["a b c", "d e", "f"]
    assert loaded[0].labels == {"E": 1, "A": 0, "C": 1, "N": 0, "O": 1}
    assert loaded[1].labels is None
    assert loaded[2].levels["A"] == "medium"
    assert loaded[0].tokens == ["a", "b", "c"]


def test_corpus_write_is_byte_deterministic(tmp_path) -> None:
    docs = [Document.from_text("x y", labels={"E": 0, "A": 1, "C": 0, "N": 1, "O": 0})]
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_corpus(p1, docs)
    write_corpus(p2, docs)
    assert p1.read_bytes() == p2.read_bytes()


def test_malformed_line_reports_line_number(tmp_path) -> None:
    path = tmp_path / "bad.jsonl"
    path.write_text('{"text": "ok"}\nnot json\n', encoding="utf-8")
    with pytest.raises(ValidationError, match=":2:"):
        read_corpus(path)


def test_missing_text_field_rejected(tmp_path) -> None:
    path = tmp_path / "bad.jsonl"
    path.write_text('{"label": 1}\n', encoding="utf-8")
    with pytest.raises(ValidationError, match=":1:"):
        read_corpus(path)


def test_partial_labels_rejected(tmp_path) -> None:
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps({"text": "a", "labels": {"E": 1}}) + "\n", encoding="utf-8")
    with pytest.raises(ValidationError):
        read_corpus(path)


def test_unknown_fields_ignored(tmp_path) -> None:
    path = tmp_path / "ok.jsonl"
    path.write_text(json.dumps({"text": "a b", "meta": {"x": 1}}) + "\n", encoding="utf-8")
    docs = read_corpus(path)
    assert docs[0].tokens == ["a", "b"]


def test_encoded_text_length_check() -> None:
    with pytest.raises(ShapeError):
        EncodedText(ids=[0, 1], mask=[1])

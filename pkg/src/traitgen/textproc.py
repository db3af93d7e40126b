"""Tokenization, vocabulary construction, and id-sequence encoding.

Two tokenization modes cover the pre-segmented and raw-CJK cases:
``whitespace`` splits on Unicode whitespace, ``cjk_char`` emits each CJK
codepoint as its own token and keeps contiguous non-CJK runs together.
Word segmentation proper is out of scope; corpora are expected to arrive
pre-segmented or be processed character-level.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EncodingError, InvalidIdError, ShapeError, ValidationError
from .traits import check_label_map, check_level_map

PAD_ID, UNK_ID, BOS_ID, EOS_ID = 0, 1, 2, 3
SPECIAL_TOKENS = ("<pad>", "<unk>", "<s>", "</s>")

# Corpus tokens that collide with a special surface form (or start with the
# sentinel itself) are stored with this prefix so the token<->id map stays a
# bijection. Decode strips one leading sentinel.
_SENTINEL = "\x1f"

_CJK_RANGES = (
    (0x3400, 0x4DBF),    # CJK extension A
    (0x4E00, 0x9FFF),    # CJK unified ideographs
    (0xF900, 0xFAFF),    # CJK compatibility ideographs
    (0x20000, 0x2A6DF),  # CJK extension B
)


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


def tokenize(raw_text: str, mode: str = "whitespace") -> list[str]:
    """Split text into tokens; never produces empty tokens."""
    try:
        raw_text.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise EncodingError(f"text is not valid UTF-8: {exc}") from exc
    if mode == "whitespace":
        return raw_text.split()
    if mode == "cjk_char":
        tokens: list[str] = []
        run: list[str] = []
        for ch in raw_text:
            if ch.isspace():
                if run:
                    tokens.append("".join(run))
                    run = []
            elif _is_cjk(ch):
                if run:
                    tokens.append("".join(run))
                    run = []
                tokens.append(ch)
            else:
                run.append(ch)
        if run:
            tokens.append("".join(run))
        return tokens
    raise ValidationError(f"unknown tokenize mode {mode!r}")


def _escape(token: str) -> str:
    if token in SPECIAL_TOKENS or token.startswith(_SENTINEL):
        return _SENTINEL + token
    return token


def _unescape(stored: str) -> str:
    return stored[1:] if stored.startswith(_SENTINEL) else stored


class Vocabulary:
    """Bijection between tokens and ids with fixed special ids 0..3."""

    def __init__(self, stored_tokens: Sequence[str]):
        if list(stored_tokens[:4]) != list(SPECIAL_TOKENS):
            raise ValidationError("vocabulary must start with the four special tokens")
        self._id_to_token = list(stored_tokens)
        self._token_to_id = {t: i for i, t in enumerate(self._id_to_token)}
        if len(self._token_to_id) != len(self._id_to_token):
            raise ValidationError("vocabulary contains duplicate tokens")

    @classmethod
    def build(
        cls,
        corpus: Iterable[Sequence[str]],
        min_count: int = 2,
        max_size: int = 20000,
    ) -> "Vocabulary":
        """Count tokens across documents and keep the most frequent.

        Tokens with frequency >= ``min_count`` are ranked by (count desc,
        token asc), truncated to ``max_size - 4``, and placed after the
        specials. An empty corpus yields a specials-only vocabulary.
        """
        if max_size < 4:
            raise ValidationError(f"max_size must be at least 4, got {max_size}")
        counts: Counter[str] = Counter()
        for tokens in corpus:
            counts.update(_escape(t) for t in tokens)
        kept = sorted(
            (t for t, c in counts.items() if c >= min_count),
            key=lambda t: (-counts[t], t),
        )[: max_size - 4]
        return cls(list(SPECIAL_TOKENS) + kept)

    def __len__(self) -> int:
        return len(self._id_to_token)

    def __contains__(self, token: str) -> bool:
        return _escape(token) in self._token_to_id

    def id_of(self, token: str) -> int:
        return self._token_to_id.get(_escape(token), UNK_ID)

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._id_to_token):
            raise InvalidIdError(f"id {token_id} outside vocabulary of size {len(self)}")
        return _unescape(self._id_to_token[token_id])

    def to_list(self) -> list[str]:
        """Stored token list (specials first), suitable for checkpoints."""
        return list(self._id_to_token)

    def non_special_tokens(self) -> list[str]:
        return [_unescape(t) for t in self._id_to_token[4:]]


@dataclass
class EncodedText:
    """Fixed-length id sequence with a validity mask.

    ``ids[t]`` is PAD exactly where ``mask[t]`` is 0; the sequence starts
    with BOS and holds at most one EOS, after which everything is PAD.
    """

    ids: list[int]
    mask: list[int]

    def __post_init__(self) -> None:
        if len(self.ids) != len(self.mask):
            raise ShapeError("ids and mask lengths differ")

    @property
    def length(self) -> int:
        """Number of valid (non-pad) positions."""
        return sum(self.mask)


def encode(tokens: Sequence[str], vocab: Vocabulary, max_len: int) -> EncodedText:
    """BOS + token ids + EOS, truncated to ``max_len`` and padded.

    Truncation keeps the prefix and always leaves EOS as the final non-pad
    token. Out-of-vocabulary tokens map to UNK.
    """
    if max_len < 2:
        raise ShapeError(f"max_len must be at least 2, got {max_len}")
    body = [vocab.id_of(t) for t in tokens[: max_len - 2]]
    ids = [BOS_ID] + body + [EOS_ID]
    mask = [1] * len(ids)
    pad = max_len - len(ids)
    ids.extend([PAD_ID] * pad)
    mask.extend([0] * pad)
    return EncodedText(ids=ids, mask=mask)


def decode(ids: Sequence[int], vocab: Vocabulary) -> list[str]:
    """Map ids back to tokens, dropping PAD, BOS, and EOS."""
    out = []
    for i in ids:
        token = vocab.token_of(int(i))  # validates the id range
        if int(i) in (PAD_ID, BOS_ID, EOS_ID):
            continue
        out.append(token)
    return out


@dataclass
class Document:
    """One short text with optional trait labels and levels."""

    raw_text: str
    tokens: list[str]
    labels: dict[str, int] | None = None
    levels: dict[str, str] | None = None

    @classmethod
    def from_text(cls, raw_text: str, mode: str = "whitespace", **kw) -> "Document":
        return cls(raw_text=raw_text, tokens=tokenize(raw_text, mode), **kw)


def read_corpus(path: str | Path, mode: str = "whitespace") -> list[Document]:
    """Read a JSONL corpus: one {"text": ..., "labels"?, "levels"?} per line.

    Unknown fields are ignored; malformed lines are rejected with their
    line number.
    """
    docs: list[Document] = []
    try:
        raw_lines = Path(path).read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError as exc:
        raise EncodingError(f"{path}: not valid UTF-8: {exc}") from exc
    for lineno, line in enumerate(raw_lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
        if not isinstance(record, dict) or not isinstance(record.get("text"), str):
            raise ValidationError(f"{path}:{lineno}: record must be an object with a 'text' string")
        labels = record.get("labels")
        levels = record.get("levels")
        try:
            labels = check_label_map(labels) if labels is not None else None
            levels = check_level_map(levels) if levels is not None else None
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
        docs.append(Document.from_text(record["text"], mode=mode, labels=labels, levels=levels))
    return docs


def write_corpus(path: str | Path, docs: Iterable[Document]) -> None:
    """Write documents as JSONL; field order is fixed for reproducible bytes."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            record: dict = {"text": doc.raw_text}
            if doc.labels is not None:
                record["labels"] = {t: doc.labels[t] for t in sorted(doc.labels)}
            if doc.levels is not None:
                record["levels"] = {t: doc.levels[t] for t in sorted(doc.levels)}
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")

"""Bilingual <API sequence, description> corpora and vocabularies.

Corpus file format (UTF-8, one record per line, tab separated)::

    id <TAB> lang <TAB> api tokens (space joined) <TAB> description words (space joined)

``lang`` is ``SOURCE`` or ``TARGET``. Blank lines and lines starting with
``#`` are ignored.
"""
from __future__ import annotations

import enum
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CorpusError

PAD, UNK, BOS, EOS = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<unk>", "<s>", "</s>")


class Language(str, enum.Enum):
    SOURCE = "SOURCE"
    TARGET = "TARGET"

    @property
    def other(self) -> "Language":
        return Language.TARGET if self is Language.SOURCE else Language.SOURCE


class Modality(str, enum.Enum):
    API = "API"
    WORD = "WORD"


@dataclass(frozen=True)
class SnippetRecord:
    id: str
    language: Language
    api_sequence: tuple[str, ...]
    description: tuple[str, ...]
    provenance: str | None = None

    def __post_init__(self):
        if not self.api_sequence:
            raise CorpusError(f"record {self.id}: empty API sequence")
        if not self.description:
            raise CorpusError(f"record {self.id}: empty description")
        for tok in (*self.api_sequence, *self.description, self.id):
            if not tok or any(c.isspace() for c in tok):
                raise CorpusError(f"record {self.id}: invalid token {tok!r}")

    def to_line(self) -> str:
        return "\t".join(
            (self.id, self.language.value, " ".join(self.api_sequence), " ".join(self.description))
        )


class Vocabulary:
    """Bidirectional token/index map with the four reserved tokens at 0..3."""

    def __init__(self, modality: Modality, tokens: Sequence[str], max_size: int = 10000):
        self.modality = Modality(modality)
        self.max_size = max_size
        self.index_to_token: list[str] = list(RESERVED_TOKENS) + list(tokens)
        if len(self.index_to_token) > max_size:
            raise ValueError(f"vocabulary of {len(self.index_to_token)} exceeds max_size {max_size}")
        self.token_to_index = {tok: i for i, tok in enumerate(self.index_to_token)}
        if len(self.token_to_index) != len(self.index_to_token):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.index_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Vocabulary)
            and self.modality == other.modality
            and self.index_to_token == other.index_to_token
        )

    def index(self, token: str) -> int:
        return self.token_to_index.get(token, UNK)

    def to_dict(self) -> dict:
        return {
            "modality": self.modality.value,
            "max_size": self.max_size,
            "tokens": self.index_to_token[len(RESERVED_TOKENS):],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(Modality(d["modality"]), d["tokens"], d["max_size"])


def build_vocabulary(records: Sequence[SnippetRecord], modality: Modality, max_size: int = 10000) -> Vocabulary:
    """Rank tokens by descending frequency (ties lexicographic) and keep the
    top ``max_size - 4``."""
    if max_size < len(RESERVED_TOKENS) + 1:
        raise ValueError(f"max_size must be at least {len(RESERVED_TOKENS) + 1}, got {max_size}")
    if not records:
        raise ValueError("cannot build a vocabulary from no records")
    modality = Modality(modality)
    counts: Counter[str] = Counter()
    for rec in records:
        counts.update(rec.api_sequence if modality is Modality.API else rec.description)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    keep = [tok for tok, _ in ranked[: max_size - len(RESERVED_TOKENS)]]
    return Vocabulary(modality, keep, max_size)


def encode_sequence(tokens: Sequence[str], vocab: Vocabulary, max_len: int | None = None,
                    decoder: bool = False) -> tuple[list[int], list[bool]]:
    """Map tokens to indices, returning ``(indices, mask)``.

    Decoder-side sequences are wrapped in BOS ... EOS. When ``max_len`` is
    given the result is right-padded with PAD up to that length.
    """
    if not tokens:
        raise ValueError("cannot encode an empty token sequence")
    ids = [vocab.index(t) for t in tokens]
    if decoder:
        ids = [BOS, *ids, EOS]
    if max_len is not None:
        if len(ids) > max_len:
            raise ValueError(f"sequence of length {len(ids)} exceeds max_len {max_len}")
        mask = [True] * len(ids) + [False] * (max_len - len(ids))
        ids = ids + [PAD] * (max_len - len(ids))
    else:
        mask = [True] * len(ids)
    return ids, mask


def decode_sequence(ids: Iterable[int], vocab: Vocabulary) -> list[str]:
    """Inverse of :func:`encode_sequence`; PAD, BOS and EOS are dropped."""
    return [vocab.index_to_token[i] for i in ids if i not in (PAD, BOS, EOS)]


@dataclass(frozen=True)
class LoadReport:
    kept: dict[Language, int]
    dropped: dict[Language, int]
    duplicates_removed: int = 0

    @property
    def total(self) -> int:
        return sum(self.kept.values()) + sum(self.dropped.values()) + self.duplicates_removed

    def __str__(self) -> str:
        parts = [
            f"{lang.value}: kept={self.kept[lang]} dropped={self.dropped[lang]}" for lang in Language
        ]
        if self.duplicates_removed:
            parts.append(f"duplicates_removed={self.duplicates_removed}")
        return "; ".join(parts)


@dataclass(frozen=True)
class Corpus:
    records: tuple[SnippetRecord, ...]
    api_vocab: Vocabulary
    word_vocab: Vocabulary
    max_api_len: int = 30
    max_desc_len: int = 30
    report: LoadReport | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.records)

    def by_language(self, language: Language) -> list[SnippetRecord]:
        return [r for r in self.records if r.language is language]

    def count(self, language: Language) -> int:
        return sum(1 for r in self.records if r.language is language)

    def require_both_languages(self) -> None:
        for lang in Language:
            if self.count(lang) == 0:
                raise CorpusError(
                    f"corpus has no {lang.value} records; the joint objective needs both languages"
                )

    def get(self, record_id: str) -> SnippetRecord:
        try:
            return self._index[record_id]
        except AttributeError:
            object.__setattr__(self, "_index", {r.id: r for r in self.records})
            return self._index[record_id]


def build_corpus(records: Sequence[SnippetRecord], max_api_len: int = 30, max_desc_len: int = 30,
                 api_vocab_size: int = 10000, word_vocab_size: int = 10000,
                 dedup: bool = False) -> Corpus:
    """Apply the length caps, optionally deduplicate, and build vocabularies."""
    kept = []
    kept_n = {lang: 0 for lang in Language}
    dropped_n = {lang: 0 for lang in Language}
    seen = set()
    ids = set()
    n_dup = 0
    for rec in records:
        if rec.id in ids:
            raise CorpusError(f"duplicate record id {rec.id!r}")
        ids.add(rec.id)
        if len(rec.api_sequence) > max_api_len or len(rec.description) > max_desc_len:
            dropped_n[rec.language] += 1
            continue
        if dedup:
            key = (rec.language, rec.api_sequence, rec.description)
            if key in seen:
                n_dup += 1
                continue
            seen.add(key)
        kept.append(rec)
        kept_n[rec.language] += 1
    report = LoadReport(kept_n, dropped_n, n_dup)
    if kept:
        api_vocab = build_vocabulary(kept, Modality.API, api_vocab_size)
        word_vocab = build_vocabulary(kept, Modality.WORD, word_vocab_size)
    else:
        api_vocab = Vocabulary(Modality.API, [], api_vocab_size)
        word_vocab = Vocabulary(Modality.WORD, [], word_vocab_size)
    return Corpus(tuple(kept), api_vocab, word_vocab, max_api_len, max_desc_len, report)


def parse_corpus_line(line: str, lineno: int) -> SnippetRecord:
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) not in (4, 5):
        raise CorpusError(f"line {lineno}: expected 4 tab-separated fields, got {len(fields)}")
    rec_id, lang, api, desc = fields[:4]
    try:
        language = Language(lang.strip())
    except ValueError:
        raise CorpusError(f"line {lineno}: unknown language {lang!r}") from None
    try:
        return SnippetRecord(
            rec_id.strip(), language, tuple(api.split()), tuple(desc.split()),
            fields[4] if len(fields) == 5 else None,
        )
    except CorpusError as exc:
        raise CorpusError(f"line {lineno}: {exc}") from None


def read_records(path: str | Path) -> list[SnippetRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            records.append(parse_corpus_line(line, lineno))
    return records


def load_corpus(path: str | Path, max_api_len: int = 30, max_desc_len: int = 30,
                api_vocab_size: int = 10000, word_vocab_size: int = 10000,
                dedup: bool = False, require_both: bool = False) -> Corpus:
    """Read a corpus file, dropping records that exceed either length cap.

    Raises CorpusError when the file holds no records at all, and (with
    ``require_both``) when either language ends up empty after filtering.
    """
    records = read_records(path)
    if not records:
        raise CorpusError(f"corpus empty: {path}")
    corpus = build_corpus(records, max_api_len, max_desc_len, api_vocab_size, word_vocab_size, dedup)
    if require_both:
        corpus.require_both_languages()
    return corpus


def write_corpus(records: Iterable[SnippetRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_line() + "\n")


# Comment delimiters: Javadoc /** */, line comments, C# /// and XML doc tags.
_COMMENT_MARKERS = re.compile(r"/\*\*?|\*/|^\s*\*+|^\s*/{2,}|</?\s*[A-Za-z][^>]*>", re.MULTILINE)
_SENTENCE_END = re.compile(r"[.!?](?=\s|$)")
_BLOCK_TAG = re.compile(r"^\s*@\w+", re.MULTILINE)
_WORD = re.compile(r"[A-Za-z0-9]+")


def extract_summary(comment_text: str) -> list[str]:
    """Return the lowercased words of the first sentence of a doc comment."""
    if not comment_text or not comment_text.strip():
        raise ValueError("empty comment text")
    text = _COMMENT_MARKERS.sub(" ", comment_text)
    tag = _BLOCK_TAG.search(text)
    if tag:
        text = text[: tag.start()]
    end = _SENTENCE_END.search(text)
    if end:
        text = text[: end.start()]
    words = [w.lower() for w in _WORD.findall(text)]
    if not words:
        raise ValueError(f"no alphanumeric content in comment {comment_text!r}")
    return words


def pad_batch(seqs: Sequence[Sequence[int]], length: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Stack index lists into a PAD-filled (batch, length) array plus bool mask."""
    length = max(len(s) for s in seqs) if length is None else length
    ids = np.full((len(seqs), length), PAD, dtype=np.int64)
    mask = np.zeros((len(seqs), length), dtype=bool)
    for i, s in enumerate(seqs):
        if len(s) > length:
            raise ValueError(f"sequence of length {len(s)} exceeds pad length {length}")
        ids[i, : len(s)] = s
        mask[i, : len(s)] = True
    return ids, mask

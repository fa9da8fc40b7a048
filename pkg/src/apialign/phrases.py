"""Mine API mapping rules from aligned sequence pairs.

A rule maps a source phrase (contiguous API subsequence) to a target
phrase with probability ``count(s, t) / (count(s) + 1)``; rules above the
threshold are kept. Counting is per aligned pair: ``count(s)`` is the
number of pairs whose source side contains ``s`` and ``count(s, t)`` the
number whose source side contains ``s`` while the target side contains
``t``. There is no word alignment inside a pair.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, DataError

Tokens = tuple[str, ...]

BUCKETS = (("1", 1, 1), ("2-3", 2, 3), ("4-7", 4, 7), ("8+", 8, None))


@dataclass(frozen=True, order=True)
class MappingRule:
    source: Tokens
    target: Tokens
    cooccurrence_count: int
    source_count: int

    @property
    def probability(self) -> float:
        return translation_probability(self.cooccurrence_count, self.source_count)

    def to_line(self) -> str:
        return "\t".join((" ".join(self.source), " ".join(self.target), f"{self.probability:.6f}",
                          str(self.cooccurrence_count), str(self.source_count)))


@dataclass
class CountTables:
    pair_counts: Counter = field(default_factory=Counter)
    source_counts: Counter = field(default_factory=Counter)
    n_pairs: int = 0
    max_phrase_len: int = 8
    counting: str = "presence"

    def __add__(self, other: "CountTables") -> "CountTables":
        if (self.max_phrase_len, self.counting) != (other.max_phrase_len, other.counting):
            raise ValueError("cannot merge tables built with different settings")
        return CountTables(self.pair_counts + other.pair_counts, self.source_counts + other.source_counts,
                           self.n_pairs + other.n_pairs, self.max_phrase_len, self.counting)


def phrases(seq: Sequence[str], max_len: int) -> Counter:
    """Occurrence count of every contiguous subsequence up to ``max_len``."""
    out: Counter = Counter()
    n = len(seq)
    for i in range(n):
        for j in range(i + 1, min(n, i + max_len) + 1):
            out[tuple(seq[i:j])] += 1
    return out


def extract_phrase_pairs(aligned: Iterable[tuple[Sequence[str], Sequence[str]]], max_phrase_len: int = 8,
                         counting: str = "presence") -> CountTables:
    """Build co-occurrence tables from ``(source sequence, target sequence)`` pairs.

    ``counting="presence"`` counts a phrase once per pair. With
    ``"multiplicity"`` every occurrence of ``s`` in the source side counts,
    and each of those pairs with ``t`` when ``t`` is present on the target
    side, which keeps ``count(s, t) <= count(s)``.
    """
    if max_phrase_len < 1:
        raise ConfigError("max_phrase_len must be >= 1")
    if counting not in ("presence", "multiplicity"):
        raise ConfigError(f"unknown counting mode {counting!r}")
    tables = CountTables(max_phrase_len=max_phrase_len, counting=counting)
    for src, tgt in aligned:
        tables.n_pairs += 1
        if not src:
            continue
        sp = phrases(src, max_phrase_len)
        tp = phrases(tgt, max_phrase_len)
        for s, occ in sp.items():
            w = 1 if counting == "presence" else occ
            tables.source_counts[s] += w
            for t in tp:
                tables.pair_counts[(s, t)] += w
    if tables.n_pairs == 0:
        raise DataError("no aligned pairs to extract phrases from")
    return tables


def corpus_source_counts(sequences: Iterable[Sequence[str]], max_phrase_len: int = 8,
                         counting: str = "presence") -> Counter:
    """``count(s)`` over whole source sequences rather than aligned pairs."""
    out: Counter = Counter()
    for seq in sequences:
        for s, occ in phrases(seq, max_phrase_len).items():
            out[s] += 1 if counting == "presence" else occ
    return out


def translation_probability(count_st: int, count_s: int) -> float:
    if count_st < 0 or count_s < 0:
        raise ValueError("counts must be non-negative")
    if count_st > count_s:
        raise ValueError(f"count(s,t)={count_st} exceeds count(s)={count_s}")
    return count_st / (count_s + 1)


def mine_mappings(tables: CountTables, threshold: float = 0.5,
                  source_counts: Mapping[Tokens, int] | None = None) -> list[MappingRule]:
    """Rules with probability strictly above ``threshold``, sorted by
    descending probability, descending co-occurrence count, then source and
    target phrase."""
    if not 0.0 <= threshold < 1.0:
        raise ConfigError(f"threshold must be in [0, 1), got {threshold}")
    counts = tables.source_counts if source_counts is None else source_counts
    thr = Fraction(threshold)
    rules = []
    for (s, t), c_st in tables.pair_counts.items():
        c_s = counts.get(s, 0)
        translation_probability(c_st, c_s)  # validates c_st <= c_s
        # Exact rational comparison so p == threshold is reliably excluded.
        if Fraction(c_st, c_s + 1) > thr:
            rules.append(MappingRule(s, t, c_st, c_s))
    rules.sort(key=lambda r: (-Fraction(r.cooccurrence_count, r.source_count + 1),
                              -r.cooccurrence_count, r.source, r.target))
    return rules


def bucket_of(length: int) -> str:
    for name, lo, hi in BUCKETS:
        if length >= lo and (hi is None or length <= hi):
            return name
    raise ValueError(f"phrase length must be >= 1, got {length}")


def bucket_counts(rules: Iterable[MappingRule]) -> dict[str, int]:
    """Rule counts by source phrase length: 1, 2-3, 4-7, 8+."""
    out = {name: 0 for name, _, _ in BUCKETS}
    for r in rules:
        out[bucket_of(len(r.source))] += 1
    return out


def api_class(token: str) -> str:
    return token.split(".", 1)[0]


def one_to_one_mappings(rules: Iterable[MappingRule]) -> tuple[list[tuple[str, str, float]], list[tuple[str, str, float]]]:
    """Method-level (length-1 to length-1) rules and their class-level
    projection keeping each source class's most probable target class."""
    method = [(r.source[0], r.target[0], r.probability) for r in rules
              if len(r.source) == 1 and len(r.target) == 1]
    best: dict[str, tuple[str, float]] = {}
    for s, t, p in method:
        sc, tc = api_class(s), api_class(t)
        cur = best.get(sc)
        if cur is None or p > cur[1] or (p == cur[1] and tc < cur[0]):
            best[sc] = (tc, p)
    classes = [(sc, tc, p) for sc, (tc, p) in sorted(best.items())]
    return method, classes


def best_translations(rules: Iterable[MappingRule]) -> dict[Tokens, MappingRule]:
    """Per source phrase, the retained rule with the longest target phrase
    (ties: higher probability, higher count, lexicographic target)."""
    best: dict[Tokens, MappingRule] = {}
    for r in rules:
        cur = best.get(r.source)
        key = (len(r.target), Fraction(r.cooccurrence_count, r.source_count + 1), r.cooccurrence_count)
        if cur is None:
            best[r.source] = r
            continue
        ckey = (len(cur.target), Fraction(cur.cooccurrence_count, cur.source_count + 1), cur.cooccurrence_count)
        if key > ckey or (key == ckey and r.target < cur.target):
            best[r.source] = r
    return best


def migrate_sequence(seq: Sequence[str], table: Mapping[Tokens, MappingRule], max_phrase_len: int = 8) -> list[str]:
    """Translate by greedy longest source-phrase lookup, left to right.
    Tokens no rule covers are dropped."""
    out: list[str] = []
    i = 0
    while i < len(seq):
        for j in range(min(len(seq), i + max_phrase_len), i, -1):
            rule = table.get(tuple(seq[i:j]))
            if rule is not None:
                out.extend(rule.target)
                i = j
                break
        else:
            i += 1
    return out


def write_rules(rules: Iterable[MappingRule], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in rules:
            fh.write(r.to_line() + "\n")


def read_rules(path: str | Path) -> list[MappingRule]:
    rules = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            f = line.rstrip("\n").split("\t")
            if len(f) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 fields, got {len(f)}")
            try:
                rules.append(MappingRule(tuple(f[0].split()), tuple(f[1].split()), int(f[3]), int(f[4])))
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad counts") from None
    return rules

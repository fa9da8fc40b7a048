"""Scoring of mined mappings, migrations and alignments, plus the
description-matching TF-IDF baseline."""
from __future__ import annotations

import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .alignment import DIRECTIONS, AlignedPair, EmbeddingIndex
from .corpus import Corpus, Language
from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

GRANULARITIES = ("method", "class")
COST_MODELS = ("levenshtein", "indel")

EXACT_MATCH_NOTE = ("correctness is exact match against synthetic ground truth "
                    "(stands in for manual judgment)")

STOP_WORDS = frozenset("""
a an and are as at be by for from has have in into is it its of on or that the this to was
were will with which when given returns return if
""".split())


@dataclass(frozen=True)
class MappingSet:
    """Set of ``(source, target)`` API mappings at one granularity.

    ``packages`` labels source tokens for per-package breakdowns.
    """
    pairs: frozenset
    granularity: str = "method"
    packages: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.granularity not in GRANULARITIES:
            raise ConfigError(f"granularity must be one of {GRANULARITIES}")
        object.__setattr__(self, "pairs", frozenset((str(s), str(t)) for s, t in self.pairs))

    @classmethod
    def from_triples(cls, rows: Iterable[tuple], granularity: str = "method") -> "MappingSet":
        """Rows of ``(source, target)`` or ``(source, target, package)``."""
        pairs, pk = set(), {}
        for row in rows:
            pairs.add((row[0], row[1]))
            if len(row) > 2 and row[2]:
                pk[row[0]] = row[2]
        return cls(frozenset(pairs), granularity, pk)

    def to_class(self) -> "MappingSet":
        pk = {}
        for s, p in self.packages.items():
            pk.setdefault(_cls(s), p)
        return MappingSet(frozenset((_cls(s), _cls(t)) for s, t in self.pairs), "class", pk)

    def __len__(self) -> int:
        return len(self.pairs)


GroundTruthSet = MappingSet


def _cls(token: str) -> str:
    return token.split(".", 1)[0]


@dataclass(frozen=True)
class ScoreRow:
    label: str
    true_positives: int
    false_positives: int
    false_negatives: int

    @property
    def precision_exact(self) -> Fraction:
        d = self.true_positives + self.false_positives
        return Fraction(self.true_positives, d) if d else Fraction(0)

    @property
    def recall_exact(self) -> Fraction:
        d = self.true_positives + self.false_negatives
        return Fraction(self.true_positives, d) if d else Fraction(0)

    @property
    def f_exact(self) -> Fraction:
        p, r = self.precision_exact, self.recall_exact
        return 2 * p * r / (p + r) if p + r else Fraction(0)

    @property
    def precision(self) -> float:
        return float(self.precision_exact)

    @property
    def recall(self) -> float:
        return float(self.recall_exact)

    @property
    def f_score(self) -> float:
        return float(self.f_exact)


@dataclass(frozen=True)
class EvalReport:
    granularity: str
    overall: ScoreRow
    packages: tuple[ScoreRow, ...] = ()

    def __getattr__(self, name):
        # expose overall counts and ratios directly (report.precision, ...)
        if name in ("true_positives", "false_positives", "false_negatives", "precision", "recall", "f_score"):
            return getattr(self.overall, name)
        raise AttributeError(name)

    @property
    def rows(self) -> tuple[ScoreRow, ...]:
        return self.packages + (self.overall,)


def _row(label: str, mined: set, truth: set) -> ScoreRow:
    return ScoreRow(label, len(mined & truth), len(mined - truth), len(truth - mined))


def score_mappings(mined: MappingSet, truth: MappingSet) -> EvalReport:
    """Precision, recall and F by exact set comparison.

    When ``truth`` carries package labels each package gets a row scored on
    the mined pairs whose source token the package's truth covers.
    Undefined ratios are reported as 0.
    """
    if mined.granularity != truth.granularity:
        raise ConfigError(f"granularity mismatch: {mined.granularity} vs {truth.granularity}")
    if not truth.pairs:
        raise DataError("ground truth set is empty")
    rows = []
    by_pkg: dict[str, set] = {}
    for s, t in truth.pairs:
        if s in truth.packages:
            by_pkg.setdefault(truth.packages[s], set()).add((s, t))
    for pkg in sorted(by_pkg):
        tp = by_pkg[pkg]
        sources = {s for s, _ in tp}
        mp = {(s, t) for s, t in mined.pairs if s in sources}
        rows.append(_row(pkg, mp, tp))
    return EvalReport(truth.granularity, _row("all", set(mined.pairs), set(truth.pairs)), tuple(rows))


def levenshtein(a: Sequence, b: Sequence, cost_model: str = "levenshtein") -> int:
    """Token edit distance. ``levenshtein`` charges 1 for a substitution,
    ``indel`` allows only deletions and insertions."""
    if cost_model not in COST_MODELS:
        raise ConfigError(f"cost_model must be one of {COST_MODELS}")
    sub = 1 if cost_model == "levenshtein" else 2
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (0 if x == y else sub))
        prev = cur
    return prev[-1]


def edit_distance_ratio(results: Iterable[tuple[Sequence, Sequence]], cost_model: str = "levenshtein") -> float:
    """Summed edit distance over summed truth length for ``(result, truth)`` pairs."""
    dist = length = 0
    n = 0
    for result, truth in results:
        if not truth:
            raise DataError("truth sequence is empty")
        dist += levenshtein(result, truth, cost_model)
        length += len(truth)
        n += 1
    if n == 0:
        raise DataError("no results to score")
    return dist / length


def correctness(results: Sequence[tuple[Sequence, Sequence]], judgments: Sequence[bool] | None = None) -> float:
    """Fraction judged correct; exact equality with truth when no judgments are given."""
    if not results:
        raise DataError("no results to score")
    if judgments:
        if len(judgments) != len(results):
            raise DataError(f"{len(judgments)} judgments for {len(results)} results")
        ok = sum(bool(j) for j in judgments)
    else:
        ok = sum(list(r) == list(t) for r, t in results)
    return ok / len(results)


# -- IR baseline -------------------------------------------------------------

_SIBILANTS = ("s", "x", "z", "ch", "sh")


def light_stem(word: str) -> str:
    """Strip one common English suffix, keeping at least three letters."""
    for suf in ("ing", "ed"):
        if word.endswith(suf) and len(word) - len(suf) >= 3:
            return word[: -len(suf)]
    if word.endswith("es") and word[:-2].endswith(_SIBILANTS) and len(word) >= 5:
        return word[:-2]
    if word.endswith("s") and not word.endswith("ss") and len(word) >= 4:
        return word[:-1]
    return word


def _terms(desc: Sequence[str], stem: bool, stop_words: frozenset | None) -> list[str]:
    out = []
    for w in desc:
        w = w.lower()
        if stop_words is not None and w in stop_words:
            continue
        out.append(light_stem(w) if stem else w)
    return out


@dataclass
class TfidfModel:
    vocabulary: dict[str, int]
    idf: np.ndarray
    n_documents: int

    def vector(self, terms: Sequence[str]) -> np.ndarray:
        v = np.zeros(len(self.vocabulary))
        for w, c in Counter(terms).items():
            j = self.vocabulary.get(w)
            if j is not None:
                v[j] = c * self.idf[j]
        return v


def fit_tfidf(documents: Sequence[Sequence[str]]) -> TfidfModel:
    """tf * log((N + 1) / (df + 1)); a term in every document weighs zero."""
    df: Counter = Counter()
    for doc in documents:
        df.update(set(doc))
    vocab = {w: i for i, w in enumerate(sorted(df))}
    n = len(documents)
    idf = np.array([math.log((n + 1) / (df[w] + 1)) for w in sorted(df)])
    return TfidfModel(vocab, idf, n)


def tfidf_cosine(a: Sequence[str], b: Sequence[str], model: TfidfModel) -> float:
    va, vb = model.vector(a), model.vector(b)
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0 or nb == 0:
        return 0.0
    return float(min(1.0, va @ vb / (na * nb)))


@dataclass
class IrAlignment:
    pairs: list[AlignedPair]
    skipped: list[str]

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)


def _ir_search(q_ids, q_vecs, c_ids, c_vecs, direction) -> list[AlignedPair]:
    index = EmbeddingIndex(c_ids, c_vecs)
    out = []
    for qid, v in zip(q_ids, q_vecs):
        row, score = index.nearest(v)
        score = max(score, 0.0)
        cid = c_ids[row]
        s, t = (qid, cid) if direction == "s2t" else (cid, qid)
        out.append(AlignedPair(s, t, score, direction, low_confidence=score == 0.0))
    return out


def ir_baseline_align(corpus: Corpus, direction: str = "s2t", stem: bool = False,
                      stop_words: bool | Iterable[str] = False) -> IrAlignment:
    """Align records by TF-IDF cosine of their descriptions.

    Documents are every description in the corpus. A record whose vector
    is empty (all terms filtered or zero-weight) is skipped and listed in
    ``skipped``. When nothing overlaps the score is 0, the smallest id is
    chosen and the pair is flagged low confidence.
    """
    if direction not in DIRECTIONS:
        raise ConfigError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    corpus.require_both_languages()
    stops = None
    if stop_words is True:
        stops = STOP_WORDS
    elif stop_words:
        stops = frozenset(stop_words)
    terms = {r.id: _terms(r.description, stem, stops) for r in corpus.records}
    model = fit_tfidf(list(terms.values()))
    side: dict[Language, tuple[list[str], list[np.ndarray]]] = {}
    skipped = []
    for lang in Language:
        ids, vecs = [], []
        for r in corpus.by_language(lang):
            v = model.vector(terms[r.id])
            if not np.any(v):
                skipped.append(r.id)
                continue
            ids.append(r.id)
            vecs.append(v)
        if not ids:
            raise DataError(f"no {lang.value} record has a usable description")
        side[lang] = (ids, vecs)
    if skipped:
        log.warning("IR baseline skipped %d records with empty descriptions", len(skipped))
    src_ids, src_vecs = side[Language.SOURCE]
    tgt_ids, tgt_vecs = side[Language.TARGET]
    pairs = []
    if direction in ("s2t", "both"):
        pairs += _ir_search(src_ids, src_vecs, tgt_ids, np.stack(tgt_vecs), "s2t")
    if direction in ("t2s", "both"):
        pairs += _ir_search(tgt_ids, tgt_vecs, src_ids, np.stack(src_vecs), "t2s")
    return IrAlignment(pairs, skipped)


# -- files and reports -------------------------------------------------------

def read_ground_truth(path: str | Path, granularity: str = "method") -> MappingSet:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            f = line.rstrip("\n").split("\t")
            if len(f) not in (2, 3) or not all(f):
                raise DataError(f"{path}:{lineno}: expected source<TAB>target[<TAB>package]")
            rows.append(tuple(f))
    if not rows:
        raise DataError(f"{path}: ground truth is empty")
    return MappingSet.from_triples(rows, granularity)


def write_ground_truth(truth: Iterable[tuple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in truth:
            fh.write("\t".join(x for x in row if x) + "\n")


def read_concept_truth(path: str | Path) -> dict[str, str]:
    """``record_id TAB concept_id`` lines."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            f = line.rstrip("\n").split("\t")
            if len(f) != 2:
                raise DataError(f"{path}:{lineno}: expected record_id<TAB>concept_id")
            out[f[0]] = f[1]
    return out


def write_concept_truth(truth: Mapping[str, str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rid in sorted(truth):
            fh.write(f"{rid}\t{truth[rid]}\n")


def _pct(x: float | None) -> str:
    return "   n/a" if x is None else f"{100 * x:6.1f}"


def format_score_table(method: EvalReport, klass: EvalReport | None = None) -> list[str]:
    """Per-package P/R/F rows, class level beside method level."""
    head = f"{'package':<16} {'class P':>7} {'R':>6} {'F':>6} | {'method P':>8} {'R':>6} {'F':>6}"
    lines = [head, "-" * len(head)]
    crows = {r.label: r for r in klass.rows} if klass else {}
    for row in method.rows:
        c = crows.get(row.label)
        cp = " ".join((_pct(c.precision), _pct(c.recall), _pct(c.f_score))) if c else " ".join([_pct(None)] * 3)
        lines.append(f"{row.label:<16} {cp:>21} | {_pct(row.precision):>8} {_pct(row.recall)} {_pct(row.f_score)}")
    return lines


def render_report(sections: Sequence[tuple[str, list[str]]], values: Mapping[str, object],
                  timestamp: str | None = None) -> str:
    """Human-readable sections followed by sorted ``key=value`` lines."""
    out = ["# api mapping report", f"# {EXACT_MATCH_NOTE}"]
    if timestamp is not None:
        out.append(f"# generated {timestamp}")
    for title, lines in sections:
        out += ["", f"[{title}]"] + list(lines)
    out += ["", "[values]"]
    for k in sorted(values):
        v = values[k]
        out.append(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}")
    return "\n".join(out) + "\n"

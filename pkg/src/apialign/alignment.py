"""Exact nearest-neighbour alignment of semantic vectors by cosine similarity."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Language
from .errors import ConfigError, DataError

DIRECTIONS = ("s2t", "t2s", "both")


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    return float(min(1.0, max(-1.0, np.dot(a, b) / (na * nb))))


class EmbeddingIndex:
    """Brute-force exact cosine index over the vectors of one language.

    Bit-identical vectors are stored once and resolve to their smallest
    record id, so exact ties never depend on BLAS blocking.
    """

    def __init__(self, ids: Sequence[str], vectors, language: Language | None = None):
        mat = np.asarray(vectors, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] != len(ids):
            raise ValueError("vectors must be a (n, d) matrix with one row per id")
        if len(ids) == 0:
            raise DataError("cannot build an empty embedding index")
        if len(set(ids)) != len(ids):
            raise DataError("duplicate record ids in embedding index")
        self.ids = list(ids)
        self.vectors = mat
        self.norms = np.linalg.norm(mat, axis=1)
        if np.any(self.norms == 0):
            bad = self.ids[int(np.flatnonzero(self.norms == 0)[0])]
            raise DataError(f"zero-norm vector for record {bad}")
        if not np.all(np.isfinite(mat)):
            raise DataError("non-finite values in embedding vectors")
        self.language = language
        uniq, inverse = np.unique(mat, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        rep = {}
        for row, u in enumerate(inverse):
            if u not in rep or self.ids[row] < self.ids[rep[u]]:
                rep[u] = row
        self._rep = np.array([rep[u] for u in range(len(uniq))])
        self._unit = uniq / np.linalg.norm(uniq, axis=1, keepdims=True)

    @classmethod
    def from_vectors(cls, vectors: Iterable) -> "EmbeddingIndex":
        vectors = list(vectors)
        langs = {v.language for v in vectors}
        if len(langs) > 1:
            raise DataError("an embedding index holds vectors of a single language")
        return cls([v.record_id for v in vectors], np.stack([v.values for v in vectors]) if vectors else np.zeros((0, 0)),
                   langs.pop() if langs else None)

    def __len__(self) -> int:
        return len(self.ids)

    def scores(self, query) -> np.ndarray:
        """Cosine of ``query`` against every stored vector."""
        q = np.asarray(query, dtype=np.float64)
        nq = np.linalg.norm(q)
        if nq == 0:
            raise ValueError("zero query vector")
        return np.clip(self.vectors @ q / (self.norms * nq), -1.0, 1.0)

    def nearest(self, query) -> tuple[int, float]:
        """Row of the most similar stored vector; ties go to the smaller id."""
        q = np.asarray(query, dtype=np.float64)
        nq = np.linalg.norm(q)
        if nq == 0:
            raise ValueError("zero query vector")
        sims = self._unit @ (q / nq)
        best = sims.max()
        tied = np.flatnonzero(sims == best)
        rows = self._rep[tied]
        row = min(rows, key=lambda r: self.ids[r])
        return int(row), float(min(1.0, max(-1.0, best)))


@dataclass(frozen=True)
class AlignedPair:
    source_id: str
    target_id: str
    score: float
    direction: str = "s2t"
    low_confidence: bool = False

    @property
    def query_id(self) -> str:
        return self.source_id if self.direction == "s2t" else self.target_id


def _search(query: EmbeddingIndex, index: EmbeddingIndex) -> list[tuple[str, str, float]]:
    out = []
    for i, qid in enumerate(query.ids):
        row, score = index.nearest(query.vectors[i])
        out.append((qid, index.ids[row], score))
    return out


def align(source_index: EmbeddingIndex, target_index: EmbeddingIndex, direction: str = "s2t",
          mutual: bool = False, min_score: float | None = None) -> list[AlignedPair]:
    """Pair every query vector with its most similar vector on the other side.

    ``direction`` is ``s2t`` (each source gets a target), ``t2s`` or
    ``both``. With ``mutual`` only pairs that are each other's nearest
    neighbour survive; they are reported once, in the s2t direction.
    Pairs scoring below ``min_score`` are dropped. Output follows query
    order.
    """
    if direction not in DIRECTIONS:
        raise ConfigError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if len(source_index) == 0 or len(target_index) == 0:
        raise DataError("alignment needs non-empty source and target indices")
    s2t = t2s = None
    if direction in ("s2t", "both") or mutual:
        s2t = _search(source_index, target_index)
    if direction in ("t2s", "both") or mutual:
        t2s = _search(target_index, source_index)
    pairs: list[AlignedPair] = []
    if mutual:
        back = {tid: sid for tid, sid, _ in t2s}
        pairs = [AlignedPair(sid, tid, sc, "s2t") for sid, tid, sc in s2t if back.get(tid) == sid]
    else:
        if s2t is not None and direction in ("s2t", "both"):
            pairs += [AlignedPair(sid, tid, sc, "s2t") for sid, tid, sc in s2t]
        if t2s is not None and direction in ("t2s", "both"):
            pairs += [AlignedPair(sid, tid, sc, "t2s") for tid, sid, sc in t2s]
    if min_score is not None:
        pairs = [p for p in pairs if p.score >= min_score]
    return pairs


def align_vectors(vectors: Sequence, **options) -> list[AlignedPair]:
    """Split semantic vectors by language and align them."""
    src = [v for v in vectors if v.language is Language.SOURCE]
    tgt = [v for v in vectors if v.language is Language.TARGET]
    if not src or not tgt:
        raise DataError("alignment needs vectors from both languages")
    return align(EmbeddingIndex.from_vectors(src), EmbeddingIndex.from_vectors(tgt), **options)


@dataclass(frozen=True)
class AccuracyReport:
    source_accuracy: float | None
    target_accuracy: float | None
    n_source: int
    n_target: int

    @property
    def mean(self) -> float | None:
        vals = [v for v in (self.source_accuracy, self.target_accuracy) if v is not None]
        return sum(vals) / len(vals) if vals else None

    def as_tuple(self) -> tuple:
        return self.source_accuracy, self.target_accuracy, self.mean


def alignment_accuracy(pairs: Sequence[AlignedPair], ground_truth: Mapping[str, str]) -> AccuracyReport:
    """Fraction of pairs whose two records share a concept, per direction."""
    correct = {"s2t": 0, "t2s": 0}
    total = {"s2t": 0, "t2s": 0}
    for p in pairs:
        for rid in (p.source_id, p.target_id):
            if rid not in ground_truth:
                raise DataError(f"no ground-truth concept for record {rid}")
        total[p.direction] += 1
        correct[p.direction] += ground_truth[p.source_id] == ground_truth[p.target_id]

    def ratio(d):
        return correct[d] / total[d] if total[d] else None
    return AccuracyReport(ratio("s2t"), ratio("t2s"), total["s2t"], total["t2s"])


def write_pairs(pairs: Iterable[AlignedPair], path: str | Path) -> None:
    """``source_id TAB target_id TAB score``; t2s pairs carry a fourth
    ``t2s`` column."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in pairs:
            line = f"{p.source_id}\t{p.target_id}\t{p.score:.6f}"
            if p.direction != "s2t":
                line += f"\t{p.direction}"
            fh.write(line + "\n")


def read_pairs(path: str | Path) -> list[AlignedPair]:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            f = line.rstrip("\n").split("\t")
            if len(f) not in (3, 4):
                raise DataError(f"{path}:{lineno}: expected 3 or 4 fields")
            try:
                score = float(f[2])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad score {f[2]!r}") from None
            if not math.isfinite(score):
                raise DataError(f"{path}:{lineno}: non-finite score")
            direction = f[3] if len(f) == 4 else "s2t"
            if direction not in ("s2t", "t2s"):
                raise DataError(f"{path}:{lineno}: bad direction {direction!r}")
            pairs.append(AlignedPair(f[0], f[1], score, direction))
    return pairs

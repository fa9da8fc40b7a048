"""Joint sequence-to-sequence model over API sequences of two languages.

A bidirectional recurrent encoder turns an API sequence into a semantic
vector (final forward state concatenated with final backward state of the
top layer). A recurrent decoder, initialised from and conditioned on that
vector at every step, predicts the description words under teacher
forcing. Training minimises the mean description negative log-likelihood
over source pairs plus the same mean over target pairs.
"""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .corpus import PAD, Corpus, Language, SnippetRecord, Vocabulary, encode_sequence, pad_batch
from .errors import ConfigError, CorpusError, NumericError
from .neural import (
    DTYPE, ParamStore, Tape, Var, adadelta_update, clip_by_global_norm, collect_grads, gru_shapes,
    init_params, tanh_shapes,
)


@dataclass
class ModelConfig:
    api_vocab_size: int = 10000
    word_vocab_size: int = 10000
    embedding_dim: int = 64
    hidden_units: int = 64
    num_layers: int = 1
    max_api_len: int = 30
    max_desc_len: int = 30
    batch_size: int = 20
    seed: int = 0
    cell: str = "gru"
    separate_encoders: bool = False
    rho: float = 0.95
    epsilon: float = 1e-6
    clip_norm: float = 5.0
    early_stop_patience: int = 3
    early_stop_tol: float = 1e-4

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("api_vocab_size", "word_vocab_size", "embedding_dim", "hidden_units",
                     "num_layers", "max_api_len", "max_desc_len", "batch_size"):
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.batch_size % 2:
            raise ConfigError(f"batch_size must be even (half per language), got {self.batch_size}")
        if self.cell not in ("gru", "tanh"):
            raise ConfigError(f"cell must be 'gru' or 'tanh', got {self.cell!r}")
        if not 0 < self.rho < 1 or self.epsilon <= 0:
            raise ConfigError("adadelta rho must be in (0, 1) and epsilon positive")

    @classmethod
    def full_scale(cls, **overrides) -> "ModelConfig":
        base = dict(embedding_dim=1000, hidden_units=1000, num_layers=2, batch_size=200)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class SemanticVector:
    values: np.ndarray
    record_id: str
    language: Language


def _cell_shapes(cell: str, input_dim: int, hidden: int) -> dict:
    return gru_shapes(input_dim, hidden) if cell == "gru" else tanh_shapes(input_dim, hidden)


def _encoder_prefixes(config: ModelConfig) -> dict[Language, str]:
    if config.separate_encoders:
        return {Language.SOURCE: "enc_src", Language.TARGET: "enc_tgt"}
    return {Language.SOURCE: "enc", Language.TARGET: "enc"}


def param_shapes(config: ModelConfig, n_api: int, n_word: int) -> dict[str, tuple[int, ...]]:
    E, H, L = config.embedding_dim, config.hidden_units, config.num_layers
    shapes: dict[str, tuple[int, ...]] = {"api_emb": (n_api, E), "word_emb": (n_word, E)}
    for prefix in sorted(set(_encoder_prefixes(config).values())):
        for layer in range(L):
            in_dim = E if layer == 0 else 2 * H
            for direction in ("fwd", "bwd"):
                for k, s in _cell_shapes(config.cell, in_dim, H).items():
                    shapes[f"{prefix}.l{layer}.{direction}.{k}"] = s
    for layer in range(L):
        shapes[f"dec.init.l{layer}.W"] = (2 * H, H)
        shapes[f"dec.init.l{layer}.b"] = (H,)
        in_dim = E + 2 * H if layer == 0 else H
        for k, s in _cell_shapes(config.cell, in_dim, H).items():
            shapes[f"dec.l{layer}.{k}"] = s
    shapes["dec.out.W"] = (H, n_word)
    shapes["dec.out.b"] = (n_word,)
    return shapes


@dataclass
class JointModel:
    config: ModelConfig
    api_vocab: Vocabulary
    word_vocab: Vocabulary
    store: ParamStore
    epochs_trained: int = 0
    history: list = field(default_factory=list)

    @classmethod
    def create(cls, config: ModelConfig, api_vocab: Vocabulary, word_vocab: Vocabulary) -> "JointModel":
        shapes = param_shapes(config, len(api_vocab), len(word_vocab))
        return cls(config, api_vocab, word_vocab, init_params(shapes, config.seed))

    @property
    def vector_dim(self) -> int:
        return 2 * self.config.hidden_units


@dataclass
class EncodedGroup:
    """Padded index arrays for records of one language."""

    language: Language
    api_ids: np.ndarray
    api_mask: np.ndarray
    dec_in: np.ndarray
    dec_tgt: np.ndarray
    dec_mask: np.ndarray
    record_ids: tuple[str, ...] = ()

    def __len__(self) -> int:
        return self.api_ids.shape[0]

    @property
    def n_tokens(self) -> int:
        return int(self.dec_mask.sum())


def encode_group(records: Sequence[SnippetRecord], api_vocab: Vocabulary, word_vocab: Vocabulary,
                 api_len: int | None = None, dec_steps: int | None = None) -> EncodedGroup:
    """``api_len`` and ``dec_steps`` force the padded widths; by default the
    group is padded to its own longest sequence."""
    langs = {r.language for r in records}
    if len(langs) != 1:
        raise ValueError("a group must hold records of exactly one language")
    api = [encode_sequence(r.api_sequence, api_vocab)[0] for r in records]
    dec = [encode_sequence(r.description, word_vocab, decoder=True)[0] for r in records]
    api_ids, api_mask = pad_batch(api, api_len)
    dec_ids, _ = pad_batch(dec, None if dec_steps is None else dec_steps + 1)
    dec_in = dec_ids[:, :-1]
    dec_tgt = dec_ids[:, 1:]
    return EncodedGroup(langs.pop(), api_ids, api_mask, dec_in, dec_tgt, dec_tgt != PAD,
                        tuple(r.id for r in records))


@dataclass
class Batch:
    groups: dict[Language, EncodedGroup]

    @classmethod
    def from_records(cls, records: Sequence[SnippetRecord], api_vocab, word_vocab, **pad) -> "Batch":
        groups = {}
        for lang in Language:
            recs = [r for r in records if r.language is lang]
            if recs:
                groups[lang] = encode_group(recs, api_vocab, word_vocab, **pad)
        return cls(groups)

    def n_tokens(self) -> int:
        return sum(g.n_tokens for g in self.groups.values())


def _cell(tape: Tape, cell: str, p, x: Var, h: Var) -> Var:
    return tape.gru(p, x, h) if cell == "gru" else tape.tanh_cell(p, x, h)


def _group_params(leaves: dict[str, Var], prefix: str) -> dict[str, Var]:
    n = len(prefix) + 1
    return {k[n:]: v for k, v in leaves.items() if k.startswith(prefix + ".")}


def _active_len(mask: np.ndarray) -> int:
    cols = np.flatnonzero(mask.any(axis=0))
    return int(cols[-1]) + 1 if cols.size else 0


def encode_graph(tape: Tape, model: JointModel, leaves: dict[str, Var], api_ids: np.ndarray,
                 api_mask: np.ndarray, language: Language) -> Var:
    cfg = model.config
    B = api_ids.shape[0]
    T = _active_len(api_mask)
    if T == 0 or not api_mask[:, 0].all():
        raise ValueError("every sequence needs at least one real (non-PAD) token")
    prefix = _encoder_prefixes(cfg)[language]
    emb = leaves["api_emb"]
    xs = [tape.take(emb, api_ids[:, t]) for t in range(T)]
    zeros = np.zeros((B, cfg.hidden_units), dtype=DTYPE)
    for layer in range(cfg.num_layers):
        pf = _group_params(leaves, f"{prefix}.l{layer}.fwd")
        pb = _group_params(leaves, f"{prefix}.l{layer}.bwd")
        h = tape.leaf(zeros)
        fwd = []
        for t in range(T):
            h = tape.where(api_mask[:, t], _cell(tape, cfg.cell, pf, xs[t], h), h)
            fwd.append(h)
        h_f = h
        h = tape.leaf(zeros)
        bwd: list = [None] * T
        for t in reversed(range(T)):
            h = tape.where(api_mask[:, t], _cell(tape, cfg.cell, pb, xs[t], h), h)
            bwd[t] = h
        h_b = h
        if layer + 1 < cfg.num_layers:
            xs = [tape.concat([fwd[t], bwd[t]]) for t in range(T)]
    return tape.concat([h_f, h_b])


def decode_nll_graph(tape: Tape, model: JointModel, leaves: dict[str, Var], vec: Var,
                     group: EncodedGroup) -> Var:
    """Summed teacher-forced NLL of the group's descriptions."""
    cfg = model.config
    states = [
        tape.tanh(tape.linear(vec, leaves[f"dec.init.l{l}.W"], leaves[f"dec.init.l{l}.b"]))
        for l in range(cfg.num_layers)
    ]
    layer_params = [_group_params(leaves, f"dec.l{l}") for l in range(cfg.num_layers)]
    total = tape.leaf(0.0)
    for t in range(_active_len(group.dec_mask)):
        inp = tape.concat([tape.take(leaves["word_emb"], group.dec_in[:, t]), vec])
        for l in range(cfg.num_layers):
            states[l] = _cell(tape, cfg.cell, layer_params[l], inp, states[l])
            inp = states[l]
        logits = tape.linear(inp, leaves["dec.out.W"], leaves["dec.out.b"])
        total = tape.add(total, tape.masked_xent(logits, group.dec_tgt[:, t], group.dec_mask[:, t]))
    return total


def loss_graph(tape: Tape, model: JointModel, leaves: dict[str, Var], batch: Batch) -> tuple[Var, dict]:
    parts = {}
    loss = None
    for lang in Language:
        group = batch.groups.get(lang)
        if group is None or len(group) == 0:
            raise CorpusError(
                f"batch has no {lang.value} pairs; the joint objective needs both languages"
            )
        vec = encode_graph(tape, model, leaves, group.api_ids, group.api_mask, lang)
        nll = decode_nll_graph(tape, model, leaves, vec, group)
        term = tape.scale(nll, 1.0 / len(group))
        parts[lang] = float(term.value)
        loss = term if loss is None else tape.add(loss, term)
    return loss, parts


def forward_loss(model: JointModel, batch: Batch) -> float:
    tape = Tape()
    loss, _ = loss_graph(tape, model, model.store.leaves(tape), batch)
    return float(loss.value)


def language_loss(model: JointModel, group: EncodedGroup) -> float:
    """Mean per-sequence NLL of a single-language group (one term of the joint loss)."""
    tape = Tape()
    leaves = model.store.leaves(tape)
    vec = encode_graph(tape, model, leaves, group.api_ids, group.api_mask, group.language)
    nll = decode_nll_graph(tape, model, leaves, vec, group)
    return float(tape.scale(nll, 1.0 / len(group)).value)


def evaluate_loss(model: JointModel, corpus: Corpus, chunk_size: int = 256) -> float:
    """Per-token NLL of every description in the corpus, forward only."""
    total = 0.0
    tokens = 0
    for lang in Language:
        recs = corpus.by_language(lang)
        for i in range(0, len(recs), chunk_size):
            group = encode_group(recs[i:i + chunk_size], model.api_vocab, model.word_vocab)
            tape = Tape(record=False)
            leaves = model.store.leaves(tape)
            vec = encode_graph(tape, model, leaves, group.api_ids, group.api_mask, lang)
            total += float(decode_nll_graph(tape, model, leaves, vec, group).value)
            tokens += group.n_tokens
    if tokens == 0:
        raise CorpusError("corpus has no description tokens")
    return total / tokens


def loss_and_grads(model: JointModel, batch: Batch, params: dict | None = None,
                   with_parts: bool = False):
    """Joint loss and its gradient for every parameter. ``params`` replaces
    the model's parameter values when given (used by gradient checking).
    With ``with_parts`` the per-language mean terms are returned as a third
    element."""
    tape = Tape()
    source = model.store.params if params is None else params
    leaves = {name: tape.leaf(source[name]) for name in sorted(source)}
    loss, parts = loss_graph(tape, model, leaves, batch)
    tape.backward(loss)
    grads = collect_grads(leaves)
    if with_parts:
        return float(loss.value), grads, parts
    return float(loss.value), grads


def embed(model: JointModel, api_index_sequence: Sequence[int], mask: Sequence[bool] | None = None,
          language: Language = Language.SOURCE) -> np.ndarray:
    ids = np.asarray([api_index_sequence], dtype=np.int64)
    m = np.ones_like(ids, dtype=bool) if mask is None else np.asarray([mask], dtype=bool)
    if not m.any():
        raise ValueError("cannot embed an all-PAD sequence")
    return embed_arrays(model, ids, m, language)[0]


def embed_arrays(model: JointModel, api_ids: np.ndarray, api_mask: np.ndarray,
                 language: Language) -> np.ndarray:
    tape = Tape(record=False)
    leaves = model.store.leaves(tape)
    return encode_graph(tape, model, leaves, api_ids, api_mask, language).value


def embed_records(model: JointModel, records: Sequence[SnippetRecord], chunk_size: int = 256) -> list[SemanticVector]:
    out: list[SemanticVector | None] = [None] * len(records)
    for lang in Language:
        idx = [i for i, r in enumerate(records) if r.language is lang]
        for start in range(0, len(idx), chunk_size):
            chunk = idx[start:start + chunk_size]
            seqs = [encode_sequence(records[i].api_sequence, model.api_vocab)[0] for i in chunk]
            ids, mask = pad_batch(seqs)
            vecs = embed_arrays(model, ids, mask, lang)
            for row, i in enumerate(chunk):
                out[i] = SemanticVector(vecs[row].copy(), records[i].id, lang)
    return out  # type: ignore[return-value]


def embed_corpus(model: JointModel, corpus: Corpus, chunk_size: int = 256) -> list[SemanticVector]:
    return embed_records(model, corpus.records, chunk_size)


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    token_loss: float
    wall_time: float
    n_batches: int

    def to_dict(self, timestamps: bool = True) -> dict:
        d = {"epoch": self.epoch, "mean_loss": self.mean_loss, "token_loss": self.token_loss,
             "n_batches": self.n_batches}
        if timestamps:
            d["wall_time"] = round(self.wall_time, 3)
        return d


def _epoch_order(n: int, n_batches: int, half: int, seed: int, epoch: int, lang: Language) -> np.ndarray:
    # Fresh permutations, concatenated when one language is shorter than the other.
    rng = np.random.default_rng([seed, epoch, 0 if lang is Language.SOURCE else 1])
    need = n_batches * half
    parts = []
    while sum(len(p) for p in parts) < need:
        parts.append(rng.permutation(n))
    return np.concatenate(parts)[:need]


def iter_batches(records_by_lang: dict[Language, list[SnippetRecord]], half: int, seed: int,
                 epoch: int) -> Iterator[list[SnippetRecord]]:
    n_batches = math.ceil(max(len(v) for v in records_by_lang.values()) / half)
    orders = {
        lang: _epoch_order(len(recs), n_batches, half, seed, epoch, lang)
        for lang, recs in records_by_lang.items()
    }
    for b in range(n_batches):
        batch = []
        for lang in Language:
            recs = records_by_lang[lang]
            batch.extend(recs[i] for i in orders[lang][b * half:(b + 1) * half])
        yield batch


def train(model: JointModel, corpus: Corpus, epochs: int,
          on_epoch: Callable[[EpochStats], None] | None = None) -> list[EpochStats]:
    """Mini-batch Adadelta on the joint objective.

    Each batch holds ``batch_size / 2`` pairs from each language, drawn
    without replacement from a per-epoch permutation seeded by
    ``(seed, epoch)``, so a run resumed from a checkpoint continues exactly
    as an uninterrupted one. Stops early once the epoch loss improves by
    less than ``early_stop_tol`` (relative) over ``early_stop_patience``
    epochs.
    """
    cfg = model.config
    if epochs < 0:
        raise ConfigError("epochs must be >= 0")
    log: list[EpochStats] = []
    if epochs == 0:
        return log
    corpus.require_both_languages()
    by_lang = {lang: corpus.by_language(lang) for lang in Language}
    half = cfg.batch_size // 2
    for _ in range(epochs):
        epoch = model.epochs_trained + 1
        start = time.perf_counter()
        losses, tok_loss, n_tok, n_batches = 0.0, 0.0, 0, 0
        for recs in iter_batches(by_lang, half, cfg.seed, epoch):
            batch = Batch.from_records(recs, model.api_vocab, model.word_vocab)
            loss, grads, parts = loss_and_grads(model, batch, with_parts=True)
            if not math.isfinite(loss):
                raise NumericError(f"non-finite loss {loss} in epoch {epoch}, batch {n_batches + 1}")
            grads, norm = clip_by_global_norm(grads, cfg.clip_norm)
            if not math.isfinite(norm):
                raise NumericError(f"non-finite gradient norm in epoch {epoch}")
            adadelta_update(model.store, grads, cfg.rho, cfg.epsilon)
            tokens = batch.n_tokens()
            # Each language term is a per-sequence mean; undo it to get token sums.
            token_sum = sum(parts[lang] * len(batch.groups[lang]) for lang in Language)
            losses += loss
            tok_loss += token_sum
            n_tok += tokens
            n_batches += 1
        stats = EpochStats(epoch, losses / n_batches, tok_loss / n_tok, time.perf_counter() - start, n_batches)
        model.epochs_trained = epoch
        model.history.append(stats.to_dict(timestamps=False))
        log.append(stats)
        if on_epoch:
            on_epoch(stats)
        if _plateaued(model.history, cfg.early_stop_patience, cfg.early_stop_tol):
            break
    return log


def _plateaued(history: list[dict], patience: int, tol: float) -> bool:
    if patience <= 0 or len(history) <= patience:
        return False
    before = history[-1 - patience]["mean_loss"]
    now = history[-1]["mean_loss"]
    return (before - now) / abs(before) < tol

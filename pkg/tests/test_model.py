import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import S, T, rec, tiny_config
from apialign.checkpoint import checkpoint_bytes, checkpoint_from_bytes
from apialign.corpus import build_corpus, encode_sequence
from apialign.errors import ConfigError, CorpusError, NumericError
from apialign.model import (
    Batch, JointModel, ModelConfig, embed, embed_arrays, embed_corpus, encode_group, evaluate_loss,
    forward_loss, language_loss, loss_and_grads, train,
)
from apialign.neural import gradient_check


def test_config_validation():
    with pytest.raises(ConfigError):
        ModelConfig(batch_size=3)
    with pytest.raises(ConfigError):
        ModelConfig(hidden_units=0)
    with pytest.raises(ConfigError):
        ModelConfig(cell="lstm")
    big = ModelConfig.full_scale()
    assert (big.hidden_units, big.num_layers, big.batch_size) == (1000, 2, 200)
    assert ModelConfig.from_dict(big.to_dict()) == big


def test_embed_shape_and_determinism(tiny_model, small_corpus):
    ids, _ = encode_sequence(["A.new", "A.read"], small_corpus.api_vocab)
    v1 = embed(tiny_model, ids)
    v2 = embed(tiny_model, ids)
    assert v1.shape == (2 * tiny_model.config.hidden_units,)
    assert np.array_equal(v1, v2)


def test_embed_ignores_trailing_pad(tiny_model, small_corpus):
    ids, _ = encode_sequence(["A.new", "A.read"], small_corpus.api_vocab)
    padded = list(ids) + [0, 0, 0]
    mask = [True, True, False, False, False]
    assert np.array_equal(embed(tiny_model, ids), embed(tiny_model, padded, mask))


def test_embed_all_pad_rejected(tiny_model):
    with pytest.raises(ValueError):
        embed(tiny_model, [0, 0], [False, False])


def test_two_layer_shape(small_corpus):
    m = JointModel.create(tiny_config(num_layers=2), small_corpus.api_vocab, small_corpus.word_vocab)
    ids, _ = encode_sequence(["B.put"], small_corpus.api_vocab)
    assert embed(m, ids).shape == (10,)


def test_batched_equals_unbatched(tiny_model, small_corpus):
    vecs = embed_corpus(tiny_model, small_corpus, chunk_size=4)
    for v in vecs:
        r = small_corpus.get(v.record_id)
        ids, _ = encode_sequence(r.api_sequence, small_corpus.api_vocab)
        single = embed(tiny_model, ids, language=r.language)
        assert np.max(np.abs(single - v.values)) == 0.0
    assert [v.record_id for v in vecs] == [r.id for r in small_corpus.records]


def test_embed_empty_corpus(tiny_model):
    empty = build_corpus([])
    assert embed_corpus(tiny_model, empty) == []


def test_untrained_loss_near_uniform(small_corpus):
    # Small initial weights give near-uniform softmax: loss per token ~ ln|W|.
    m = JointModel.create(tiny_config(), small_corpus.api_vocab, small_corpus.word_vocab)
    per_token = evaluate_loss(m, small_corpus)
    assert per_token == pytest.approx(math.log(len(small_corpus.word_vocab)), rel=0.05)


def test_joint_loss_is_sum_of_language_terms(tiny_model, small_corpus):
    batch = Batch.from_records(small_corpus.records, tiny_model.api_vocab, tiny_model.word_vocab)
    total = forward_loss(tiny_model, batch)
    parts = sum(language_loss(tiny_model, g) for g in batch.groups.values())
    assert total == pytest.approx(parts, rel=1e-12, abs=0)
    _, _, by_lang = loss_and_grads(tiny_model, batch, with_parts=True)
    assert set(by_lang) == {S, T}


def test_duplicated_batch_same_loss(tiny_model, small_corpus):
    recs = list(small_corpus.records)
    a = forward_loss(tiny_model, Batch.from_records(recs, tiny_model.api_vocab, tiny_model.word_vocab))
    b = forward_loss(tiny_model, Batch.from_records(recs + recs, tiny_model.api_vocab, tiny_model.word_vocab))
    assert a == pytest.approx(b, rel=1e-12)


def test_loss_ignores_extra_padding(tiny_model, small_corpus):
    recs = small_corpus.by_language(S)
    g1 = encode_group(recs, tiny_model.api_vocab, tiny_model.word_vocab)
    g2 = encode_group(recs, tiny_model.api_vocab, tiny_model.word_vocab, api_len=9, dec_steps=12)
    assert g2.api_ids.shape[1] == 9 and g2.dec_in.shape[1] == 12
    assert language_loss(tiny_model, g1) == language_loss(tiny_model, g2)


def test_group_must_be_single_language(tiny_model, small_corpus):
    with pytest.raises(ValueError):
        encode_group(small_corpus.records, tiny_model.api_vocab, tiny_model.word_vocab)


@pytest.mark.parametrize("kw", [{}, {"cell": "tanh"}, {"separate_encoders": True}, {"num_layers": 2}])
def test_model_gradients(small_corpus, kw):
    m = JointModel.create(tiny_config(embedding_dim=3, hidden_units=3, **kw),
                          small_corpus.api_vocab, small_corpus.word_vocab)
    batch = Batch.from_records(small_corpus.records, m.api_vocab, m.word_vocab)

    def f(params):
        return loss_and_grads(m, batch, params)

    report = gradient_check(f, m.store.params, n_samples=60)
    assert report.passed, str(report)


def test_separate_encoders_differ(small_corpus):
    m = JointModel.create(tiny_config(separate_encoders=True), small_corpus.api_vocab, small_corpus.word_vocab)
    assert any(k.startswith("enc_src") for k in m.store.params)
    ids, _ = encode_sequence(["A.new"], small_corpus.api_vocab)
    assert not np.array_equal(embed(m, ids, language=S), embed(m, ids, language=T))


def test_shared_encoder_language_blind(tiny_model, small_corpus):
    ids, _ = encode_sequence(["A.new"], small_corpus.api_vocab)
    assert np.array_equal(embed(tiny_model, ids, language=S), embed(tiny_model, ids, language=T))


def _fresh(corpus, **kw):
    return JointModel.create(tiny_config(**kw), corpus.api_vocab, corpus.word_vocab)


def test_train_deterministic(small_corpus):
    a, b = _fresh(small_corpus), _fresh(small_corpus)
    la = train(a, small_corpus, 2)
    lb = train(b, small_corpus, 2)
    assert [s.mean_loss for s in la] == [s.mean_loss for s in lb]
    for k in a.store.params:
        assert np.array_equal(a.store.params[k], b.store.params[k])
    assert a.history == b.history and a.epochs_trained == 2


def test_zero_epochs_is_noop(small_corpus):
    m = _fresh(small_corpus)
    before = {k: v.copy() for k, v in m.store.params.items()}
    assert train(m, small_corpus, 0) == []
    assert m.epochs_trained == 0
    for k, v in before.items():
        assert np.array_equal(v, m.store.params[k])
    with pytest.raises(ConfigError):
        train(m, small_corpus, -1)


def test_resume_matches_uninterrupted(small_corpus):
    straight = _fresh(small_corpus)
    train(straight, small_corpus, 4)
    part = _fresh(small_corpus)
    train(part, small_corpus, 2)
    resumed = checkpoint_from_bytes(checkpoint_bytes(part))
    train(resumed, small_corpus, 2)
    assert resumed.history == straight.history
    for k in straight.store.params:
        assert np.array_equal(straight.store.params[k], resumed.store.params[k])


def test_training_reduces_loss(small_corpus):
    m = _fresh(small_corpus, batch_size=6)
    log = train(m, small_corpus, 8)
    losses = [s.mean_loss for s in log]
    assert losses[-1] < losses[0]
    assert all(s.n_batches == 1 for s in log)


def test_unbalanced_languages_cycle(small_records):
    corpus = build_corpus(small_records + [rec("s4", S, "A.read", "read it")])
    m = JointModel.create(tiny_config(), corpus.api_vocab, corpus.word_vocab)
    log = train(m, corpus, 1)
    assert log[0].n_batches == 2


def test_train_needs_both_languages(small_records):
    corpus = build_corpus([r for r in small_records if r.language is S])
    m = JointModel.create(tiny_config(), corpus.api_vocab, corpus.word_vocab)
    with pytest.raises(CorpusError):
        train(m, corpus, 1)


def test_non_finite_loss_raises(small_corpus):
    m = _fresh(small_corpus)
    m.store.params["word_emb"][:] = np.nan
    with pytest.raises(NumericError):
        train(m, small_corpus, 1)


def test_early_stopping(small_corpus):
    # A huge tolerance counts every epoch as a plateau once patience is met.
    m = _fresh(small_corpus, early_stop_patience=2, early_stop_tol=10.0)
    log = train(m, small_corpus, 10)
    assert len(log) == 3


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from(["A.new", "A.read", "A.write", "A.close", "B.new", "B.put"]),
                min_size=1, max_size=6),
       st.integers(1, 6))
def test_padding_invariance_property(tokens, extra):
    corpus = build_corpus([rec("s1", S, "A.new A.read A.write A.close", "x"),
                           rec("t1", T, "B.new B.put", "y")])
    m = JointModel.create(tiny_config(), corpus.api_vocab, corpus.word_vocab)
    ids, _ = encode_sequence(tokens, corpus.api_vocab)
    ids = np.asarray([ids])
    padded = np.concatenate([ids, np.zeros((1, extra), dtype=ids.dtype)], axis=1)
    mask = padded != 0
    a = embed_arrays(m, ids, np.ones_like(ids, dtype=bool), S)
    b = embed_arrays(m, padded, mask, S)
    assert np.array_equal(a, b)

import struct

import numpy as np
import pytest

from apialign.checkpoint import (
    FORMAT_VERSION, MAGIC, checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint,
)
from apialign.corpus import encode_sequence
from apialign.errors import (
    CheckpointChecksumError, CheckpointError, CheckpointTruncatedError, CheckpointVersionError, DataError,
)
from apialign.model import embed, train


@pytest.fixture
def trained(tiny_model, small_corpus):
    train(tiny_model, small_corpus, 2)
    return tiny_model


def test_round_trip_is_bit_exact(trained, small_corpus, tmp_path):
    path = tmp_path / "m.ckpt"
    save_checkpoint(trained, path)
    loaded = load_checkpoint(path)
    assert loaded.config == trained.config
    assert loaded.epochs_trained == 2 and loaded.history == trained.history
    assert loaded.api_vocab.to_dict() == trained.api_vocab.to_dict()
    for k, v in trained.store.params.items():
        assert np.array_equal(v, loaded.store.params[k])
        assert np.array_equal(trained.store.sq_grad[k], loaded.store.sq_grad[k])
        assert np.array_equal(trained.store.sq_update[k], loaded.store.sq_update[k])
    for r in small_corpus.records:
        ids, _ = encode_sequence(r.api_sequence, small_corpus.api_vocab)
        assert np.array_equal(embed(trained, ids, language=r.language), embed(loaded, ids, language=r.language))


def test_bytes_are_deterministic(trained):
    assert checkpoint_bytes(trained) == checkpoint_bytes(trained)
    assert checkpoint_bytes(trained).startswith(MAGIC)


def test_no_temp_file_left(trained, tmp_path):
    save_checkpoint(trained, tmp_path / "m.ckpt")
    assert [p.name for p in tmp_path.iterdir()] == ["m.ckpt"]


def test_corrupted_byte(trained):
    data = bytearray(checkpoint_bytes(trained))
    data[len(data) // 2] ^= 0xFF
    with pytest.raises(CheckpointChecksumError):
        checkpoint_from_bytes(bytes(data))


def test_wrong_version_names_both(trained):
    data = bytearray(checkpoint_bytes(trained))
    struct.pack_into("<I", data, len(MAGIC), FORMAT_VERSION + 6)
    with pytest.raises(CheckpointVersionError) as err:
        checkpoint_from_bytes(bytes(data))
    msg = str(err.value)
    assert str(FORMAT_VERSION + 6) in msg and str(FORMAT_VERSION) in msg


@pytest.mark.parametrize("keep", [0, 10, 100, -1])
def test_truncated(trained, keep):
    data = checkpoint_bytes(trained)
    with pytest.raises(CheckpointTruncatedError):
        checkpoint_from_bytes(data[:keep])


def test_bad_magic_and_trailing_bytes(trained):
    data = checkpoint_bytes(trained)
    with pytest.raises(CheckpointError):
        checkpoint_from_bytes(b"NOTACKPT" + data[8:])
    with pytest.raises(CheckpointError):
        checkpoint_from_bytes(data + b"\x00")


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.ckpt")


def test_errors_are_data_errors():
    assert issubclass(CheckpointChecksumError, DataError)
    assert issubclass(CheckpointVersionError, CheckpointError)

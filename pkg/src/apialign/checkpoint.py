"""Binary checkpoint format.

Layout (all integers little-endian)::

    magic      8 bytes   b"APIALGN\\x00"
    version    uint32
    length     uint64    byte length of the payload that follows
    payload:
      header   uint32 length + UTF-8 JSON (config, vocabularies, training state)
      blocks   per array: uint16 name length, name, uint8 ndim, uint64 dims,
               float64 values in C order
    checksum   32 bytes  SHA-256 of everything before it

Parameters and both Adadelta accumulators are stored, so a loaded model
resumes training exactly where it stopped.
"""
from __future__ import annotations

import hashlib
import io
import json
import struct
from pathlib import Path

import numpy as np

from .corpus import Vocabulary
from .errors import CheckpointChecksumError, CheckpointError, CheckpointTruncatedError, CheckpointVersionError
from .model import JointModel, ModelConfig
from .neural import ParamStore

MAGIC = b"APIALGN\x00"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
_DIGEST = 32


def _write_array(buf: io.BytesIO, name: str, arr: np.ndarray) -> None:
    raw = name.encode("utf-8")
    buf.write(struct.pack("<H", len(raw)))
    buf.write(raw)
    buf.write(struct.pack("<B", arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_array(view: memoryview, pos: int) -> tuple[str, np.ndarray, int]:
    (n,) = struct.unpack_from("<H", view, pos)
    pos += 2
    name = bytes(view[pos:pos + n]).decode("utf-8")
    pos += n
    (ndim,) = struct.unpack_from("<B", view, pos)
    pos += 1
    shape = struct.unpack_from(f"<{ndim}Q", view, pos)
    pos += 8 * ndim
    count = int(np.prod(shape, dtype=np.int64))
    arr = np.frombuffer(view, dtype="<f8", count=count, offset=pos).astype(np.float64).reshape(shape)
    pos += 8 * count
    return name, arr, pos


def checkpoint_bytes(model: JointModel, version: int = FORMAT_VERSION) -> bytes:
    store = model.store
    header = {
        "config": model.config.to_dict(),
        "api_vocab": model.api_vocab.to_dict(),
        "word_vocab": model.word_vocab.to_dict(),
        "epochs_trained": model.epochs_trained,
        "optimizer_steps": store.steps,
        "history": model.history,
        "params": store.names(),
    }
    payload = io.BytesIO()
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    payload.write(struct.pack("<I", len(raw)))
    payload.write(raw)
    for name in store.names():
        _write_array(payload, name, store.params[name])
        _write_array(payload, "sq_grad/" + name, store.sq_grad[name])
        _write_array(payload, "sq_update/" + name, store.sq_update[name])
    body = _PREFIX.pack(MAGIC, version, payload.tell()) + payload.getvalue()
    return body + hashlib.sha256(body).digest()


def save_checkpoint(model: JointModel, path: str | Path) -> None:
    data = checkpoint_bytes(model)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def checkpoint_from_bytes(data: bytes) -> JointModel:
    if len(data) < _PREFIX.size:
        raise CheckpointTruncatedError(f"checkpoint truncated: {len(data)} bytes, header needs {_PREFIX.size}")
    magic, version, length = _PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"checkpoint format version {version}, this build reads version {FORMAT_VERSION}")
    expected = _PREFIX.size + length + _DIGEST
    if len(data) < expected:
        raise CheckpointTruncatedError(f"checkpoint truncated: {len(data)} of {expected} bytes")
    if len(data) > expected:
        raise CheckpointError(f"checkpoint has {len(data) - expected} trailing bytes")
    body, digest = data[:-_DIGEST], data[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointChecksumError("checkpoint checksum mismatch (file corrupted)")
    view = memoryview(body)
    pos = _PREFIX.size
    (n,) = struct.unpack_from("<I", view, pos)
    pos += 4
    header = json.loads(bytes(view[pos:pos + n]).decode("utf-8"))
    pos += n
    arrays = {}
    while pos < len(body):
        name, arr, pos = _read_array(view, pos)
        arrays[name] = arr
    names = header["params"]
    store = ParamStore(
        {k: arrays[k] for k in names},
        {k: arrays["sq_grad/" + k] for k in names},
        {k: arrays["sq_update/" + k] for k in names},
        header["optimizer_steps"],
    )
    return JointModel(
        ModelConfig.from_dict(header["config"]),
        Vocabulary.from_dict(header["api_vocab"]),
        Vocabulary.from_dict(header["word_vocab"]),
        store,
        header["epochs_trained"],
        header["history"],
    )


def load_checkpoint(path: str | Path) -> JointModel:
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint not found: {path}") from None
    return checkpoint_from_bytes(data)

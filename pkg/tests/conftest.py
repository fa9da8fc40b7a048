import numpy as np
import pytest

from apialign.corpus import Language, SnippetRecord, build_corpus
from apialign.model import JointModel, ModelConfig

S, T = Language.SOURCE, Language.TARGET

# Acceptance outcomes, filled by tests/test_acceptance.py and printed once at the end.
ACCEPTANCE: dict[str, tuple[bool, str]] = {}
CRITERIA = ("A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8")


def pytest_terminal_summary(terminalreporter):
    ran = [c for c in CRITERIA if c in ACCEPTANCE]
    if not ran and not any("test_acceptance" in str(getattr(r, "nodeid", ""))
                           for rs in terminalreporter.stats.values() for r in rs if hasattr(r, "nodeid")):
        return
    terminalreporter.section("acceptance criteria")
    for c in CRITERIA:
        if c in ACCEPTANCE:
            ok, detail = ACCEPTANCE[c]
            terminalreporter.write_line(f"{c} {'PASS' if ok else 'FAIL'}  {detail}")
        else:
            terminalreporter.write_line(f"{c} FAIL  (not run or raised before reporting)")


def rec(rid, lang, api, desc):
    return SnippetRecord(rid, lang, tuple(api.split()), tuple(desc.split()))


@pytest.fixture
def small_records():
    return [
        rec("s1", S, "A.new A.read A.close", "read a file"),
        rec("s2", S, "B.new B.put", "add item"),
        rec("s3", S, "A.new A.write", "write a file"),
        rec("t1", T, "X.New X.Read X.Close", "read file"),
        rec("t2", T, "Y.New Y.Add", "add an item"),
        rec("t3", T, "X.New X.Write X.Close", "write the file"),
    ]


@pytest.fixture
def small_corpus(small_records):
    return build_corpus(small_records)


def tiny_config(**kw):
    base = dict(embedding_dim=6, hidden_units=5, batch_size=4, seed=3, early_stop_patience=0)
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture
def tiny_model(small_corpus):
    return JointModel.create(tiny_config(), small_corpus.api_vocab, small_corpus.word_vocab)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

import logging
from pathlib import Path

import pytest

from btdiversity.decodelab import builtin_corpus_lines, tokenize_corpus, train_ngram_model

DATA = Path(__file__).resolve().parent / "data"

# Lines recorded by the acceptance module, echoed in the terminal summary.
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def corpus_tokens():
    return tokenize_corpus(builtin_corpus_lines())


@pytest.fixture(scope="session")
def lab_model(corpus_tokens):
    """Order-3 model on the bundled corpus (the decoding-lab default)."""
    return train_ngram_model(corpus_tokens, order=3, alpha=0.1)


@pytest.fixture(scope="session")
def lab_model_path(lab_model, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "model.json"
    lab_model.save(path)
    return path


@pytest.fixture(scope="session")
def small_model():
    """Order-2 model on a tiny corpus; small vocabulary keeps exact tests fast."""
    lines = (DATA / "small_corpus.txt").read_text(encoding="utf-8").splitlines()
    return train_ngram_model(tokenize_corpus(lines), order=2, alpha=0.1)


@pytest.fixture(autouse=True)
def _quiet_library_warnings():
    logging.getLogger("btdiversity").setLevel(logging.ERROR)
    yield
    logging.getLogger("btdiversity").setLevel(logging.NOTSET)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])

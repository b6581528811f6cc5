import pytest

from era import corpus_path
from era.engine import analyze
from era.frontend import SourceProgram, load


def corpus(name: str):
    return load(SourceProgram.read(corpus_path(name)))


@pytest.fixture(scope="session")
def branch_merge():
    return analyze(corpus("branch_merge"))


@pytest.fixture(scope="session")
def loop_findings():
    return analyze(corpus("loop_findings"))


@pytest.fixture(scope="session")
def kmp():
    return analyze(corpus("kmp"))

import shutil
from pathlib import Path

import pytest

from sequoia import corpus as C
from sequoia import prelude
from sequoia import typecheck as TC

CORPUS = Path(__file__).resolve().parents[1] / "corpus"


@pytest.fixture(scope="session")
def corpus_entries():
    return C.load_corpus(CORPUS)


@pytest.fixture(scope="session")
def corpus_report(corpus_entries):
    return C.check_all(corpus_entries)


@pytest.fixture(scope="session")
def corpus_world(corpus_entries):
    """(world, {theory name -> CheckedTheory}) for the pristine corpus."""
    world = prelude.standard_world()
    for entry in corpus_entries:
        world.add_raw(entry.theory)
    checked = {entry.name: TC.check_theory(world, entry.name)
               for entry in corpus_entries}
    return world, checked


@pytest.fixture
def corpus_copy(tmp_path):
    """A throwaway copy of the corpus for mutation tests."""
    dst = tmp_path / "corpus"
    shutil.copytree(CORPUS, dst)
    return dst

import numpy as np
import pytest

from deepdial.constraints import DemonstrationCorpus, train_nb
from deepdial.datapack import default_data_dir, load_data_pack


@pytest.fixture(scope="session")
def pack():
    return load_data_pack()


@pytest.fixture(scope="session")
def shipped_corpus():
    path = default_data_dir() / "demonstrations.json"
    return DemonstrationCorpus.from_json(path.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def nb_model(shipped_corpus):
    return train_nb(shipped_corpus)


@pytest.fixture
def rng():
    return np.random.default_rng(0)

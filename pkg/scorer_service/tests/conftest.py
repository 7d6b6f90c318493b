import time

import pytest

from wicscorer.data import make_separable_fixture
from wicscorer.train import TrainConfig, train

FIXTURE_SEED = 11

# From-scratch training of the tiny preset; the 1e-5 default targets
# fine-tuning a pretrained model and barely moves fresh weights.
FIXTURE_CONFIG = dict(base_model="tiny", epochs=20, learning_rate=1e-3,
                      batch_size=16, seed=11)


@pytest.fixture(scope="session")
def separable_fixture():
    return make_separable_fixture(seed=FIXTURE_SEED)


@pytest.fixture(scope="session")
def trained(separable_fixture, tmp_path_factory):
    out = tmp_path_factory.mktemp("artifact")
    started = time.monotonic()
    result = train(separable_fixture["train_pairs"], TrainConfig(**FIXTURE_CONFIG), out)
    elapsed = time.monotonic() - started
    return {"result": result, "elapsed": elapsed, "dir": out}

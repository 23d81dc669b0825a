import numpy as np
import pytest

from rolecast.corpus import split_corpus
from rolecast.embed import build_deterministic_store
from rolecast.instances import balance, build_all_instances, collect_pairs, shard
from rolecast.model import AdamParams, NetworkConfig
from rolecast.synthetic import make_synthetic_corpus, make_synthetic_manifest
from rolecast.trainer import BatchSource, TrainParams, train_segments

EMBED_DIM = 64
SEED = 7


@pytest.fixture(scope="session")
def synthetic_corpus():
    return make_synthetic_corpus()


@pytest.fixture(scope="session")
def synthetic_splits(synthetic_corpus):
    train, dev, test = split_corpus(synthetic_corpus, make_synthetic_manifest())
    return {"train": train, "dev": dev, "test": test}


@pytest.fixture(scope="session")
def synthetic_store(synthetic_splits):
    return build_deterministic_store(synthetic_splits.values(), dim=EMBED_DIM, seed=0)


@pytest.fixture(scope="session")
def trained(synthetic_splits, synthetic_store):
    """Shards, batch source, and the 20 checkpoints of a converged synthetic run."""
    table = collect_pairs(synthetic_splits["train"])
    balanced = balance(build_all_instances(table), seed=SEED)
    shards = shard(balanced, 20, seed=SEED)
    source = BatchSource(synthetic_store, table)
    config = NetworkConfig(input_dim=4 * EMBED_DIM, n_blocks=2, dropout_rate=0.3, seed=SEED)
    params = TrainParams(batch_size=128, epochs_per_segment=8,
                         adam=AdamParams(learning_rate=3e-3))
    checkpoints, metrics = train_segments(shards, source, config, params)
    return {
        "table": table,
        "shards": shards,
        "source": source,
        "config": config,
        "params": params,
        "checkpoints": checkpoints,
        "metrics": metrics,
    }


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))

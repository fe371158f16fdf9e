from __future__ import annotations

import pytest

from sketchparse.data import Corpus, GenConfig, generate_synthetic, split


@pytest.fixture(scope="session")
def small_corpus() -> Corpus:
    cfg = GenConfig(samples_per_class=60, entity_vocab=30, predicate_vocab=16, seed=7)
    return generate_synthetic(cfg)


@pytest.fixture(scope="session")
def small_splits(small_corpus):
    return split(small_corpus, (0.8, 0.1, 0.1), seed=1)

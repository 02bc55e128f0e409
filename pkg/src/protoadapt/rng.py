"""Seeded random-number streams.

Every stochastic operation draws from a Philox (4x64, 10 rounds) counter
generator keyed by (user seed, stream constant). Philox output is fixed by
its published algorithm, so a given seed reproduces the same splits, draws,
and checkpoints across platforms and numpy releases. The stream constants
decouple the consumers: changing the prediction sample count can never
perturb a training run.
"""

import numpy as np

STREAM_SPLIT = 1
STREAM_SYNTH = 2
STREAM_TRAIN_MAP = 3
STREAM_TRAIN_BAYES = 4
STREAM_PREDICT = 5


def make_rng(seed: int, stream: int) -> np.random.Generator:
    key = np.array([np.uint64(seed), np.uint64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))

"""Keyed RNG streams.

Every random decision in the package draws from a stream derived from a
non-negative integer key tuple via ``numpy.random.SeedSequence``.  Distinct
keys give statistically independent streams, and any stream can be
re-created in isolation, which is what makes single protocol cells
re-runnable and parallel runs order-independent.

Key layout (first element is always the user-facing seed):

    (seed, DOMAIN_INIT)                                  parameter init
    (seed, DOMAIN_SHUFFLE, epoch)                        epoch shuffle
    (seed, DOMAIN_BATCH, epoch, batch_index)             minibatch sampling
    (seed, DOMAIN_PROFILE, strategy_code, k,
     init_seed, epoch, example_index, repeat)            CD/I-CD/baseline draws
    (seed, DOMAIN_PROFILE, strategy_code, k,
     init_seed, epoch, chain_index)                      PCD / baseline-group chains
"""

import numpy as np

DOMAIN_INIT = 1
DOMAIN_SHUFFLE = 2
DOMAIN_BATCH = 3
DOMAIN_PROFILE = 4

# strategy codes inside DOMAIN_PROFILE keys
CODE_BASELINE = 0
CODE_CD = 1
CODE_ICD = 2
CODE_PCD = 3
CODE_BASELINE_GROUP = 4
CODE_FIXED_BINARIZE = 5


def stream(*key: int) -> np.random.Generator:
    """Return the generator for an integer key tuple.

    All key parts must be non-negative integers.
    """
    parts = []
    for part in key:
        part = int(part)
        if part < 0:
            raise ValueError(f"stream key parts must be non-negative, got {part}")
        parts.append(part)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(parts)))

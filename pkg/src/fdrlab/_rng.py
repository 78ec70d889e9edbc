"""Replicate-level random stream construction.

One fixed generator family: Philox, a counter-based bit generator,
keyed by (master seed, replicate index) through SeedSequence.  Streams
for distinct replicates are independent and can be created in any
order, so parallel schedules cannot change results.
"""

import numpy as np

from .errors import ValidationError

_MAX_SEED = 2**64 - 1


def check_seed(seed):
    seed = int(seed)
    if not 0 <= seed <= _MAX_SEED:
        raise ValidationError(f"seed must be a 64-bit non-negative integer, got {seed}")
    return seed


def replicate_rng(seed, replicate_index):
    """Independent generator for one replicate of one study."""
    seed = check_seed(seed)
    if replicate_index < 0:
        raise ValidationError(f"replicate index must be >= 0, got {replicate_index}")
    ss = np.random.SeedSequence([seed, int(replicate_index)])
    return np.random.Generator(np.random.Philox(ss))

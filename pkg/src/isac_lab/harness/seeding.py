"""Order-independent seed splitting for Monte Carlo trials."""

from __future__ import annotations

import numpy as np


def child_seed(master_seed: int, *indices: int) -> int:
    """64-bit seed for the trial addressed by ``indices``.

    Uses :class:`numpy.random.SeedSequence` with ``indices`` as the spawn key,
    so a trial's randomness depends only on its address and never on which
    worker runs it or in which order.
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(i) for i in indices))
    return int(seq.generate_state(1, dtype=np.uint64)[0])

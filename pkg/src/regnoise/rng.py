"""Counter-based random streams.

Every random quantity is drawn from a Philox stream keyed by ``(seed, index)``
where ``index`` is a replica (or chunk) number.  The top counter word carries a
purpose tag so that paths, samples and initial guesses never share draws.
Results therefore depend only on the master seed and the index, never on how
the work was distributed over workers.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

MASK64 = (1 << 64) - 1

# purpose tags (top counter word)
OU = 0
SAMPLE = 1
INIT = 2
MARTINGALE = 3
DRIFT = 4


def stream(seed, index, purpose=OU):
    """Return the generator for ``(seed, index, purpose)``."""
    key = np.array([int(seed) & MASK64, int(index) & MASK64], dtype=np.uint64)
    counter = np.array([0, 0, 0, int(purpose)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def ordered_map(fn, items, workers=1):
    """Map ``fn`` over ``items`` keeping input order, optionally on a thread pool."""
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    # contiguous blocks keep pool overhead low when items are many and cheap
    size = max(1, -(-len(items) // (4 * workers)))
    blocks = [items[i:i + size] for i in range(0, len(items), size)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(lambda block: [fn(item) for item in block], blocks)
        return [out for part in parts for out in part]

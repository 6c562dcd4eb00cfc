"""Counter-based random streams and deterministic replicate fan-out.

Every stochastic quantity in the package draws from a ``numpy.random.Generator``
on a Philox bit generator keyed by (master seed, tag word, indices). The key is
fixed before any work is scheduled, so the stream a replicate receives does not
depend on which worker runs it or in which order.
"""
import hashlib
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, List, Sequence, Union

import numpy as np

Index = Union[int, float, str]

MASK64 = (1 << 64) - 1


def tag_word(tag: str) -> int:
    """Map a text tag to a stable 64-bit word."""
    digest = hashlib.sha256(tag.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little')


def _index_word(index: Index) -> int:
    if isinstance(index, (bool, np.bool_)):
        raise TypeError("boolean stream index")
    if isinstance(index, (int, np.integer)):
        if index < 0:
            raise ValueError(f"stream index must be nonnegative, got {index}")
        return int(index) & MASK64
    if isinstance(index, (float, np.floating)):
        # repr is the round-trip form, so equal floats give equal words
        return tag_word(repr(float(index)))
    return tag_word(str(index))


def substream(seed: int, tag: str, *indices: Index) -> np.random.Generator:
    """Return the generator keyed by (seed, tag, indices)."""
    if seed is None:
        raise ValueError("a seed is mandatory; wall-clock seeding is not supported")
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must fit in 64 bits, got {seed}")
    entropy = [seed, tag_word(tag)] + [_index_word(i) for i in indices]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def tree_sum(values: Sequence[float]) -> float:
    """Pairwise (arity 2) reduction with a fixed association order."""
    items = [float(v) for v in values]
    if not items:
        return 0.0
    while len(items) > 1:
        paired = [items[i] + items[i + 1] for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            paired.append(items[-1])
        items = paired
    return items[0]


def tree_mean(values: Sequence[float]) -> float:
    """Mean computed through ``tree_sum``."""
    if len(values) == 0:
        raise ValueError("mean of an empty sequence")
    return tree_sum(values) / len(values)


def run_replicates(fn: Callable[[Any], Any], jobs: Sequence[Any], workers: int = 1) -> List[Any]:
    """Apply ``fn`` to every job, in job order, optionally across processes.

    ``fn`` must be a module-level callable and every job must carry its own
    stream key so the result list is identical for any worker count.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    if workers == 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    chunk = max(1, len(jobs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=chunk))

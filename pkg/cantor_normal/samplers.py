from typing import Iterator, Tuple
import math


class ChunkSampler(object):
    """Splits positions 1..horizon into chunks for parallel counting.

    Chunk c owns window starts [start, stop] and must read digits up to
    min(stop + overlap, horizon), so that windows straddling the chunk
    boundary are counted exactly once. Chunks are dealt round-robin to
    `num_replicas` workers; this sampler yields the ones owned by `rank`.
    """

    def __init__(self, horizon: int, chunk_size: int, overlap: int = 0, num_replicas: int = 1, rank: int = 0):
        if chunk_size < 1:
            raise ValueError("chunk_size must be positive.")
        if overlap < 0:
            raise ValueError("overlap must be non-negative.")
        if not 0 <= rank < num_replicas:
            raise ValueError("rank must lie in [0, num_replicas).")
        self.horizon = horizon
        self.chunk_size = chunk_size
        self.overlap = overlap
        self.num_replicas = num_replicas
        self.rank = rank
        self.n_chunks = int(math.ceil(max(horizon, 0) / chunk_size))

    def chunk(self, c: int) -> Tuple[int, int, int]:
        """(start, stop, read_to) for chunk c, all 1-based and inclusive."""
        start = c * self.chunk_size + 1
        stop = min(start + self.chunk_size - 1, self.horizon)
        return start, stop, min(stop + self.overlap, self.horizon)

    def __iter__(self) -> Iterator[Tuple[int, int, int]]:
        for c in range(self.rank, self.n_chunks, self.num_replicas):
            yield self.chunk(c)

    def __len__(self):
        return len(range(self.rank, self.n_chunks, self.num_replicas))
